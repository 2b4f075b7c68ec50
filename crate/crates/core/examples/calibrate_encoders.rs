//! Pretrains both modality encoders at the default settings and prints
//! their held-out accuracy and wall time.

use std::time::Instant;

use promptfuse::encoders::{
    pretrain_audio_encoder, pretrain_vision_encoder, AudioConfig, EncoderPretrainConfig,
    VisionConfig,
};

fn main() -> promptfuse::Result<()> {
    let cfg = EncoderPretrainConfig::default();
    let t = Instant::now();
    let (_, v) = pretrain_vision_encoder(VisionConfig::default(), &cfg)?;
    println!(
        "vision losses {:?} accuracy {:.4} ({:.1}s)",
        v.epoch_losses,
        v.held_out_accuracy,
        t.elapsed().as_secs_f64()
    );
    let t = Instant::now();
    let (_, a) = pretrain_audio_encoder(AudioConfig::default(), &cfg)?;
    println!(
        "audio losses {:?} accuracy {:.4} ({:.1}s)",
        a.epoch_losses,
        a.held_out_accuracy,
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
