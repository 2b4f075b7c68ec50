use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checkpoint::{load_checkpoint, save_checkpoint};
use super::config::PretrainSettings;
use crate::encoders::{
    pretrain_audio_encoder, pretrain_vision_encoder, AudioConfig, AudioEncoder, EncoderReport,
    VisionConfig, VisionEncoder,
};
use crate::error::{Error, Result};
use crate::params::{config_fingerprint, ParamStore};
use crate::synthetic::{text_corpus, SceneSpec};
use crate::transformer::{
    pretrain_language_model, EncoderDecoderModel, ModelConfig, PretrainReport, Vocab,
};

pub const PLM_FILE: &str = "plm.pfck";
pub const VISION_FILE: &str = "vision.pfck";
pub const AUDIO_FILE: &str = "audio.pfck";

/// The frozen components shared by every fusion run.
#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained {
    pub vocab: Vocab,
    pub plm: EncoderDecoderModel,
    pub vision: VisionEncoder,
    pub audio: AudioEncoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub plm: PretrainReport,
    pub vision: EncoderReport,
    pub audio: EncoderReport,
}

/// Pretrains the language model on text-only QA over synthetic scenes.
pub fn pretrain_plm(
    model: ModelConfig,
    settings: &PretrainSettings,
) -> Result<(EncoderDecoderModel, PretrainReport)> {
    let vocab = Vocab::synthetic();
    // Empty scenes are included so that "0" and "nothing" are seen.
    let spec = SceneSpec {
        min_objects: 0,
        ..SceneSpec::default()
    };
    let corpus = text_corpus(&spec, settings.corpus, settings.data_seed, 3)?;
    let held_out = text_corpus(&spec, settings.held_out, settings.data_seed, 4)?;
    pretrain_language_model(&corpus, &held_out, &vocab, model, &settings.plm)
}

/// Pretrains both encoders on their classification tasks.
pub fn pretrain_encoders(
    settings: &PretrainSettings,
) -> Result<(
    (VisionEncoder, EncoderReport),
    (AudioEncoder, EncoderReport),
)> {
    Ok((
        pretrain_vision_encoder(settings.vision, &settings.encoders)?,
        pretrain_audio_encoder(settings.audio, &settings.encoders)?,
    ))
}

pub fn pretrain_all(
    model: ModelConfig,
    settings: &PretrainSettings,
) -> Result<(Pretrained, PretrainSummary)> {
    let (plm, plm_report) = pretrain_plm(model, settings)?;
    let ((vision, vision_report), (audio, audio_report)) = pretrain_encoders(settings)?;
    Ok((
        Pretrained {
            vocab: Vocab::synthetic(),
            plm,
            vision,
            audio,
        },
        PretrainSummary {
            plm: plm_report,
            vision: vision_report,
            audio: audio_report,
        },
    ))
}

pub fn save_plm(dir: &Path, plm: &EncoderDecoderModel) -> Result<()> {
    save_checkpoint(
        &dir.join(PLM_FILE),
        plm.config.fingerprint(),
        plm.params.iter(),
    )
}

pub fn save_encoders(dir: &Path, vision: &VisionEncoder, audio: &AudioEncoder) -> Result<()> {
    save_checkpoint(
        &dir.join(VISION_FILE),
        config_fingerprint(&vision.config),
        vision.params.iter(),
    )?;
    save_checkpoint(
        &dir.join(AUDIO_FILE),
        config_fingerprint(&audio.config),
        audio.params.iter(),
    )
}

/// Replaces `fresh` with `loaded` after checking both hold the same names
/// and shapes.
fn adopt(fresh: &mut ParamStore, loaded: ParamStore) -> Result<()> {
    for name in fresh.names() {
        if !loaded.contains(name) {
            return Err(Error::MissingTensor(name.to_string()));
        }
    }
    for (name, t) in loaded.iter() {
        let want = fresh
            .get(name)
            .map_err(|_| Error::UnknownParameter(name.to_string()))?;
        if want.shape() != t.shape() {
            return Err(Error::WidthMismatch {
                expected: want.len(),
                actual: t.len(),
                context: "checkpoint tensor",
            });
        }
    }
    *fresh = loaded;
    Ok(())
}

impl Pretrained {
    pub fn save(&self, dir: &Path) -> Result<()> {
        save_plm(dir, &self.plm)?;
        save_encoders(dir, &self.vision, &self.audio)
    }

    pub fn load(
        dir: &Path,
        model: ModelConfig,
        vision: VisionConfig,
        audio: AudioConfig,
    ) -> Result<Self> {
        let mut plm = EncoderDecoderModel::init(model, 0)?;
        adopt(
            &mut plm.params,
            load_checkpoint(&dir.join(PLM_FILE), model.fingerprint())?,
        )?;
        let mut v = VisionEncoder::init(vision, 0)?;
        adopt(
            &mut v.params,
            load_checkpoint(&dir.join(VISION_FILE), config_fingerprint(&vision))?,
        )?;
        let mut a = AudioEncoder::init(audio, 0)?;
        adopt(
            &mut a.params,
            load_checkpoint(&dir.join(AUDIO_FILE), config_fingerprint(&audio))?,
        )?;
        Ok(Self {
            vocab: Vocab::synthetic(),
            plm,
            vision: v,
            audio: a,
        })
    }
}
