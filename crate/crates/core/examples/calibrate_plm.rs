//! Pretrains the language model and prints the per-epoch loss, held-out
//! exact match per template and wall time.
//!
//! Usage: calibrate_plm [corpus size] [epochs] [lr] [max filler] [batch] [encoder layers]

use std::collections::BTreeMap;
use std::time::Instant;

use promptfuse::synthetic::{text_corpus, SceneSpec};
use promptfuse::transformer::{
    answer_text, input_ids, pretrain_language_model, ModelConfig, PretrainConfig, Vocab,
};

fn main() -> promptfuse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).map_or(default, |a| a.parse().unwrap());
    let spec = SceneSpec {
        min_objects: 0,
        ..SceneSpec::default()
    };
    let corpus = text_corpus(&spec, arg(0, 4000.0) as usize, 1, 3)?;
    let held_out = text_corpus(&spec, 500, 1, 4)?;
    let vocab = Vocab::synthetic();
    let config = ModelConfig {
        encoder_layers: arg(5, 2.0) as usize,
        ..ModelConfig::desk(vocab.len())
    };
    let train = PretrainConfig {
        epochs: arg(1, 12.0) as usize,
        lr: arg(2, 2e-3) as f32,
        max_filler: arg(3, 24.0) as usize,
        batch_size: arg(4, 32.0) as usize,
        ..PretrainConfig::default()
    };
    let t = Instant::now();
    let (model, report) = pretrain_language_model(&corpus, &held_out, &vocab, config, &train)?;
    println!("losses {:?}", report.epoch_losses);
    println!("held-out exact match {:.4}", report.held_out_exact_match);
    let mut by_kind: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut shown = 0;
    for s in &held_out {
        let kind = ["how", "is", "what", "tone"]
            .into_iter()
            .find(|k| s.input.iter().any(|w| w == k))
            .unwrap_or("?")
            .to_string();
        let got = vocab.decode(&answer_text(&model, &input_ids(&vocab, &s.input)?, 3)?);
        let e = by_kind.entry(kind).or_default();
        e.1 += 1;
        if got == s.answer {
            e.0 += 1;
        } else if shown < 15 {
            shown += 1;
            println!(
                "  miss: {} -> {:?} (want {:?})",
                s.input.join(" "),
                got,
                s.answer
            );
        }
    }
    for (k, (h, n)) in by_kind {
        println!("{k}: {h}/{n}");
    }
    println!("elapsed {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
