//! Trains fusion methods on the synthetic tasks and prints held-out scores
//! and wall time per run. Pretrained components are cached in the given
//! directory.
//!
//! Usage: calibrate_fusion <pretrained dir> [task] [shots] [epochs] [methods,..] [seeds] [prompt lr] [cls|average|full]

use std::path::Path;
use std::time::Instant;

use promptfuse::encoders::PoolingMode;
use promptfuse::experiment::{
    build_dataset, pretrain_all, run_one, ExperimentConfig, Pretrained, RunSpec, Shots, Task,
};
use promptfuse::fusion::FusionMethod;

fn main() -> promptfuse::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = Path::new(&args[0]);
    let mut cfg = ExperimentConfig::default();
    if args.get(1).map(String::as_str) == Some("trimodal") {
        cfg.task = Task::Trimodal;
        cfg.train.batch_size = 8;
    }
    let shots: usize = args.get(2).map_or(512, |a| a.parse().unwrap());
    cfg.train.epochs = args.get(3).map_or(10, |a| a.parse().unwrap());
    let methods: Vec<FusionMethod> = args.get(4).map_or(vec![FusionMethod::PromptFuse], |a| {
        a.split(',').map(|m| m.parse().unwrap()).collect()
    });
    let seeds: u64 = args.get(5).map_or(1, |a| a.parse().unwrap());
    if let Some(lr) = args.get(6) {
        cfg.train.prompt_lr = lr.parse().unwrap();
    }
    cfg.pooling = match args.get(7).map(String::as_str) {
        Some("average") => PoolingMode::Average,
        Some("full") => PoolingMode::FullSequence,
        _ => PoolingMode::Cls,
    };

    let t = Instant::now();
    let pretrained = match Pretrained::load(dir, cfg.model, cfg.pretrain.vision, cfg.pretrain.audio)
    {
        Ok(p) => p,
        Err(_) => {
            let (p, summary) = pretrain_all(cfg.model, &cfg.pretrain)?;
            p.save(dir)?;
            println!(
                "pretrained in {:.1}s: {}",
                t.elapsed().as_secs_f64(),
                serde_json::to_string(&summary).unwrap()
            );
            p
        }
    };
    let data = build_dataset(&cfg, &pretrained)?;
    for method in methods {
        for seed in 0..seeds {
            let t = Instant::now();
            let run = RunSpec {
                method,
                shots: Shots::Count(shots),
                prompt_length: if method.uses_prompts() {
                    cfg.prompt.length
                } else {
                    0
                },
                seed,
            };
            let r = run_one(&cfg, &pretrained, &data, run)?;
            let last = r.records.last().unwrap();
            let losses: Vec<String> = r
                .records
                .iter()
                .filter_map(|x| x.loss)
                .map(|l| format!("{l:.3}"))
                .collect();
            println!(
                "{method} seed {seed}: {:?} train {:?} losses [{}] ({:.1}s)",
                last.eval.unwrap(),
                last.train_accuracy.get("Overall"),
                losses.join(" "),
                t.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
