//! `promptfuse`: pretraining, fusion training, sweeps, evaluation,
//! attribution, parameter counting and data generation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use promptfuse::attribution::{attribute, export_attribution};
use promptfuse::experiment::{
    build_dataset, format_summary, format_sweep_grid, load_checkpoint, pretrain_encoders,
    pretrain_plm, run_config, save_encoders, save_plm, sweep_grid, write_outputs, ExperimentConfig,
    Pretrained, Shots, Task,
};
use promptfuse::fusion::{count_trainable_params, FusionMethod, ParamDims, PromptEncoderMode};
use promptfuse::synthetic::{build_trimodal_splits, build_vqa_splits};
use promptfuse::system::{FusionSystem, SystemSpec};
use promptfuse::trainer::evaluate;
use promptfuse::{Error, Result};

#[derive(Parser)]
#[command(
    name = "promptfuse",
    version,
    about = "Prompt-vector fusion over frozen components"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the config's seed list with this one seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shot count or "full".
    #[arg(long)]
    shots: Option<Shots>,
    /// Fusion method, e.g. PromptFuse.
    #[arg(long)]
    method: Option<FusionMethod>,
    #[arg(long)]
    prompt_length: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the language model and write its checkpoint.
    PretrainPlm(Common),
    /// Pretrain the vision and audio encoders and write their checkpoints.
    PretrainEncoders(Common),
    /// Train and evaluate every configured run.
    Train(Common),
    /// Evaluate a trained run checkpoint on the held-out split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint of trainable parameters written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train over the prompt-length grid.
    Sweep(Common),
    /// Integrated-gradients attribution of one held-out sample.
    Attribute {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Index into the held-out split.
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
    /// Trainable-parameter counts per method.
    CountParams {
        #[arg(long, default_value_t = 768)]
        d: usize,
        #[arg(long, default_value_t = 768)]
        dv: usize,
        #[arg(long, default_value_t = 20)]
        prompt_length: usize,
        #[arg(long, default_value = "Identity")]
        prompt_encoder: String,
        /// Encoder size reported for Finetune; omitted when not given.
        #[arg(long)]
        encoder_params: Option<usize>,
    },
    /// Write the configured task's splits as JSON lines.
    GenData(Common),
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
            cfg.train.seed = s;
        }
        if let Some(k) = self.shots {
            cfg.shots = vec![k];
        }
        if let Some(m) = self.method {
            cfg.methods = vec![m];
        }
        if let Some(n) = self.prompt_length {
            cfg.prompt.length = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self, default: &Path) -> PathBuf {
        self.out.clone().unwrap_or_else(|| default.to_path_buf())
    }
}

fn load_pretrained(cfg: &ExperimentConfig) -> Result<Pretrained> {
    Pretrained::load(
        &cfg.pretrained,
        cfg.model,
        cfg.pretrain.vision,
        cfg.pretrain.audio,
    )
}

fn to_json<T: serde::Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes")
}

fn write(path: &Path, text: String) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A system for the config's first method with trained parameters loaded
/// from `checkpoint` when given.
fn trained_system(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<FusionSystem> {
    let p = load_pretrained(cfg)?;
    let spec = SystemSpec {
        method: cfg.methods[0],
        n_prompts: cfg.prompt.length,
        position: cfg.prompt.position,
        prompt_encoder: cfg.prompt.encoder,
        image_pooling: cfg.pooling,
    };
    let audio = (cfg.task == Task::Trimodal).then(|| p.audio.clone());
    let mut system = FusionSystem::new(p.vocab, p.plm, p.vision, audio, spec, cfg.seeds[0])?;
    if let Some(path) = checkpoint {
        system.load_params(&load_checkpoint(path, system.fingerprint())?)?;
    }
    Ok(system)
}

fn train_like(common: &Common, sweep: bool) -> Result<()> {
    let mut cfg = common.config()?;
    cfg.sweep |= sweep;
    let pretrained = load_pretrained(&cfg)?;
    let out = run_config(&cfg, &pretrained)?;
    let rows = write_outputs(&out, &cfg, &common.out(Path::new("runs")))?;
    print!("{}", format_summary(&rows));
    if cfg.sweep {
        print!(
            "\n{}",
            format_sweep_grid(&sweep_grid(&rows, &cfg.prompt_lengths()))
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PretrainPlm(c) => {
            let cfg = c.config()?;
            let (plm, report) = pretrain_plm(cfg.model, &cfg.pretrain)?;
            save_plm(&c.out(&cfg.pretrained), &plm)?;
            println!("{}", to_json(&report));
        }
        Command::PretrainEncoders(c) => {
            let cfg = c.config()?;
            let ((vision, vr), (audio, ar)) = pretrain_encoders(&cfg.pretrain)?;
            save_encoders(&c.out(&cfg.pretrained), &vision, &audio)?;
            println!(
                "{}",
                to_json(&serde_json::json!({ "vision": vr, "audio": ar }))
            );
        }
        Command::Train(c) => train_like(&c, false)?,
        Command::Sweep(c) => train_like(&c, true)?,
        Command::Eval { common, checkpoint } => {
            let cfg = common.config()?;
            let system = trained_system(&cfg, checkpoint.as_deref())?;
            let pretrained = load_pretrained(&cfg)?;
            let mut data = build_dataset(&cfg, &pretrained)?;
            system.prepare(&mut data.eval)?;
            println!("{}", to_json(&evaluate(&system, &data.eval)?));
        }
        Command::Attribute {
            common,
            checkpoint,
            sample,
        } => {
            let cfg = common.config()?;
            let system = trained_system(&cfg, checkpoint.as_deref())?;
            let pretrained = load_pretrained(&cfg)?;
            let data = build_dataset(&cfg, &pretrained)?;
            let ex = data.eval.get(sample).ok_or(Error::InfeasibleShots {
                k: sample + 1,
                size: data.eval.len(),
            })?;
            let result = attribute(&system, ex, &cfg.ig)?;
            let stem = format!("{}-{sample}", system.spec.method);
            export_attribution(&result, &common.out(Path::new("attribution")), &stem)?;
            println!("{}", to_json(&result));
        }
        Command::CountParams {
            d,
            dv,
            prompt_length,
            prompt_encoder,
            encoder_params,
        } => {
            let encoder = match prompt_encoder.to_ascii_lowercase().as_str() {
                "identity" => PromptEncoderMode::Identity,
                "linear" | "linearlayer" => PromptEncoderMode::LinearLayer,
                "recurrent" | "lstm" => PromptEncoderMode::Recurrent,
                other => return Err(Error::Config(format!("unknown prompt encoder {other:?}"))),
            };
            let dims = ParamDims {
                d,
                d_v: dv,
                n_prompts: prompt_length,
                prompt_encoder: encoder,
                encoder_params: encoder_params.unwrap_or(0),
            };
            for m in FusionMethod::ALL {
                match (m, encoder_params) {
                    (FusionMethod::Finetune, None) => {
                        println!("{:<12} all encoder parameters", m.name())
                    }
                    _ => println!("{:<12} {}", m.name(), count_trainable_params(&dims, m)),
                }
            }
        }
        Command::GenData(c) => {
            let cfg = c.config()?;
            let dir = c.out(Path::new("data"));
            let d = &cfg.data;
            let (train, eval, hist) = match cfg.task {
                Task::Vqa2mod => {
                    let s = build_vqa_splits(&d.scene, d.sizes(), d.seed)?;
                    let lines = |v: &[_]| {
                        v.iter()
                            .map(|x| serde_json::to_string(x).expect("serializes") + "\n")
                            .collect::<String>()
                    };
                    (
                        lines(&s.train),
                        lines(&s.eval),
                        [s.train_histogram, s.eval_histogram],
                    )
                }
                Task::Trimodal => {
                    let s = build_trimodal_splits(d.sizes(), d.seed);
                    let lines = |v: &[_]| {
                        v.iter()
                            .map(|x| serde_json::to_string(x).expect("serializes") + "\n")
                            .collect::<String>()
                    };
                    (
                        lines(&s.train),
                        lines(&s.eval),
                        [s.train_histogram, s.eval_histogram],
                    )
                }
            };
            write(&dir.join("train.jsonl"), train)?;
            write(&dir.join("eval.jsonl"), eval)?;
            let h = serde_json::json!({ "train": hist[0], "eval": hist[1] });
            write(&dir.join("histograms.json"), to_json(&h))?;
            println!("{}", to_json(&h));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
