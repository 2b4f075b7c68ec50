use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::config::{ExperimentConfig, Shots, Task};
use super::metrics::{emit_metrics, format_sweep_grid, sweep_grid, MetricsRecord, SummaryRow};
use super::pretrained::Pretrained;
use crate::error::{Error, Result};
use crate::fusion::FusionMethod;
use crate::synthetic::{build_trimodal_splits, build_vqa_splits, derive_seed, AnswerHistogram};
use crate::system::{Example, FusionSystem, SystemSpec};
use crate::trainer::{evaluate, partition_parameters, sample_few_shot, train, TrainConfig};

const SHOT_STREAM: u32 = 20;
const INIT_STREAM: u32 = 21;
const ORDER_STREAM: u32 = 22;

/// Model-ready train pool and held-out set of one task.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub eval: Vec<Example>,
}

pub fn build_dataset(config: &ExperimentConfig, pretrained: &Pretrained) -> Result<Dataset> {
    let d = &config.data;
    let vocab = &pretrained.vocab;
    Ok(match config.task {
        Task::Vqa2mod => {
            let s = build_vqa_splits(&d.scene, d.sizes(), d.seed)?;
            let conv = |v: &[_]| {
                v.iter()
                    .map(|q| Example::from_qa(q, vocab))
                    .collect::<Result<Vec<_>>>()
            };
            Dataset {
                train: conv(&s.train)?,
                eval: conv(&s.eval)?,
            }
        }
        Task::Trimodal => {
            let s = build_trimodal_splits(d.sizes(), d.seed);
            let conv = |v: &[_]| {
                v.iter()
                    .map(|t| Example::from_trimodal(t, vocab))
                    .collect::<Result<Vec<_>>>()
            };
            Dataset {
                train: conv(&s.train)?,
                eval: conv(&s.eval)?,
            }
        }
    })
}

/// One (method, shots, prompt length, seed) setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSpec {
    pub method: FusionMethod,
    pub shots: Shots,
    pub prompt_length: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn id(&self, task: Task) -> String {
        let task = match task {
            Task::Vqa2mod => "vqa2mod",
            Task::Trimodal => "trimodal",
        };
        format!(
            "{task}-{}-k{}-n{}-s{}",
            self.method, self.shots, self.prompt_length, self.seed
        )
    }
}

/// Every run of a config, in execution order. Methods without prompts run
/// once per seed with prompt length 0.
pub fn run_specs(config: &ExperimentConfig) -> Vec<RunSpec> {
    let mut out = Vec::new();
    for &method in &config.methods {
        let lengths = match method.uses_prompts() {
            true => config.prompt_lengths(),
            false => vec![0],
        };
        for &shots in &config.shots {
            for &prompt_length in &lengths {
                for &seed in &config.seeds {
                    out.push(RunSpec {
                        method,
                        shots,
                        prompt_length,
                        seed,
                    });
                }
            }
        }
    }
    out
}

/// A finished run: its records, the few-shot histogram, the trained system
/// and how long it took.
pub struct RunResult {
    pub id: String,
    pub records: Vec<MetricsRecord>,
    pub histogram: AnswerHistogram,
    pub system: FusionSystem,
    pub seconds: f64,
}

pub fn run_one(
    config: &ExperimentConfig,
    pretrained: &Pretrained,
    data: &Dataset,
    run: RunSpec,
) -> Result<RunResult> {
    let start = Instant::now();
    let id = run.id(config.task);
    let spec = SystemSpec {
        method: run.method,
        n_prompts: run.prompt_length,
        position: config.prompt.position,
        prompt_encoder: config.prompt.encoder,
        image_pooling: config.pooling,
    };
    let audio = match config.task {
        Task::Trimodal => Some(pretrained.audio.clone()),
        Task::Vqa2mod => None,
    };
    let mut system = FusionSystem::new(
        pretrained.vocab.clone(),
        pretrained.plm.clone(),
        pretrained.vision.clone(),
        audio,
        spec,
        derive_seed(run.seed, INIT_STREAM, 0),
    )?;
    let k = run.shots.resolve(data.train.len());
    let mut few = sample_few_shot(&data.train, k, derive_seed(run.seed, SHOT_STREAM, 0))?;
    let mut eval = data.eval.clone();
    system.prepare(&mut few.samples)?;
    system.prepare(&mut eval)?;
    let partition = partition_parameters(&system, run.method)?;
    let train_config = TrainConfig {
        seed: derive_seed(run.seed, ORDER_STREAM, 0),
        ..config.train.clone()
    };
    let report = train(&mut system, &few.samples, &partition, &train_config)?;
    let scores = evaluate(&system, &eval)?;

    let record =
        |epoch: usize, steps: usize, loss: Option<f64>, acc: BTreeMap<String, f64>| MetricsRecord {
            run_id: id.clone(),
            seed: run.seed,
            method: run.method,
            shots: run.shots,
            prompt_length: run.prompt_length,
            epoch,
            steps,
            loss,
            train_accuracy: acc,
            eval: None,
        };
    let mut records: Vec<MetricsRecord> = report
        .epochs
        .iter()
        .map(|e| record(e.epoch, e.steps, Some(e.loss), e.accuracy.clone()))
        .collect();
    if records.is_empty() {
        records.push(record(0, 0, None, BTreeMap::new()));
    }
    records.last_mut().expect("at least one record").eval = Some(scores);
    Ok(RunResult {
        id,
        records,
        histogram: few.histogram,
        system,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Everything a config produces, without touching the filesystem.
pub struct ExperimentOutput {
    pub records: Vec<MetricsRecord>,
    pub runs: Vec<RunResult>,
}

pub fn run_config(config: &ExperimentConfig, pretrained: &Pretrained) -> Result<ExperimentOutput> {
    config.validate()?;
    let data = build_dataset(config, pretrained)?;
    let mut records = Vec::new();
    let mut runs = Vec::new();
    for run in run_specs(config) {
        let r = run_one(config, pretrained, &data, run)?;
        records.extend(r.records.iter().cloned());
        runs.push(r);
    }
    Ok(ExperimentOutput { records, runs })
}

#[derive(Serialize)]
struct RunInfo<'a> {
    run_id: &'a str,
    histogram: &'a AnswerHistogram,
}

#[derive(Serialize)]
struct Timing<'a> {
    run_id: &'a str,
    seconds: f64,
}

/// Writes `metrics.jsonl` and its summary, `shots.jsonl` (few-shot
/// histograms), `timings.jsonl` (wall clock, kept apart so the metrics file
/// stays reproducible byte for byte), `sweep.txt` for prompt-length sweeps
/// and one checkpoint of trainable
/// parameters per run.
pub fn write_outputs(
    out: &ExperimentOutput,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = emit_metrics(&out.records, &dir.join("metrics.jsonl"))?;
    let mut shots = String::new();
    let mut timings = String::new();
    for r in &out.runs {
        let info = RunInfo {
            run_id: &r.id,
            histogram: &r.histogram,
        };
        shots += &(serde_json::to_string(&info).expect("serializes") + "\n");
        let t = Timing {
            run_id: &r.id,
            seconds: r.seconds,
        };
        timings += &(serde_json::to_string(&t).expect("serializes") + "\n");
        let partition = partition_parameters(&r.system, r.system.spec.method)?;
        let tensors = r
            .system
            .tensors()
            .into_iter()
            .filter(|(n, _)| partition.is_trainable(n));
        save_checkpoint(
            &dir.join("checkpoints").join(format!("{}.pfck", r.id)),
            r.system.fingerprint(),
            tensors,
        )?;
    }
    for (name, text) in [("shots.jsonl", shots), ("timings.jsonl", timings)] {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    if config.sweep {
        let gpath = dir.join("sweep.txt");
        let grid = sweep_grid(&rows, &config.prompt_lengths());
        fs::write(&gpath, format_sweep_grid(&grid)).map_err(|e| Error::io(&gpath, e))?;
    }
    let cpath = dir.join("config.toml");
    fs::write(&cpath, config.to_toml()).map_err(|e| Error::io(&cpath, e))?;
    Ok(rows)
}

/// Loads the config and pretrained components, runs every setting and
/// writes the outputs into `out_dir`.
pub fn run_experiment(config_path: &Path, out_dir: &Path) -> Result<Vec<SummaryRow>> {
    let config = ExperimentConfig::load(config_path)?;
    let pretrained = Pretrained::load(
        &config.pretrained,
        config.model,
        config.pretrain.vision,
        config.pretrain.audio,
    )?;
    let out = run_config(&config, &pretrained)?;
    write_outputs(&out, &config, out_dir)
}
