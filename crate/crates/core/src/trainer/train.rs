use std::collections::BTreeMap;
use std::path::PathBuf;

use promptfuse_autodiff::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{type_accuracy, Outcome};
use super::partition::{partition_parameters, ParameterPartition};
use super::{batch_gradients_with, Adam, NamedGradients};
use crate::error::{Error, Result};
use crate::experiment::save_checkpoint;
use crate::fusion::PROMPT;
use crate::params::{ParamAccess, Session};
use crate::system::{Example, FusionSystem};
use crate::transformer::{argmax, EOS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Learning rate of prompt vectors and prompt-encoder weights.
    pub prompt_lr: f32,
    /// Learning rate of every other trainable parameter.
    pub lr: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
    /// Batches whose gradients are averaged into one optimizer step.
    pub grad_accumulation: usize,
    /// Replaces both learning rates when set.
    pub lr_override: Option<f32>,
    /// Where to write the last good parameters if training diverges.
    pub divergence_dump: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            prompt_lr: 5e-1,
            lr: 5e-4,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            max_steps: None,
            grad_accumulation: 1,
            lr_override: None,
            divergence_dump: None,
        }
    }
}

impl TrainConfig {
    /// Defaults for the three-modality task.
    pub fn trimodal() -> Self {
        Self {
            batch_size: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [Some(self.prompt_lr), Some(self.lr), self.lr_override];
        if rates
            .into_iter()
            .flatten()
            .any(|r| !(r > 0.0 && r.is_finite()))
        {
            return Err(Error::Config(
                "learning rates must be positive and finite".into(),
            ));
        }
        if self.batch_size == 0 || self.grad_accumulation == 0 {
            return Err(Error::Config(
                "batch size and accumulation must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn lr_for(&self, name: &str) -> f32 {
        match self.lr_override {
            Some(lr) => lr,
            None if name.starts_with(PROMPT) => self.prompt_lr,
            None => self.lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub steps: usize,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    /// Teacher-forced training accuracy per answer type and overall, in
    /// percent. A sample counts as correct when every answer token and the
    /// closing EOS are the argmax, which is exactly when greedy decoding
    /// would reproduce the answer at that moment.
    pub accuracy: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub steps: usize,
}

fn diverged(system: &FusionSystem, config: &TrainConfig, err: Error) -> Error {
    if let Some(path) = &config.divergence_dump {
        if let Err(e) = save_checkpoint(path, system.fingerprint(), system.tensors()) {
            return e;
        }
    }
    err
}

/// Cross-entropy training of the trainable parameters only. Frozen
/// parameters are read but never written.
pub fn train(
    system: &mut FusionSystem,
    dataset: &[Example],
    partition: &ParameterPartition,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if *partition != partition_parameters(system, system.spec.method)? {
        return Err(Error::Config(format!(
            "partition for {} does not match the system's method {}",
            partition.method, system.spec.method
        )));
    }
    let trainable = &partition.trainable;
    let mut adam = Adam::new(&*system, trainable, |n| config.lr_for(n))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::new(),
        steps: 0,
    };
    let limit = config.max_steps.unwrap_or(usize::MAX);

    for epoch in 0..config.epochs {
        if report.steps >= limit {
            break;
        }
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut outcomes = Vec::with_capacity(dataset.len());
        let mut pending: Option<NamedGradients> = None;
        let mut micro = 0;
        let chunks: Vec<&[usize]> = order.chunks(config.batch_size).collect();
        for (b, chunk) in chunks.iter().enumerate() {
            let items: Vec<&Example> = chunk.iter().map(|&i| &dataset[i]).collect();
            let sys = &*system;
            let (loss, grads, correct) = batch_gradients_with(&items, |ex| {
                let mut s = Session::<f32>::new(Some(trainable));
                let (loss, logits) = sys.loss(&mut s, ex)?;
                let mut targets = ex.answer.clone();
                targets.push(EOS);
                let lv = s.graph.value(logits);
                let correct = (0..targets.len()).all(|r| argmax(lv.row(r)) == targets[r]);
                let g = match trainable.is_empty() {
                    true => NamedGradients::new(),
                    false => s.named_gradients(&s.graph.backward(loss)?),
                };
                Ok((s.graph.value(loss).item(), g, correct))
            })?;
            if !loss.is_finite() {
                let step = report.steps;
                return Err(diverged(
                    system,
                    config,
                    Error::Diverged { epoch, step, loss },
                ));
            }
            loss_sum += loss as f64 * items.len() as f64;
            for (ex, c) in items.iter().zip(correct) {
                outcomes.push(Outcome {
                    answer_type: ex.answer_type,
                    correct: c,
                    predicted_positive: false,
                    gold_positive: false,
                });
            }
            pending = Some(match pending.take() {
                None => grads,
                Some(mut acc) => {
                    for (name, g) in grads {
                        match acc.get_mut(&name) {
                            Some(a) => a
                                .data_mut()
                                .iter_mut()
                                .zip(g.data())
                                .for_each(|(x, y)| *x += y),
                            None => {
                                acc.insert(name, g);
                            }
                        }
                    }
                    acc
                }
            });
            micro += 1;
            if micro < config.grad_accumulation && b + 1 < chunks.len() {
                continue;
            }
            let mut grads = pending.take().unwrap_or_default();
            for g in grads.values_mut() {
                g.data_mut().iter_mut().for_each(|x| *x /= micro as f32);
            }
            for name in trainable {
                if !grads.contains_key(name) {
                    let shape = system.param_ref(name)?.shape().to_vec();
                    grads.insert(name.clone(), Tensor::zeros(&shape));
                }
            }
            micro = 0;
            if let Err(e) = adam.step(system, &grads) {
                return Err(match e {
                    Error::NonFiniteGradient(_) => diverged(system, config, e),
                    e => e,
                });
            }
            report.steps += 1;
            if report.steps >= limit {
                break;
            }
        }
        report.epochs.push(EpochMetrics {
            epoch,
            steps: report.steps,
            loss: loss_sum / outcomes.len().max(1) as f64,
            accuracy: type_accuracy(&outcomes),
        });
    }
    Ok(report)
}
