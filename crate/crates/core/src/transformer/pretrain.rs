use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::EncoderDecoderModel;
use super::vocab::{Vocab, EOS, MASK};
use crate::error::{Error, Result};
use crate::params::Session;
use crate::synthetic::TextSample;
use crate::trainer::{batch_gradients, Adam};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub seed: u64,
    /// Inputs are shifted right by up to this many filler tokens so that the
    /// positions later taken by prompts and modality embeddings get trained.
    pub max_filler: usize,
    /// Fraction of steps over which the learning rate ramps up linearly; it
    /// then decays linearly to zero at the last step.
    pub warmup: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 12,
            batch_size: 32,
            lr: 2e-3,
            seed: 0,
            max_filler: 24,
            warmup: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub epoch_losses: Vec<f32>,
    pub held_out_exact_match: f64,
}

struct Encoded {
    input: Vec<usize>,
    answer: Vec<usize>,
}

/// Encoder token ids for a text input: the words followed by EOS.
pub fn input_ids(vocab: &Vocab, words: &[String]) -> Result<Vec<usize>> {
    let mut ids = vocab.encode(words)?;
    ids.push(EOS);
    Ok(ids)
}

fn encode_corpus(vocab: &Vocab, corpus: &[TextSample]) -> Result<Vec<Encoded>> {
    corpus
        .iter()
        .map(|s| {
            Ok(Encoded {
                input: input_ids(vocab, &s.input)?,
                answer: vocab.encode(&s.answer)?,
            })
        })
        .collect()
}

/// Greedy answer for a text-only input.
pub fn answer_text(
    model: &EncoderDecoderModel,
    input: &[usize],
    max_steps: usize,
) -> Result<Vec<usize>> {
    let mut s = Session::<f32>::inference();
    let x = model.embed_tokens(&mut s, input)?;
    let enc = model.encode(&mut s, x, None)?;
    let states = s.graph.value(enc).clone();
    model.decode_greedy(&states, max_steps)
}

pub fn exact_match(
    model: &EncoderDecoderModel,
    vocab: &Vocab,
    samples: &[TextSample],
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for s in encode_corpus(vocab, samples)? {
        if answer_text(model, &s.input, s.answer.len() + 1)? == s.answer {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// Trains every language-model parameter on text-only QA, then reports
/// held-out exact match. The returned model is meant to be frozen.
pub fn pretrain_language_model(
    corpus: &[TextSample],
    held_out: &[TextSample],
    vocab: &Vocab,
    config: ModelConfig,
    train: &PretrainConfig,
) -> Result<(EncoderDecoderModel, PretrainReport)> {
    let mut model = EncoderDecoderModel::init(config, train.seed)?;
    let data = encode_corpus(vocab, corpus)?;
    let trainable: BTreeSet<String> = model.params.names().map(str::to_string).collect();
    let mut adam = Adam::new(&model.params, &trainable, |_| train.lr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0x5EED);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(train.epochs);
    let batch = train.batch_size.max(1);
    let total_steps = (train.epochs * data.len().div_ceil(batch)).max(1) as f64;
    let warm_steps = (train.warmup * total_steps).max(1.0);
    let mut global = 0usize;

    for epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0f64;
        let mut batches = 0;
        for (step, chunk) in order.chunks(batch).enumerate() {
            let batch: Vec<(usize, usize)> = chunk
                .iter()
                .map(|&i| {
                    let room = config.max_len.saturating_sub(data[i].input.len());
                    (i, rng.random_range(0..=train.max_filler.min(room)))
                })
                .collect();
            let (loss, grads) = batch_gradients(&batch, |&(i, filler)| {
                let mut ids = vec![MASK; filler];
                ids.extend_from_slice(&data[i].input);
                let mut s = Session::<f32>::new(Some(&trainable));
                let x = model.embed_tokens(&mut s, &ids)?;
                let enc = model.encode(&mut s, x, None)?;
                let (loss, _) = model.answer_loss(&mut s, enc, &data[i].answer)?;
                let g = s.graph.backward(loss)?;
                Ok((s.graph.value(loss).item(), s.named_gradients(&g)))
            })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, step, loss });
            }
            let t = global as f64 + 1.0;
            let scale =
                (t / warm_steps).min((total_steps - t + 1.0) / (total_steps - warm_steps + 1.0));
            adam.step_scaled(&mut model.params, &grads, scale.clamp(0.0, 1.0))?;
            global += 1;
            sum += loss as f64;
            batches += 1;
        }
        epoch_losses.push((sum / batches.max(1) as f64) as f32);
    }
    let held_out_exact_match = exact_match(&model, vocab, held_out)?;
    Ok((
        model,
        PretrainReport {
            epoch_losses,
            held_out_exact_match,
        },
    ))
}
