//! Supervised pretraining of the modality encoders. Heads live under their
//! own name prefix and are discarded afterwards; only the encoder is kept.

use std::collections::BTreeSet;

use promptfuse_autodiff::NodeId;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    AudioConfig, AudioEncoder, ModalityEncoder, RawImage, VisionConfig, VisionEncoder,
    AUDIO_PREFIX, VISION_PREFIX,
};
use crate::error::{Error, Result};
use crate::params::{ParamStore, Session};
use crate::synthetic::{derive_seed, generate_scene, generate_trimodal, Color, SceneSpec, Shape};
use crate::trainer::{batch_gradients, Adam};
use crate::transformer::layers::linear;

const MAX_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderPretrainConfig {
    pub samples: usize,
    pub held_out: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub seed: u64,
}

impl Default for EncoderPretrainConfig {
    fn default() -> Self {
        Self {
            samples: 3000,
            held_out: 500,
            epochs: 8,
            batch_size: 32,
            lr: 2e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderReport {
    pub epoch_losses: Vec<f32>,
    /// Fraction of held-out head predictions that are correct.
    pub held_out_accuracy: f64,
}

/// Generic supervised loop: `loss_of` builds the loss for one sample and
/// returns it together with (predicted, target) class pairs for accuracy.
fn fit<M: ModalityEncoder + Sync, S: Sync>(
    model: &mut M,
    store: fn(&mut M) -> &mut ParamStore,
    train: &[S],
    held_out: &[S],
    cfg: &EncoderPretrainConfig,
    loss_of: impl Fn(&M, &mut Session<f32>, &S) -> Result<(NodeId, Vec<(usize, usize)>)> + Sync,
) -> Result<EncoderReport> {
    let trainable: BTreeSet<String> = model.params().names().map(str::to_string).collect();
    let mut adam = Adam::new(model.params(), &trainable, |_| cfg.lr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xE4C0);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0f64;
        let mut n = 0;
        for (step, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let snapshot = &*model;
            let (loss, grads) = batch_gradients(chunk, |&i| {
                let mut s = Session::<f32>::new(Some(&trainable));
                let (loss, _) = loss_of(snapshot, &mut s, &train[i])?;
                let g = s.graph.backward(loss)?;
                Ok((s.graph.value(loss).item(), s.named_gradients(&g)))
            })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, step, loss });
            }
            adam.step(store(model), &grads)?;
            sum += loss as f64;
            n += 1;
        }
        epoch_losses.push((sum / n.max(1) as f64) as f32);
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for sample in held_out {
        let mut s = Session::<f32>::inference();
        let (_, pairs) = loss_of(model, &mut s, sample)?;
        hits += pairs.iter().filter(|(p, t)| p == t).count();
        total += pairs.len();
    }
    Ok(EncoderReport {
        epoch_losses,
        held_out_accuracy: hits as f64 / total.max(1) as f64,
    })
}

fn argmax_rows(s: &Session<f32>, logits: NodeId) -> Vec<usize> {
    let t = s.graph.value(logits);
    (0..t.rows())
        .map(|r| crate::transformer::argmax(t.row(r)))
        .collect()
}

struct VisionTarget {
    image: RawImage,
    counts: Vec<usize>,
    present: Vec<usize>,
}

fn vision_targets(n: usize, seed: u64, stream: u32) -> Result<Vec<VisionTarget>> {
    let spec = SceneSpec {
        min_objects: 0,
        max_objects: MAX_COUNT,
        ..SceneSpec::default()
    };
    (0..n as u32)
        .map(|i| {
            let scene = generate_scene(derive_seed(seed, stream, i), &spec)?;
            let counts = Shape::ALL.iter().map(|&s| scene.count(s)).collect();
            let present = Color::ALL
                .iter()
                .flat_map(|&c| Shape::ALL.iter().map(move |&s| (c, s)))
                .map(|(c, s)| usize::from(scene.contains(c, s)))
                .collect();
            Ok(VisionTarget {
                image: scene.image,
                counts,
                present,
            })
        })
        .collect()
}

/// Trains the vision encoder to predict per-shape counts and the presence
/// of every color-shape pair from the summary row.
pub fn pretrain_vision_encoder(
    config: VisionConfig,
    cfg: &EncoderPretrainConfig,
) -> Result<(VisionEncoder, EncoderReport)> {
    let mut enc = VisionEncoder::init(config, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4EAD);
    let d = config.width;
    let n_shapes = Shape::ALL.len();
    let n_pairs = n_shapes * Color::ALL.len();
    enc.params
        .linear(&mut rng, "vision_head.count", d, n_shapes * (MAX_COUNT + 1))?;
    enc.params
        .linear(&mut rng, "vision_head.present", d, n_pairs * 2)?;
    let train = vision_targets(cfg.samples, cfg.seed, 10)?;
    let held_out = vision_targets(cfg.held_out, cfg.seed, 11)?;
    let report = fit(
        &mut enc,
        |e| &mut e.params,
        &train,
        &held_out,
        cfg,
        |view, s, t| {
            let p = &view.params;
            let x = view.input_node(s, &t.image)?;
            let seq = view.encode_node(s, x)?;
            let cls = s.graph.slice_rows(seq, 0, 1)?;
            let counts = linear(s, p, "vision_head.count", cls)?;
            let counts = s.graph.reshape(counts, vec![n_shapes, MAX_COUNT + 1])?;
            let present = linear(s, p, "vision_head.present", cls)?;
            let present = s.graph.reshape(present, vec![n_pairs, 2])?;
            let targets = |v: &[usize]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
            let l1 = s.graph.cross_entropy(counts, &targets(&t.counts))?;
            let l2 = s.graph.cross_entropy(present, &targets(&t.present))?;
            let loss = s.graph.add(l1, l2)?;
            let mut pairs: Vec<(usize, usize)> = argmax_rows(s, counts)
                .into_iter()
                .zip(t.counts.iter().copied())
                .collect();
            pairs.extend(
                argmax_rows(s, present)
                    .into_iter()
                    .zip(t.present.iter().copied()),
            );
            Ok((loss, pairs))
        },
    )?;
    enc.params.retain(|n| n.starts_with(VISION_PREFIX));
    Ok((enc, report))
}

/// Trains the audio encoder to classify the tone of single windows from
/// its mean-pooled summary.
pub fn pretrain_audio_encoder(
    config: AudioConfig,
    cfg: &EncoderPretrainConfig,
) -> Result<(AudioEncoder, EncoderReport)> {
    let mut enc = AudioEncoder::init(config, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4EAD);
    enc.params
        .linear(&mut rng, "audio_head.tone", config.width, 2)?;
    let windows = |n: usize, stream: u32| -> Vec<(Vec<f32>, usize)> {
        (0..n as u32)
            .map(|i| {
                let s = generate_trimodal(derive_seed(cfg.seed, stream, i));
                let w = (i as usize) % s.audio.len();
                (s.audio[w].clone(), usize::from(s.tone_positive))
            })
            .collect()
    };
    let train = windows(cfg.samples, 12);
    let held_out = windows(cfg.held_out, 13);
    let report = fit(
        &mut enc,
        |e| &mut e.params,
        &train,
        &held_out,
        cfg,
        |view, s, (w, tone)| {
            let p = &view.params;
            let x = view.input_node(s, w)?;
            let seq = view.encode_node(s, x)?;
            let summary = s.graph.slice_rows(seq, 0, 1)?;
            let logits = linear(s, p, "audio_head.tone", summary)?;
            let loss = s.graph.cross_entropy(logits, &[Some(*tone)])?;
            Ok((loss, vec![(argmax_rows(s, logits)[0], *tone)]))
        },
    )?;
    enc.params.retain(|n| n.starts_with(AUDIO_PREFIX));
    Ok((enc, report))
}
