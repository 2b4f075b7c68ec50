use promptfuse_autodiff::{Activation, Float, NodeId, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModalityEncoder;
use crate::error::{Error, Result};
use crate::params::{ParamStore, Session};
use crate::synthetic::WINDOW_LEN;
use crate::transformer::layers::{layer_norm, linear};

pub const AUDIO_PREFIX: &str = "audio.";

const K1: usize = 8;
const S1: usize = 4;
const C1: usize = 16;
const K2: usize = 4;
const S2: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioConfig {
    pub width: usize,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self { width: 64 }
    }
}

/// Two strided 1-D convolutions over a waveform window. The output
/// sequence is `[mean | frames]`, so index 0 is the mean-pooled summary.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioEncoder {
    pub config: AudioConfig,
    pub params: ParamStore,
}

fn out_len(len: usize, k: usize, stride: usize) -> usize {
    (len - k) / stride + 1
}

/// Row indices that lay out every convolution window consecutively, so a
/// reshape turns a `[len, c]` input into `[windows, k·c]`.
fn im2col(len: usize, k: usize, stride: usize) -> Vec<usize> {
    (0..out_len(len, k, stride))
        .flat_map(|t| (0..k).map(move |j| t * stride + j))
        .collect()
}

fn conv<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
    k: usize,
    stride: usize,
) -> Result<NodeId> {
    let (len, c) = s.graph.value(x).dims2("conv")?;
    let cols = s.graph.gather_rows(x, &im2col(len, k, stride))?;
    let cols = s
        .graph
        .reshape(cols, vec![out_len(len, k, stride), k * c])?;
    let y = linear(s, store, prefix, cols)?;
    Ok(s.graph.activation(y, Activation::Gelu)?)
}

impl AudioEncoder {
    pub fn init(config: AudioConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        p.linear(&mut rng, "audio.conv1", K1, C1)?;
        p.linear(&mut rng, "audio.conv2", K2 * C1, config.width)?;
        p.layer_norm("audio.ln_f", config.width)?;
        Ok(Self { config, params: p })
    }

    pub fn window_tensor<T: Float>(window: &[f32]) -> Result<Tensor<T>> {
        if window.len() != WINDOW_LEN {
            return Err(Error::WidthMismatch {
                expected: WINDOW_LEN,
                actual: window.len(),
                context: "audio window length",
            });
        }
        let data = window.iter().map(|&v| T::from_f32(v)).collect();
        Ok(Tensor::new(vec![WINDOW_LEN, 1], data)?)
    }
}

impl ModalityEncoder for AudioEncoder {
    type Input = Vec<f32>;

    fn name(&self) -> &'static str {
        "audio"
    }

    fn width(&self) -> usize {
        self.config.width
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn input_node<T: Float>(&self, s: &mut Session<T>, input: &Vec<f32>) -> Result<NodeId> {
        Ok(s.graph.constant(Self::window_tensor(input)?))
    }

    fn encode_node<T: Float>(&self, s: &mut Session<T>, window: NodeId) -> Result<NodeId> {
        let p = &self.params;
        let h = conv(s, p, "audio.conv1", window, K1, S1)?;
        let h = conv(s, p, "audio.conv2", h, K2, S2)?;
        let h = layer_norm(s, p, "audio.ln_f", h)?;
        let summary = s.graph.mean_rows(h)?;
        Ok(s.graph.concat_rows(&[summary, h])?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn im2col_windows() {
        assert_eq!(im2col(10, 4, 3), vec![0, 1, 2, 3, 3, 4, 5, 6, 6, 7, 8, 9]);
        assert_eq!(out_len(WINDOW_LEN, K1, S1), 15);
        assert_eq!(out_len(15, K2, S2), 6);
    }
}
