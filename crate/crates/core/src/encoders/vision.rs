use promptfuse_autodiff::{Float, NodeId, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image::{RawImage, CHANNELS, IMAGE_SIDE};
use super::ModalityEncoder;
use crate::error::Result;
use crate::params::{ParamStore, Session};
use crate::transformer::layers::{encoder_block, init_encoder_block, layer_norm, linear};

pub const VISION_PREFIX: &str = "vision.";

pub const PATCH: usize = 2;
pub const PATCHES: usize = (IMAGE_SIDE / PATCH) * (IMAGE_SIDE / PATCH);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisionConfig {
    pub width: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: usize,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            width: 64,
            heads: 4,
            layers: 1,
            ffn: 128,
        }
    }
}

/// Patch-embedding transformer with a learned summary token at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct VisionEncoder {
    pub config: VisionConfig,
    pub params: ParamStore,
}

/// Pixel order that groups each 2×2 patch into four consecutive rows.
fn patch_order() -> Vec<usize> {
    let per_side = IMAGE_SIDE / PATCH;
    let mut ids = Vec::with_capacity(IMAGE_SIDE * IMAGE_SIDE);
    for pr in 0..per_side {
        for pc in 0..per_side {
            for dy in 0..PATCH {
                for dx in 0..PATCH {
                    ids.push((pr * PATCH + dy) * IMAGE_SIDE + pc * PATCH + dx);
                }
            }
        }
    }
    ids
}

impl VisionEncoder {
    pub fn init(config: VisionConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let d = config.width;
        p.linear(&mut rng, "vision.patch", PATCH * PATCH * CHANNELS, d)?;
        p.normal(&mut rng, "vision.cls", &[1, d], 1.0)?;
        p.normal(&mut rng, "vision.pos", &[PATCHES + 1, d], 0.1)?;
        for l in 0..config.layers {
            init_encoder_block(&mut p, &mut rng, &format!("vision.layer{l}"), d, config.ffn)?;
        }
        p.layer_norm("vision.ln_f", d)?;
        Ok(Self { config, params: p })
    }

    /// Image as a `[H·W, 3]` graph input.
    pub fn image_tensor<T: Float>(image: &RawImage) -> Result<Tensor<T>> {
        image.check_desk_shape()?;
        let data = image.data().iter().map(|&v| T::from_f32(v)).collect();
        Ok(Tensor::new(vec![IMAGE_SIDE * IMAGE_SIDE, CHANNELS], data)?)
    }
}

impl ModalityEncoder for VisionEncoder {
    type Input = RawImage;

    fn name(&self) -> &'static str {
        "vision"
    }

    fn width(&self) -> usize {
        self.config.width
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn input_node<T: Float>(&self, s: &mut Session<T>, input: &RawImage) -> Result<NodeId> {
        Ok(s.graph.constant(Self::image_tensor(input)?))
    }

    /// `pixels` is a `[64, 3]` node; output is `[1 + 16, d]`.
    fn encode_node<T: Float>(&self, s: &mut Session<T>, pixels: NodeId) -> Result<NodeId> {
        let p = &self.params;
        let grouped = s.graph.gather_rows(pixels, &patch_order())?;
        let patches = s
            .graph
            .reshape(grouped, vec![PATCHES, PATCH * PATCH * CHANNELS])?;
        let emb = linear(s, p, "vision.patch", patches)?;
        let cls = s.param(p, "vision.cls")?;
        let x = s.graph.concat_rows(&[cls, emb])?;
        let pos = s.param(p, "vision.pos")?;
        let mut x = s.graph.add(x, pos)?;
        for l in 0..self.config.layers {
            x = encoder_block(
                s,
                p,
                &format!("vision.layer{l}"),
                x,
                None,
                self.config.heads,
                None,
            )?;
        }
        layer_norm(s, p, "vision.ln_f", x)
    }
}
