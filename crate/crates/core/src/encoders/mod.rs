//! Frozen modality feature extractors. Each encoder maps a raw sample to a
//! sequence of `d_v`-vectors whose row 0 is a summary position.

mod audio;
mod features;
mod image;
mod pooling;
mod pretrain;
mod vision;

pub use audio::{AudioConfig, AudioEncoder, AUDIO_PREFIX};
pub use features::{
    decode_features, encode_features, load_precomputed_features, write_features, FEATURE_MAGIC,
    FEATURE_VERSION,
};
pub use image::{RawImage, CHANNELS, IMAGE_SIDE};
pub use pooling::{pool_node, pool_sequence, PooledEmbedding, PoolingMode};
pub use pretrain::{
    pretrain_audio_encoder, pretrain_vision_encoder, EncoderPretrainConfig, EncoderReport,
};
pub use vision::{VisionConfig, VisionEncoder, PATCHES, VISION_PREFIX};

use promptfuse_autodiff::{Float, NodeId, Tensor};

use crate::error::{Error, Result};
use crate::params::{ParamStore, Session};

pub trait ModalityEncoder: Sync {
    type Input: Sync;

    fn name(&self) -> &'static str;
    fn width(&self) -> usize;
    fn params(&self) -> &ParamStore;

    /// The raw sample as a constant graph input.
    fn input_node<T: Float>(&self, s: &mut Session<T>, input: &Self::Input) -> Result<NodeId>;

    /// Encodes an input node into a `[len, d_v]` sequence.
    fn encode_node<T: Float>(&self, s: &mut Session<T>, input: NodeId) -> Result<NodeId>;

    /// Frozen inference.
    fn encode(&self, input: &Self::Input) -> Result<Tensor<f32>> {
        let mut s = Session::<f32>::inference();
        let x = self.input_node(&mut s, input)?;
        let y = self.encode_node(&mut s, x)?;
        Ok(s.graph.value(y).clone())
    }
}

pub fn encode_image(image: &RawImage, encoder: &VisionEncoder) -> Result<Tensor<f32>> {
    encoder.encode(image)
}

/// Mean of the per-item summary rows, as a graph node of shape `[1, d_v]`.
pub fn encode_temporal_node<T: Float, E: ModalityEncoder>(
    s: &mut Session<T>,
    items: &[E::Input],
    encoder: &E,
) -> Result<NodeId> {
    if items.is_empty() {
        return Err(Error::EmptyInput("temporal sequence"));
    }
    let mut summaries = Vec::with_capacity(items.len());
    for item in items {
        let x = encoder.input_node(s, item)?;
        let seq = encoder.encode_node(s, x)?;
        summaries.push(s.graph.slice_rows(seq, 0, 1)?);
    }
    let stacked = if summaries.len() == 1 {
        summaries[0]
    } else {
        s.graph.concat_rows(&summaries)?
    };
    Ok(s.graph.mean_rows(stacked)?)
}

/// Frozen-inference form of [`encode_temporal_node`]; returns `[1, d_v]`.
pub fn encode_temporal<E: ModalityEncoder>(items: &[E::Input], encoder: &E) -> Result<Tensor<f32>> {
    let mut s = Session::<f32>::inference();
    let y = encode_temporal_node(&mut s, items, encoder)?;
    Ok(s.graph.value(y).clone())
}
