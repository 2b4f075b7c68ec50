//! Building blocks shared by the language model and the modality encoders.
//! Every block reads its weights by name from a [`ParamStore`] through a
//! [`Session`], so the same code serves training and frozen inference.

use promptfuse_autodiff::{Activation, Float, NodeId, Tensor};
use rand::Rng;

use crate::error::Result;
use crate::params::{ParamStore, Session};

pub(crate) fn init_attention(
    store: &mut ParamStore,
    rng: &mut impl Rng,
    prefix: &str,
    d: usize,
) -> Result<()> {
    for p in ["q", "k", "v", "o"] {
        store.linear(rng, &format!("{prefix}.{p}"), d, d)?;
    }
    Ok(())
}

pub(crate) fn init_ffn(
    store: &mut ParamStore,
    rng: &mut impl Rng,
    prefix: &str,
    d: usize,
    hidden: usize,
) -> Result<()> {
    store.linear(rng, &format!("{prefix}.up"), d, hidden)?;
    store.linear(rng, &format!("{prefix}.down"), hidden, d)
}

/// Pre-LN self-attention block followed by a feed-forward block.
pub(crate) fn init_encoder_block(
    store: &mut ParamStore,
    rng: &mut impl Rng,
    prefix: &str,
    d: usize,
    hidden: usize,
) -> Result<()> {
    store.layer_norm(&format!("{prefix}.ln1"), d)?;
    init_attention(store, rng, &format!("{prefix}.attn"), d)?;
    store.layer_norm(&format!("{prefix}.ln2"), d)?;
    init_ffn(store, rng, &format!("{prefix}.ffn"), d, hidden)
}

pub(crate) fn linear<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId> {
    let w = s.param(store, &format!("{prefix}.w"))?;
    let b = s.param(store, &format!("{prefix}.b"))?;
    let y = s.graph.matmul(x, w)?;
    Ok(s.graph.add_row(y, b)?)
}

pub(crate) fn layer_norm<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId> {
    let g = s.param(store, &format!("{prefix}.gamma"))?;
    let b = s.param(store, &format!("{prefix}.beta"))?;
    Ok(s.graph.layer_norm(x, g, b)?)
}

pub(crate) fn ffn<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId> {
    let h = linear(s, store, &format!("{prefix}.up"), x)?;
    let h = s.graph.activation(h, Activation::Gelu)?;
    linear(s, store, &format!("{prefix}.down"), h)
}

/// Multi-head attention of `xq` rows over `xkv` rows with an optional
/// additive mask. Attention probabilities of every head are appended to
/// `trace` when given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attention<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    prefix: &str,
    xq: NodeId,
    xkv: NodeId,
    mask: Option<&Tensor<T>>,
    heads: usize,
    mut trace: Option<&mut Vec<NodeId>>,
) -> Result<NodeId> {
    let q = linear(s, store, &format!("{prefix}.q"), xq)?;
    let k = linear(s, store, &format!("{prefix}.k"), xkv)?;
    let v = linear(s, store, &format!("{prefix}.v"), xkv)?;
    let d = s.graph.value(q).shape()[1];
    let dh = d / heads;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = s.graph.slice_cols(q, h * dh, dh)?;
        let kh = s.graph.slice_cols(k, h * dh, dh)?;
        let vh = s.graph.slice_cols(v, h * dh, dh)?;
        let scores = s.graph.matmul_bt(qh, kh)?;
        let scores = s.graph.scale(scores, scale)?;
        let p = s.graph.masked_softmax(scores, mask)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(p);
        }
        outs.push(s.graph.matmul(p, vh)?);
    }
    let cat = if heads == 1 {
        outs[0]
    } else {
        s.graph.concat_cols(&outs)?
    };
    linear(s, store, &format!("{prefix}.o"), cat)
}

pub(crate) fn encoder_block<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
    mask: Option<&Tensor<T>>,
    heads: usize,
    trace: Option<&mut Vec<NodeId>>,
) -> Result<NodeId> {
    let h = layer_norm(s, store, &format!("{prefix}.ln1"), x)?;
    let a = attention(
        s,
        store,
        &format!("{prefix}.attn"),
        h,
        h,
        mask,
        heads,
        trace,
    )?;
    let x = s.graph.add(x, a)?;
    let h = layer_norm(s, store, &format!("{prefix}.ln2"), x)?;
    let f = ffn(s, store, &format!("{prefix}.ffn"), h)?;
    Ok(s.graph.add(x, f)?)
}

/// Additive mask hiding future positions.
pub(crate) fn causal_mask<T: Float>(n: usize) -> Tensor<T> {
    let mut m = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in i + 1..n {
            m.data_mut()[i * n + j] = T::MASK_SENTINEL;
        }
    }
    m
}
