use promptfuse_autodiff::{Activation, Float, NodeId, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::method::{PositionMode, PromptEncoderMode};
use crate::error::Result;
use crate::params::{ParamStore, Session};
use crate::transformer::layers::linear;

pub const PROMPT: &str = "fusion.prompt";
pub const PROMPT_ENCODER_PREFIX: &str = "fusion.prompt_enc";
pub const PROMPT_INIT_STD: f32 = 0.02;

/// Shape and mode of a prompt bank. The `N×d` matrix itself lives in the
/// fusion parameter store under [`PROMPT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBank {
    pub n: usize,
    pub d: usize,
    pub position: PositionMode,
    pub encoder: PromptEncoderMode,
}

impl PromptBank {
    /// Adds the bank and its encoder parameters to `store`. With `n = 0`
    /// nothing is added.
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        if self.n == 0 {
            return Ok(());
        }
        let d = self.d;
        store.normal(rng, PROMPT, &[self.n, d], PROMPT_INIT_STD)?;
        match self.encoder {
            PromptEncoderMode::Identity => {}
            PromptEncoderMode::LinearLayer => {
                store.insert(format!("{PROMPT_ENCODER_PREFIX}.w"), Tensor::identity(d))?;
                store.zeros(format!("{PROMPT_ENCODER_PREFIX}.b"), &[d])?;
            }
            PromptEncoderMode::Recurrent => {
                let bound = 1.0 / (d as f32).sqrt();
                store.uniform(
                    rng,
                    format!("{PROMPT_ENCODER_PREFIX}.lstm.w"),
                    &[2 * d, 4 * d],
                    bound,
                )?;
                store.zeros(format!("{PROMPT_ENCODER_PREFIX}.lstm.b"), &[4 * d])?;
            }
        }
        Ok(())
    }

    /// Trainable scalars contributed by the prompt encoder.
    pub fn encoder_param_count(encoder: PromptEncoderMode, d: usize) -> usize {
        match encoder {
            PromptEncoderMode::Identity => 0,
            PromptEncoderMode::LinearLayer => d * d + d,
            PromptEncoderMode::Recurrent => 4 * d * (2 * d + 1),
        }
    }
}

/// The bank's rows after its encoder, `[N, d]`; `None` when `N = 0`.
pub fn apply_prompt_encoder<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    bank: &PromptBank,
) -> Result<Option<NodeId>> {
    if bank.n == 0 {
        return Ok(None);
    }
    let p = s.param(store, PROMPT)?;
    Ok(Some(match bank.encoder {
        PromptEncoderMode::Identity => p,
        PromptEncoderMode::LinearLayer => linear(s, store, PROMPT_ENCODER_PREFIX, p)?,
        PromptEncoderMode::Recurrent => lstm(s, store, p, bank.n, bank.d)?,
    }))
}

/// Single-layer LSTM over the bank rows; output row `i` depends on rows
/// `0..=i` only. Gates are packed `[input | forget | cell | output]`.
fn lstm<T: Float>(
    s: &mut Session<T>,
    store: &ParamStore,
    x: NodeId,
    n: usize,
    d: usize,
) -> Result<NodeId> {
    let w = s.param(store, &format!("{PROMPT_ENCODER_PREFIX}.lstm.w"))?;
    let b = s.param(store, &format!("{PROMPT_ENCODER_PREFIX}.lstm.b"))?;
    let mut h = s.graph.constant(Tensor::zeros(&[1, d]));
    let mut c = s.graph.constant(Tensor::zeros(&[1, d]));
    let mut outs = Vec::with_capacity(n);
    for i in 0..n {
        let xi = s.graph.slice_rows(x, i, 1)?;
        let z = s.graph.concat_cols(&[xi, h])?;
        let z = s.graph.matmul(z, w)?;
        let z = s.graph.add_row(z, b)?;
        let gate = |s: &mut Session<T>, k: usize, act: Activation| -> Result<NodeId> {
            let g = s.graph.slice_cols(z, k * d, d)?;
            Ok(s.graph.activation(g, act)?)
        };
        let ig = gate(s, 0, Activation::Sigmoid)?;
        let fg = gate(s, 1, Activation::Sigmoid)?;
        let cg = gate(s, 2, Activation::Tanh)?;
        let og = gate(s, 3, Activation::Sigmoid)?;
        let keep = s.graph.mul(fg, c)?;
        let write = s.graph.mul(ig, cg)?;
        c = s.graph.add(keep, write)?;
        let tc = s.graph.activation(c, Activation::Tanh)?;
        h = s.graph.mul(og, tc)?;
        outs.push(h);
    }
    Ok(if n == 1 {
        outs[0]
    } else {
        s.graph.concat_rows(&outs)?
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bank(n: usize, encoder: PromptEncoderMode) -> (PromptBank, ParamStore) {
        let b = PromptBank {
            n,
            d: 6,
            position: PositionMode::Begin,
            encoder,
        };
        let mut store = ParamStore::new();
        b.init(&mut store, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        (b, store)
    }

    fn run(b: &PromptBank, store: &ParamStore) -> Tensor<f32> {
        let mut s = Session::<f32>::inference();
        let y = apply_prompt_encoder(&mut s, store, b).unwrap().unwrap();
        s.graph.value(y).clone()
    }

    #[test]
    fn identity_and_identity_linear_leave_rows_unchanged() {
        for mode in [PromptEncoderMode::Identity, PromptEncoderMode::LinearLayer] {
            let (b, store) = bank(4, mode);
            assert_eq!(&run(&b, &store), store.get(PROMPT).unwrap());
        }
    }

    #[test]
    fn recurrent_is_causal() {
        let (b, mut store) = bank(5, PromptEncoderMode::Recurrent);
        let before = run(&b, &store);
        let k = 2;
        store.get_mut(PROMPT).unwrap().data_mut()[k * 6 + 1] += 0.5;
        let after = run(&b, &store);
        for i in 0..5 {
            assert_eq!(before.row(i) == after.row(i), i < k, "row {i}");
        }
    }

    #[test]
    fn parameter_counts_match_store() {
        for mode in [
            PromptEncoderMode::Identity,
            PromptEncoderMode::LinearLayer,
            PromptEncoderMode::Recurrent,
        ] {
            let (_, store) = bank(3, mode);
            assert_eq!(
                store.num_values(),
                3 * 6 + PromptBank::encoder_param_count(mode, 6)
            );
        }
        let (b, store) = bank(0, PromptEncoderMode::Recurrent);
        assert!(store.is_empty());
        let mut s = Session::<f32>::inference();
        assert!(apply_prompt_encoder(&mut s, &store, &b).unwrap().is_none());
    }
}
