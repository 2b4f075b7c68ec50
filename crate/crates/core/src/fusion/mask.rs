use promptfuse_autodiff::{Float, Tensor};

use super::method::FusionMethod;
use crate::error::{Error, Result};

/// Which positions may attend to which, as an additive `L×L` matrix.
/// Under BlindPrompt, prompt rows see only prompt columns; every other row
/// (and every row under other methods) sees everything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMaskSpec {
    len: usize,
    is_prompt: Vec<bool>,
    blind: bool,
}

impl AttentionMaskSpec {
    /// Mask for an arbitrary layout with the given prompt positions.
    pub fn for_layout(
        len: usize,
        prompt_positions: &[usize],
        method: FusionMethod,
    ) -> Result<Self> {
        let blind = method == FusionMethod::BlindPrompt;
        if blind && prompt_positions.is_empty() {
            return Err(Error::BlindPromptWithoutPrompts);
        }
        let mut is_prompt = vec![false; len];
        for &p in prompt_positions {
            *is_prompt.get_mut(p).ok_or(Error::LengthOverflow {
                len: p + 1,
                max: len,
            })? = true;
        }
        Ok(Self {
            len,
            is_prompt,
            blind,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn prompt_positions(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.is_prompt[i]).collect()
    }

    pub fn blocked(&self, row: usize, col: usize) -> bool {
        self.blind && self.is_prompt[row] && !self.is_prompt[col]
    }

    pub fn is_fully_visible(&self) -> bool {
        !self.blind || self.is_prompt.iter().all(|&p| p)
    }

    pub fn matrix<T: Float>(&self) -> Tensor<T> {
        let n = self.len;
        let mut m = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in 0..n {
                if self.blocked(i, j) {
                    m.data_mut()[i * n + j] = T::MASK_SENTINEL;
                }
            }
        }
        m
    }

    /// The additive matrix, or `None` when nothing is blocked.
    pub fn additive<T: Float>(&self) -> Option<Tensor<T>> {
        (!self.is_fully_visible()).then(|| self.matrix())
    }
}

/// Mask for the prepend layout: prompts at `0..n_prompts`, input after.
pub fn build_attention_mask(
    n_prompts: usize,
    n_input: usize,
    method: FusionMethod,
) -> Result<AttentionMaskSpec> {
    let prompts: Vec<usize> = (0..n_prompts).collect();
    AttentionMaskSpec::for_layout(n_prompts + n_input, &prompts, method)
}
