use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::config_fingerprint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub ffn: usize,
    pub max_len: usize,
    pub vocab_size: usize,
}

impl ModelConfig {
    /// Desk-scale defaults. `max_len` leaves room for 100 prompts in front of
    /// the longest fused input.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            d_model: 64,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            ffn: 128,
            max_len: 128,
            vocab_size,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::ModelConfig(m.to_string()));
        if self.d_model == 0 || self.heads == 0 || self.ffn == 0 {
            return fail("widths and head count must be positive");
        }
        if self.d_model % self.heads != 0 {
            return fail("d_model must be divisible by the head count");
        }
        if self.max_len == 0 || self.vocab_size == 0 {
            return fail("max_len and vocab_size must be positive");
        }
        Ok(())
    }

    /// Stable 64-bit identity of the architecture, stored in checkpoints.
    pub fn fingerprint(&self) -> u64 {
        config_fingerprint(self)
    }
}
