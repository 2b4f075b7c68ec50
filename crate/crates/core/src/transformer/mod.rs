//! The frozen language model: a small pre-LN encoder-decoder transformer
//! with a closed word-level vocabulary.

mod config;
pub(crate) mod layers;
mod model;
mod pretrain;
mod vocab;

pub use config::ModelConfig;
pub use model::{
    argmax, greedy_decode_with, sequence_cross_entropy, teacher_forcing, EncoderDecoderModel,
    PLM_PREFIX,
};
pub use pretrain::{
    answer_text, exact_match, input_ids, pretrain_language_model, PretrainConfig, PretrainReport,
};
pub use vocab::{Vocab, BOS, EOS, MASK, PAD};
