//! Prompt banks, the BlindPrompt attention mask, fused-input assembly,
//! baseline fusion transforms and trainable-parameter accounting.

mod assemble;
mod bank;
mod baseline;
mod count;
mod mask;
mod method;

pub use assemble::{assemble_fused_input, FusedInput};
pub use bank::{apply_prompt_encoder, PromptBank, PROMPT, PROMPT_ENCODER_PREFIX, PROMPT_INIT_STD};
pub use baseline::{
    apply_baseline_transform, init_baseline, Transformed, JOINT_PREFIX, LINEAR_PREFIX,
};
pub use count::{count_trainable_params, ParamDims};
pub use mask::{build_attention_mask, AttentionMaskSpec};
pub use method::{FusionMethod, PositionMode, PromptEncoderMode};
