use serde::{Deserialize, Serialize};

use super::bank::PromptBank;
use super::method::{FusionMethod, PromptEncoderMode};

/// Dimensions that determine how many parameters each method trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDims {
    pub d: usize,
    pub d_v: usize,
    pub n_prompts: usize,
    pub prompt_encoder: PromptEncoderMode,
    /// Total parameter count of the modality encoders, trained by Finetune.
    pub encoder_params: usize,
}

pub fn count_trainable_params(dims: &ParamDims, method: FusionMethod) -> usize {
    match method {
        FusionMethod::PromptFuse | FusionMethod::BlindPrompt | FusionMethod::BlackImage => {
            let enc = if dims.n_prompts == 0 {
                0
            } else {
                PromptBank::encoder_param_count(dims.prompt_encoder, dims.d)
            };
            dims.n_prompts * dims.d + enc
        }
        FusionMethod::Linear => dims.d_v * dims.d_v + dims.d_v,
        FusionMethod::JointProj => (dims.d_v + dims.d) * dims.d + dims.d,
        FusionMethod::Finetune => dims.encoder_params,
        FusionMethod::NoPrompt => 0,
    }
}
