use std::collections::BTreeSet;

use crate::encoders::{AUDIO_PREFIX, VISION_PREFIX};
use crate::error::{Error, Result};
use crate::fusion::{FusionMethod, JOINT_PREFIX, LINEAR_PREFIX, PROMPT};
use crate::system::FusionSystem;
use crate::transformer::PLM_PREFIX;

const FUSION_PREFIX: &str = "fusion.";

/// Trainable and frozen parameter names; disjoint and jointly covering
/// every parameter of the system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterPartition {
    pub method: FusionMethod,
    pub trainable: BTreeSet<String>,
    pub frozen: BTreeSet<String>,
}

impl ParameterPartition {
    pub fn is_trainable(&self, name: &str) -> bool {
        self.trainable.contains(name)
    }
}

fn is_trainable(method: FusionMethod, name: &str) -> bool {
    match method {
        // The prompt bank and, when present, its encoder share the prefix.
        FusionMethod::PromptFuse | FusionMethod::BlindPrompt | FusionMethod::BlackImage => {
            name.starts_with(PROMPT)
        }
        FusionMethod::Linear => name.starts_with(&format!("{LINEAR_PREFIX}.")),
        FusionMethod::JointProj => name.starts_with(&format!("{JOINT_PREFIX}.")),
        FusionMethod::Finetune => name.starts_with(VISION_PREFIX) || name.starts_with(AUDIO_PREFIX),
        FusionMethod::NoPrompt => false,
    }
}

/// Splits the system's parameters for `method`. Every name must carry one
/// of the component prefixes.
pub fn partition_parameters(
    system: &FusionSystem,
    method: FusionMethod,
) -> Result<ParameterPartition> {
    let mut trainable = BTreeSet::new();
    let mut frozen = BTreeSet::new();
    for name in system.param_names() {
        let known = [PLM_PREFIX, VISION_PREFIX, AUDIO_PREFIX, FUSION_PREFIX]
            .iter()
            .any(|p| name.starts_with(p));
        if !known {
            return Err(Error::UnknownParameter(name));
        }
        if is_trainable(method, &name) {
            trainable.insert(name);
        } else {
            frozen.insert(name);
        }
    }
    Ok(ParameterPartition {
        method,
        trainable,
        frozen,
    })
}
