use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FusionMethod {
    PromptFuse,
    BlindPrompt,
    Finetune,
    Linear,
    JointProj,
    BlackImage,
    NoPrompt,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 7] = [
        FusionMethod::PromptFuse,
        FusionMethod::BlindPrompt,
        FusionMethod::Finetune,
        FusionMethod::Linear,
        FusionMethod::JointProj,
        FusionMethod::BlackImage,
        FusionMethod::NoPrompt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionMethod::PromptFuse => "PromptFuse",
            FusionMethod::BlindPrompt => "BlindPrompt",
            FusionMethod::Finetune => "Finetune",
            FusionMethod::Linear => "Linear",
            FusionMethod::JointProj => "JointProj",
            FusionMethod::BlackImage => "BlackImage",
            FusionMethod::NoPrompt => "NoPrompt",
        }
    }

    /// Methods whose only trainable parameters are prompt vectors.
    pub fn uses_prompts(self) -> bool {
        matches!(
            self,
            FusionMethod::PromptFuse | FusionMethod::BlindPrompt | FusionMethod::BlackImage
        )
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnsupportedMethod {
                method: s.to_string(),
                what: "fusion",
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositionMode {
    Begin,
    Middle,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptEncoderMode {
    Identity,
    LinearLayer,
    Recurrent,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        for m in FusionMethod::ALL {
            assert_eq!(m.name().parse::<FusionMethod>().unwrap(), m);
        }
        assert_eq!(
            "blindprompt".parse::<FusionMethod>().unwrap(),
            FusionMethod::BlindPrompt
        );
        assert!("Adapter".parse::<FusionMethod>().is_err());
    }
}
