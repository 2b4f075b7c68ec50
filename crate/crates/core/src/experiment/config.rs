use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::attribution::IGConfig;
use crate::encoders::{AudioConfig, EncoderPretrainConfig, PoolingMode, VisionConfig};
use crate::error::{Error, Result};
use crate::fusion::{FusionMethod, PositionMode, PromptEncoderMode};
use crate::synthetic::{SceneSpec, SplitSizes};
use crate::trainer::TrainConfig;
use crate::transformer::{ModelConfig, PretrainConfig, Vocab};

/// Prompt lengths of the sweep grid.
pub const SWEEP_LENGTHS: [usize; 7] = [5, 10, 20, 40, 60, 80, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Vqa2mod,
    Trimodal,
}

/// A shot count, or the whole training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shots {
    Count(usize),
    Full,
}

impl Shots {
    pub fn resolve(self, available: usize) -> usize {
        match self {
            Shots::Count(k) => k,
            Shots::Full => available,
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Count(k) => write!(f, "{k}"),
            Shots::Full => f.write_str("full"),
        }
    }
}

impl FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Shots::Full),
            _ => s.parse().map(Shots::Count).map_err(|_| {
                Error::Config(format!("shots must be an integer or \"full\", got {s:?}"))
            }),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Count(k) => s.serialize_u64(*k as u64),
            Shots::Full => s.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(k) => Ok(Shots::Count(k)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptSettings {
    pub length: usize,
    pub position: PositionMode,
    pub encoder: PromptEncoderMode,
}

impl Default for PromptSettings {
    fn default() -> Self {
        Self {
            length: 20,
            position: PositionMode::Begin,
            encoder: PromptEncoderMode::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSettings {
    pub train: usize,
    pub eval: usize,
    pub seed: u64,
    pub scene: SceneSpec,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            train: 2048,
            eval: 512,
            seed: 7,
            scene: SceneSpec::default(),
        }
    }
}

impl DataSettings {
    pub fn sizes(&self) -> SplitSizes {
        SplitSizes {
            train: self.train,
            eval: self.eval,
        }
    }
}

/// Settings of the pretraining stage that produces the frozen components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSettings {
    pub corpus: usize,
    pub held_out: usize,
    pub data_seed: u64,
    pub plm: PretrainConfig,
    pub encoders: EncoderPretrainConfig,
    pub vision: VisionConfig,
    pub audio: AudioConfig,
}

impl Default for PretrainSettings {
    fn default() -> Self {
        Self {
            corpus: 4000,
            held_out: 500,
            data_seed: 1,
            plm: PretrainConfig::default(),
            encoders: EncoderPretrainConfig::default(),
            vision: VisionConfig::default(),
            audio: AudioConfig::default(),
        }
    }
}

fn default_model() -> ModelConfig {
    ModelConfig::desk(Vocab::synthetic().len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub task: Task,
    pub methods: Vec<FusionMethod>,
    pub shots: Vec<Shots>,
    pub seeds: Vec<u64>,
    /// Run every method over the prompt-length grid instead of `prompt.length`.
    pub sweep: bool,
    /// Directory holding the pretrained checkpoints.
    pub pretrained: PathBuf,
    /// Images use this; frames and audio windows are always averaged.
    pub pooling: PoolingMode,
    #[serde(default = "default_model")]
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub prompt: PromptSettings,
    pub data: DataSettings,
    pub pretrain: PretrainSettings,
    pub ig: IGConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Vqa2mod,
            methods: vec![FusionMethod::PromptFuse],
            shots: vec![Shots::Count(512)],
            seeds: vec![0, 1, 2],
            sweep: false,
            pretrained: PathBuf::from("pretrained"),
            pooling: PoolingMode::Cls,
            model: default_model(),
            train: TrainConfig::default(),
            prompt: PromptSettings::default(),
            data: DataSettings::default(),
            pretrain: PretrainSettings::default(),
            ig: IGConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.ig.validate()?;
        if self.methods.is_empty() || self.shots.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "methods, shots and seeds must be non-empty".into(),
            ));
        }
        if self.model.vocab_size != Vocab::synthetic().len() {
            return Err(Error::Config(format!(
                "model.vocab_size must be {}",
                Vocab::synthetic().len()
            )));
        }
        Ok(())
    }

    /// Prompt lengths each method is run with.
    pub fn prompt_lengths(&self) -> Vec<usize> {
        match self.sweep {
            true => SWEEP_LENGTHS.to_vec(),
            false => vec![self.prompt.length],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.train.prompt_lr, 0.5);
        assert_eq!(cfg.prompt.length, 20);
    }

    #[test]
    fn parses_partial_documents() {
        let cfg = ExperimentConfig::parse(
            "task = \"trimodal\"\nmethods = [\"BlindPrompt\"]\nshots = [64, \"full\"]\n[train]\nbatch_size = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.task, Task::Trimodal);
        assert_eq!(cfg.shots, vec![Shots::Count(64), Shots::Full]);
        assert_eq!(cfg.train.batch_size, 8);
        assert_eq!(cfg.train.lr, 5e-4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for doc in [
            "bogus = 1\n",
            "[train]\nlearning_rate = 1.0\n",
            "[prompt]\nlen = 3\n",
            "[data.scene]\ngrid2 = 4\n",
        ] {
            let e = ExperimentConfig::parse(doc).unwrap_err();
            assert_eq!(e.category(), "config", "{doc}");
        }
    }
}
