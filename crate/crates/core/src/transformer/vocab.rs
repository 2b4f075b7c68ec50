use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::synthetic::lexicon;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const MASK: usize = 3;
const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<mask>"];

/// Closed word-level vocabulary. Reserved ids come first.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<S: AsRef<str>>(content: &[S]) -> Result<Self> {
        let tokens: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(content.iter().map(|s| s.as_ref().to_string()))
            .collect();
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::ModelConfig(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, ids })
    }

    /// Vocabulary covering both synthetic tasks.
    pub fn synthetic() -> Self {
        Self::new(&lexicon()).expect("lexicon is duplicate-free")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Result<usize> {
        self.ids
            .get(token)
            .copied()
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<usize>> {
        words.iter().map(|w| self.id(w.as_ref())).collect()
    }

    /// Content tokens only; reserved ids are dropped.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i >= RESERVED.len())
            .filter_map(|&i| self.token(i).map(str::to_string))
            .collect()
    }
}
