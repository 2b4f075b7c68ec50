//! Named parameter storage and graph binding.

use std::collections::{BTreeMap, BTreeSet};

use promptfuse_autodiff::{Float, Gradients, Graph, NodeId, Tensor};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Mutable lookup of named parameters, possibly spread over several stores.
pub trait ParamAccess {
    fn param_ref(&self, name: &str) -> Result<&Tensor<f32>>;
    fn param_mut(&mut self, name: &str) -> Result<&mut Tensor<f32>>;
}

impl ParamAccess for ParamStore {
    fn param_ref(&self, name: &str) -> Result<&Tensor<f32>> {
        self.get(name)
    }
    fn param_mut(&mut self, name: &str) -> Result<&mut Tensor<f32>> {
        self.get_mut(name)
    }
}

/// Ordered collection of named `f32` tensors.
///
/// Names are unique and iteration order is lexicographic, which keeps
/// hashing, checkpointing and gradient reduction deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor<f32>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<f32>) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::UnknownParameter(name));
        }
        if self.tensors.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<f32>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<f32>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// Replaces an existing tensor, keeping its shape contract.
    pub fn set(&mut self, name: &str, tensor: Tensor<f32>) -> Result<()> {
        let slot = self.get_mut(name)?;
        if slot.shape() != tensor.shape() {
            return Err(Error::WidthMismatch {
                expected: slot.len(),
                actual: tensor.len(),
                context: "parameter replacement",
            });
        }
        *slot = tensor;
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<f32>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Moves every tensor of `other` in; names must not collide.
    pub fn extend(&mut self, other: ParamStore) -> Result<()> {
        for (name, t) in other.tensors {
            self.insert(name, t)?;
        }
        Ok(())
    }

    /// Keeps only the tensors whose names satisfy `keep`.
    pub fn retain(&mut self, keep: impl Fn(&str) -> bool) {
        self.tensors.retain(|n, _| keep(n));
    }

    /// Total scalar count.
    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// SHA-256 over names, shapes and little-endian values of every tensor
    /// accepted by `filter`.
    pub fn digest_where(&self, filter: impl Fn(&str) -> bool) -> [u8; 32] {
        let mut h = Sha256::new();
        for (name, t) in self.tensors.iter().filter(|(n, _)| filter(n)) {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            for &d in t.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().into()
    }

    pub fn digest(&self) -> [u8; 32] {
        self.digest_where(|_| true)
    }

    pub(crate) fn normal(
        &mut self,
        rng: &mut impl Rng,
        name: impl Into<String>,
        shape: &[usize],
        std: f32,
    ) -> Result<()> {
        let dist = Normal::new(0.0f32, std).map_err(|e| Error::ModelConfig(e.to_string()))?;
        let len = shape.iter().product();
        let data = (0..len).map(|_| dist.sample(rng)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub(crate) fn uniform(
        &mut self,
        rng: &mut impl Rng,
        name: impl Into<String>,
        shape: &[usize],
        bound: f32,
    ) -> Result<()> {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub(crate) fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<()> {
        self.insert(name, Tensor::zeros(shape))
    }

    pub(crate) fn ones(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<()> {
        self.insert(name, Tensor::filled(shape, 1.0))
    }

    /// `[fan_in, fan_out]` weight with std `1/sqrt(fan_in)` and a zero bias.
    pub(crate) fn linear(
        &mut self,
        rng: &mut impl Rng,
        prefix: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Result<()> {
        self.normal(
            rng,
            format!("{prefix}.w"),
            &[fan_in, fan_out],
            (fan_in as f32).powf(-0.5),
        )?;
        self.zeros(format!("{prefix}.b"), &[fan_out])
    }

    pub(crate) fn layer_norm(&mut self, prefix: &str, width: usize) -> Result<()> {
        self.ones(format!("{prefix}.gamma"), &[width])?;
        self.zeros(format!("{prefix}.beta"), &[width])
    }
}

/// Hex rendering of a digest, for logs and test messages.
/// First 8 bytes of SHA-256 over the JSON form of a config.
pub fn config_fingerprint<T: serde::Serialize>(config: &T) -> u64 {
    let text = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn hex_digest(d: &[u8; 32]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// One forward pass: a graph plus the parameters bound into it.
///
/// Each named parameter becomes a single leaf the first time it is requested.
/// Leaves whose names are in the trainable set require gradients; all other
/// parameters enter the graph as constants, so backward skips the work of
/// differentiating with respect to frozen weights.
pub struct Session<'a, T: Float> {
    pub graph: Graph<T>,
    trainable: Option<&'a BTreeSet<String>>,
    bound: BTreeMap<String, NodeId>,
}

impl<'a, T: Float> Session<'a, T> {
    pub fn new(trainable: Option<&'a BTreeSet<String>>) -> Self {
        Self {
            graph: Graph::new(),
            trainable,
            bound: BTreeMap::new(),
        }
    }

    /// A session in which nothing requires gradients (inference).
    pub fn inference() -> Self {
        Self::new(None)
    }

    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.bound.get(name) {
            return Ok(id);
        }
        let value = store.get(name)?.cast::<T>();
        let rg = self.trainable.is_some_and(|t| t.contains(name));
        let id = self.graph.leaf(value, rg);
        self.bound.insert(name.to_string(), id);
        Ok(id)
    }

    /// Binds `name` to an existing node, overriding the stored value. Used to
    /// evaluate the graph at perturbed or higher-precision parameter values.
    pub fn bind(&mut self, name: &str, node: NodeId) {
        self.bound.insert(name.to_string(), node);
    }

    pub fn bound(&self) -> impl Iterator<Item = (&str, NodeId)> {
        self.bound.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Gradients of every bound trainable parameter, converted to `f32`.
    /// Trainable parameters that did not influence the loss get zeros.
    pub fn named_gradients(&self, grads: &Gradients<T>) -> BTreeMap<String, Tensor<f32>> {
        let mut out = BTreeMap::new();
        let Some(trainable) = self.trainable else {
            return out;
        };
        for (name, &id) in &self.bound {
            if !trainable.contains(name) {
                continue;
            }
            let g = match grads.get(id) {
                Some(t) => t.cast::<f32>(),
                None => Tensor::zeros(self.graph.value(id).shape()),
            };
            out.insert(name.clone(), g);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParamStore::new();
        p.zeros("a", &[2]).unwrap();
        assert!(matches!(
            p.zeros("a", &[3]),
            Err(Error::DuplicateParameter(_))
        ));
        assert!(matches!(p.zeros("", &[3]), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn digest_tracks_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = ParamStore::new();
        p.normal(&mut rng, "w", &[3, 3], 0.1).unwrap();
        p.zeros("b", &[3]).unwrap();
        let before = p.digest();
        let frozen = p.digest_where(|n| n == "b");
        p.get_mut("w").unwrap().data_mut()[4] += 1e-6;
        assert_ne!(before, p.digest());
        assert_eq!(frozen, p.digest_where(|n| n == "b"));
    }

    #[test]
    fn session_binds_once_and_respects_trainable_set() {
        let mut p = ParamStore::new();
        p.ones("a", &[1, 2]).unwrap();
        p.ones("b", &[1, 2]).unwrap();
        let trainable: BTreeSet<String> = ["a".to_string()].into();
        let mut s = Session::<f64>::new(Some(&trainable));
        let a = s.param(&p, "a").unwrap();
        assert_eq!(s.param(&p, "a").unwrap(), a);
        let b = s.param(&p, "b").unwrap();
        let prod = s.graph.mul(a, b).unwrap();
        let loss = s.graph.sum_all(prod).unwrap();
        let grads = s.graph.backward(loss).unwrap();
        let named = s.named_gradients(&grads);
        assert_eq!(named.keys().collect::<Vec<_>>(), vec!["a"]);
        assert!(s.param(&p, "missing").is_err());
    }
}
