use std::collections::BTreeMap;

use promptfuse_autodiff::Tensor;

use crate::error::{Error, Result};
use crate::params::ParamAccess;

pub const BETA1: f32 = 0.9;
pub const BETA2: f32 = 0.999;
pub const EPSILON: f32 = 1e-8;

struct Slot {
    lr: f32,
    m: Vec<f32>,
    v: Vec<f32>,
}

/// Bias-corrected Adam with one learning rate per parameter. Moment
/// accumulators exist only for the parameters it was built with.
pub struct Adam {
    slots: BTreeMap<String, Slot>,
    t: u64,
}

impl Adam {
    /// `lr_of` assigns each trainable parameter its group's learning rate.
    pub fn new<'a, P: ParamAccess + ?Sized>(
        params: &P,
        trainable: impl IntoIterator<Item = &'a String>,
        lr_of: impl Fn(&str) -> f32,
    ) -> Result<Self> {
        let mut slots = BTreeMap::new();
        for name in trainable {
            let len = params.param_ref(name)?.len();
            let lr = lr_of(name);
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate {lr} for {name}")));
            }
            slots.insert(
                name.clone(),
                Slot {
                    lr,
                    m: vec![0.0; len],
                    v: vec![0.0; len],
                },
            );
        }
        Ok(Self { slots, t: 0 })
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn learning_rate(&self, name: &str) -> Option<f32> {
        self.slots.get(name).map(|s| s.lr)
    }

    /// One update. Gradients must cover exactly the trainable set and be
    /// finite; nothing is written unless both hold.
    pub fn step<P: ParamAccess + ?Sized>(
        &mut self,
        params: &mut P,
        grads: &BTreeMap<String, Tensor<f32>>,
    ) -> Result<()> {
        self.step_scaled(params, grads, 1.0)
    }

    /// [`Self::step`] with every learning rate multiplied by `scale`.
    pub fn step_scaled<P: ParamAccess + ?Sized>(
        &mut self,
        params: &mut P,
        grads: &BTreeMap<String, Tensor<f32>>,
        scale: f64,
    ) -> Result<()> {
        for name in grads.keys() {
            if !self.slots.contains_key(name) {
                return Err(Error::UnknownParameter(name.clone()));
            }
        }
        for (name, slot) in &self.slots {
            let g = grads
                .get(name)
                .ok_or_else(|| Error::MissingTensor(name.clone()))?;
            if g.len() != slot.m.len() {
                return Err(Error::WidthMismatch {
                    expected: slot.m.len(),
                    actual: g.len(),
                    context: "gradient size",
                });
            }
            if !g.all_finite() {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - (BETA1 as f64).powi(self.t as i32);
        let bc2 = 1.0 - (BETA2 as f64).powi(self.t as i32);
        for (name, slot) in self.slots.iter_mut() {
            let g = grads[name].data();
            let p = params.param_mut(name)?.data_mut();
            for i in 0..p.len() {
                slot.m[i] = BETA1 * slot.m[i] + (1.0 - BETA1) * g[i];
                slot.v[i] = BETA2 * slot.v[i] + (1.0 - BETA2) * g[i] * g[i];
                let m_hat = slot.m[i] as f64 / bc1;
                let v_hat = slot.v[i] as f64 / bc2;
                p[i] -= (slot.lr as f64 * scale * m_hat / (v_hat.sqrt() + EPSILON as f64)) as f32;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;

    fn store(values: &[(&str, f32)]) -> ParamStore {
        let mut p = ParamStore::new();
        for &(n, v) in values {
            p.insert(n, Tensor::filled(&[1], v)).unwrap();
        }
        p
    }

    fn grads(values: &[(&str, f32)]) -> BTreeMap<String, Tensor<f32>> {
        values
            .iter()
            .map(|&(n, v)| (n.to_string(), Tensor::filled(&[1], v)))
            .collect()
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = store(&[("w", 0.0)]);
        let names = vec!["w".to_string()];
        let mut adam = Adam::new(&p, &names, |_| 0.5).unwrap();
        adam.step(&mut p, &grads(&[("w", 0.1)])).unwrap();
        let expected = -0.5 * 0.1 / (0.1 + 1e-8);
        assert!((p.get("w").unwrap().data()[0] as f64 - expected).abs() < 1e-7);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut p = store(&[("w", 1.25)]);
        let names = vec!["w".to_string()];
        let mut adam = Adam::new(&p, &names, |_| 0.5).unwrap();
        for _ in 0..10 {
            adam.step(&mut p, &grads(&[("w", 0.0)])).unwrap();
        }
        assert_eq!(p.get("w").unwrap().data()[0], 1.25);
    }

    #[test]
    fn groups_use_their_own_rates() {
        let mut p = store(&[("prompt", 0.0), ("proj", 0.0)]);
        let names = vec!["prompt".to_string(), "proj".to_string()];
        let mut adam = Adam::new(&p, &names, |n| if n == "prompt" { 5e-1 } else { 5e-4 }).unwrap();
        adam.step(&mut p, &grads(&[("prompt", 1.0), ("proj", 1.0)]))
            .unwrap();
        assert!((p.get("prompt").unwrap().data()[0] + 0.5).abs() < 1e-6);
        assert!((p.get("proj").unwrap().data()[0] + 5e-4).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_gradients_without_writing() {
        let mut p = store(&[("a", 1.0), ("b", 2.0)]);
        let names = vec!["a".to_string(), "b".to_string()];
        let mut adam = Adam::new(&p, &names, |_| 0.1).unwrap();
        let err = adam.step(&mut p, &grads(&[("a", 1.0), ("b", f32::NAN)]));
        assert!(matches!(err, Err(Error::NonFiniteGradient(n)) if n == "b"));
        assert_eq!(p.get("a").unwrap().data()[0], 1.0);
        assert!(adam.step(&mut p, &grads(&[("a", 1.0)])).is_err());
        assert!(adam
            .step(&mut p, &grads(&[("a", 1.0), ("b", 1.0), ("c", 1.0)]))
            .is_err());
        assert_eq!(adam.step_count(), 0);
    }
}
