use promptfuse_autodiff::{NodeId, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IGConfig {
    /// Riemann steps m.
    pub steps: usize,
}

impl Default for IGConfig {
    fn default() -> Self {
        Self { steps: 128 }
    }
}

impl IGConfig {
    pub fn validate(&self) -> Result<()> {
        match self.steps {
            0 => Err(Error::Config(
                "integrated gradients needs at least one step".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Attributions for each input tensor plus the endpoint values of the target.
#[derive(Debug, Clone, PartialEq)]
pub struct IgScores {
    pub scores: Vec<Tensor<f64>>,
    pub f_input: f64,
    pub f_baseline: f64,
}

impl IgScores {
    pub fn total(&self) -> f64 {
        self.scores.iter().flat_map(|t| t.data()).sum()
    }

    /// |Σ scores − (F(input) − F(baseline))|.
    pub fn delta(&self) -> f64 {
        (self.total() - (self.f_input - self.f_baseline)).abs()
    }
}

/// Passes iff the completeness gap is within `tolerance` relative to
/// max(1, |F(input) − F(baseline)|). Returns the verdict and the gap.
pub fn completeness_check(scores: &IgScores, tolerance: f64) -> (bool, f64) {
    let delta = scores.delta();
    let scale = (scores.f_input - scores.f_baseline).abs().max(1.0);
    (delta <= tolerance * scale, delta)
}

fn evaluate<F>(
    target: &F,
    points: Vec<Tensor<f64>>,
    grads: bool,
) -> Result<(f64, Vec<Option<Tensor<f64>>>)>
where
    F: Fn(&mut Session<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut s = Session::<f64>::inference();
    let ids: Vec<NodeId> = points.into_iter().map(|p| s.graph.leaf(p, grads)).collect();
    let out = target(&mut s, &ids)?;
    let value = s.graph.value(out).item();
    if !grads {
        return Ok((value, Vec::new()));
    }
    let g = s.graph.backward(out)?;
    Ok((value, ids.iter().map(|&id| g.get(id).cloned()).collect()))
}

/// Integrated gradients with the right-endpoint Riemann sum
/// `(x − x') · (1/m) Σ_{k=1..m} ∇F(x' + (k/m)(x − x'))`.
///
/// Interpolation points are evaluated in parallel and summed in k order.
pub fn integrated_gradients<F>(
    target: F,
    inputs: &[Tensor<f64>],
    baselines: &[Tensor<f64>],
    steps: usize,
) -> Result<IgScores>
where
    F: Fn(&mut Session<f64>, &[NodeId]) -> Result<NodeId> + Sync,
{
    IGConfig { steps }.validate()?;
    if inputs.len() != baselines.len() {
        return Err(Error::Config("one baseline per input is required".into()));
    }
    for (x, b) in inputs.iter().zip(baselines) {
        if x.shape() != b.shape() {
            return Err(Error::WidthMismatch {
                expected: x.len(),
                actual: b.len(),
                context: "baseline shape",
            });
        }
    }
    let point = |alpha: f64| -> Vec<Tensor<f64>> {
        inputs
            .iter()
            .zip(baselines)
            .map(|(x, b)| {
                let mut p = b.clone();
                for (v, (&xi, &bi)) in p.data_mut().iter_mut().zip(x.data().iter().zip(b.data())) {
                    *v = bi + alpha * (xi - bi);
                }
                p
            })
            .collect()
    };
    let per_step: Vec<Result<Vec<Option<Tensor<f64>>>>> = (1..=steps)
        .into_par_iter()
        .map(|k| {
            let (_, g) = evaluate(&target, point(k as f64 / steps as f64), true)?;
            let finite = g.iter().flatten().all(|t| t.all_finite());
            if !finite {
                return Err(Error::NonFiniteAttribution { k });
            }
            Ok(g)
        })
        .collect();
    let mut sums: Vec<Tensor<f64>> = inputs.iter().map(|x| Tensor::zeros(x.shape())).collect();
    for r in per_step {
        for (acc, g) in sums.iter_mut().zip(r?) {
            if let Some(g) = g {
                acc.data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .for_each(|(a, b)| *a += b);
            }
        }
    }
    for ((acc, x), b) in sums.iter_mut().zip(inputs).zip(baselines) {
        for (a, (&xi, &bi)) in acc.data_mut().iter_mut().zip(x.data().iter().zip(b.data())) {
            *a *= (xi - bi) / steps as f64;
        }
    }
    let (f_input, _) = evaluate(&target, inputs.to_vec(), false)?;
    let (f_baseline, _) = evaluate(&target, baselines.to_vec(), false)?;
    Ok(IgScores {
        scores: sums,
        f_input,
        f_baseline,
    })
}
