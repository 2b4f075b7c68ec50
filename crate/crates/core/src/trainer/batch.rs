use std::collections::BTreeMap;

use promptfuse_autodiff::Tensor;
use rayon::prelude::*;

use crate::error::Result;

pub type NamedGradients = BTreeMap<String, Tensor<f32>>;

/// Mean loss and mean gradients over a batch. Per-sample work runs in
/// parallel; the reduction walks samples in index order, so the result does
/// not depend on scheduling.
pub fn batch_gradients<S, F>(items: &[S], per_sample: F) -> Result<(f32, NamedGradients)>
where
    S: Sync,
    F: Fn(&S) -> Result<(f32, NamedGradients)> + Sync,
{
    let (loss, grads, _) = batch_gradients_with(items, |s| {
        let (l, g) = per_sample(s)?;
        Ok((l, g, ()))
    })?;
    Ok((loss, grads))
}

/// [`batch_gradients`] that also collects a per-sample side value, in order.
pub fn batch_gradients_with<S, A, F>(
    items: &[S],
    per_sample: F,
) -> Result<(f32, NamedGradients, Vec<A>)>
where
    S: Sync,
    A: Send,
    F: Fn(&S) -> Result<(f32, NamedGradients, A)> + Sync,
{
    let results: Vec<Result<(f32, NamedGradients, A)>> =
        items.par_iter().map(&per_sample).collect();
    let mut loss = 0.0f64;
    let mut total: NamedGradients = BTreeMap::new();
    let mut side = Vec::with_capacity(items.len());
    for r in results {
        let (l, grads, a) = r?;
        side.push(a);
        loss += l as f64;
        for (name, g) in grads {
            match total.get_mut(&name) {
                Some(acc) => {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
                None => {
                    total.insert(name, g);
                }
            }
        }
    }
    let n = items.len().max(1) as f32;
    for g in total.values_mut() {
        for x in g.data_mut() {
            *x /= n;
        }
    }
    Ok(((loss / n as f64) as f32, total, side))
}
