use crate::error::{AutodiffError, Result};

/// Central-difference gradient of `f` at `point`:
/// `(f(p + h·e_i) - f(p - h·e_i)) / 2h` for each coordinate `i`.
///
/// This is the independent oracle the backward pass is checked against; it
/// never touches the graph machinery.
pub fn finite_difference_gradient<F>(mut f: F, point: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(AutodiffError::InvalidStep { step });
    }
    let mut p = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = p[i];
        p[i] = orig + step;
        let plus = f(&p);
        p[i] = orig - step;
        let minus = f(&p);
        p[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(AutodiffError::NonFiniteValue { coordinate: i });
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps near-zero pairs from
/// producing huge ratios out of rounding noise.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Norm-based relative error `‖a - b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn vector_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(floor)
}

pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y, floor))
        .fold(0.0, f64::max)
}
