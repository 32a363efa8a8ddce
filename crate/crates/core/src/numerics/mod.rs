//! Dense numerics shared by every probe: matrices, seeded randomness,
//! log-domain reductions, AdamW and finite-difference gradient checks.

mod adam;
mod gradcheck;
mod matrix;
pub mod rng;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use gradcheck::{check_gradient, check_gradient_at, Differentiable, FnObjective};
pub use matrix::{dot, Matrix};
pub use rng::{derive_seed, Rng};

use crate::error::{contract, Error, Result};

/// `libm` wrappers; keeps transcendental results identical on every target.
pub mod math {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn tanh(x: f64) -> f64 {
        libm::tanh(x)
    }
    #[inline]
    pub fn pow(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
}

/// `log Σ exp(v)` with a max shift.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(contract("log_sum_exp of an empty vector"));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("log_sum_exp input"));
    }
    Ok(log_sum_exp_unchecked(values))
}

/// Caller guarantees a non-empty, finite slice.
pub(crate) fn log_sum_exp_unchecked(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|&v| math::exp(v - max)).sum();
    max + math::ln(sum)
}

/// Row-wise log-softmax into `out` (same length as `row`).
pub(crate) fn log_softmax_into(row: &[f64], out: &mut [f64]) {
    let lse = log_sum_exp_unchecked(row);
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v - lse;
    }
}

pub fn softmax_rows(logits: &Matrix) -> Result<Matrix> {
    if !logits.is_finite() {
        return Err(Error::NonFinite("softmax logits"));
    }
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    if logits.cols() == 0 {
        return Ok(out);
    }
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dst = out.row_mut(r);
        let mut sum = 0.0;
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = math::exp(v - max);
            sum += *d;
        }
        dst.iter_mut().for_each(|d| *d /= sum);
    }
    Ok(out)
}

/// Uniform Glorot initialisation for an `fan_out × fan_in` weight.
pub fn glorot_uniform(fan_out: usize, fan_in: usize, rng: &mut Rng) -> Matrix {
    let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
    let mut w = Matrix::zeros(fan_out, fan_in);
    for v in w.as_mut_slice() {
        *v = rng.uniform_range(-limit, limit);
    }
    w
}
