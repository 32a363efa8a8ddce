use alloc::format;
use alloc::vec::Vec;

use super::Matrix;
use crate::error::{contract, Error, Result};

/// A scalar function of a parameter set with an analytic gradient.
pub trait Differentiable {
    fn value(&mut self, params: &[Matrix]) -> Result<f64>;
    fn gradient(&mut self, params: &[Matrix]) -> Result<Vec<Matrix>>;
}

/// Adapter turning a pair of closures into a [`Differentiable`].
pub struct FnObjective<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V, G> Differentiable for FnObjective<V, G>
where
    V: FnMut(&[Matrix]) -> f64,
    G: FnMut(&[Matrix]) -> Vec<Matrix>,
{
    fn value(&mut self, params: &[Matrix]) -> Result<f64> {
        Ok((self.value)(params))
    }

    fn gradient(&mut self, params: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok((self.gradient)(params))
    }
}

/// Max over every coordinate of `|analytic − central difference| / max(1, |analytic|)`.
pub fn check_gradient<F: Differentiable + ?Sized>(f: &mut F, point: &[Matrix], h: f64) -> Result<f64> {
    let coords: Vec<(usize, usize)> = point
        .iter()
        .enumerate()
        .flat_map(|(t, m)| (0..m.len()).map(move |k| (t, k)))
        .collect();
    check_gradient_at(f, point, h, &coords)
}

/// Same as [`check_gradient`], restricted to `(tensor, flat index)` coordinates.
pub fn check_gradient_at<F: Differentiable + ?Sized>(
    f: &mut F,
    point: &[Matrix],
    h: f64,
    coords: &[(usize, usize)],
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(contract(format!("finite-difference step must be positive, got {h}")));
    }
    let analytic = f.gradient(point)?;
    if analytic.len() != point.len() || analytic.iter().zip(point).any(|(g, p)| g.shape() != p.shape()) {
        return Err(contract("analytic gradient shape differs from the point"));
    }

    let mut work: Vec<Matrix> = point.to_vec();
    let mut worst: f64 = 0.0;
    for &(t, k) in coords {
        let orig = work[t].as_slice()[k];
        work[t].as_mut_slice()[k] = orig + h;
        let plus = f.value(&work)?;
        work[t].as_mut_slice()[k] = orig - h;
        let minus = f.value(&work)?;
        work[t].as_mut_slice()[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite("objective during gradient check"));
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[t].as_slice()[k];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
