//! Checks of the two estimator bounds on concrete data.
//!
//! The margin check builds a score function from a linear separator with
//! functional gap `d` and measures how far its MINE value sits from
//! `I(X;Y) = ln 2`. The cross-entropy check brackets the log-loss MI
//! estimate using accuracy `â` and the smallest true-class probability `ε`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::error::{contract, shape, Result};
use crate::estimators::{argmax, mi_cross_entropy, LabelDistribution};
use crate::numerics::{dot, log_softmax_into, log_sum_exp, math, Matrix};
use crate::probes::ProbeState;

/// Absolute slack under which a comparison counts as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    Pass,
    /// Within [`TIE_TOLERANCE`] of a bound; neither a strict pass nor a
    /// violation.
    Tie,
    Fail,
}

impl Verdict {
    pub fn is_violation(self) -> bool {
        self == Verdict::Fail
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Tie => "tie",
            Verdict::Fail => "fail",
        }
    }
}

/// `T(x, 0) = w·x + b`, `T(x, 1) = −w·x − b − d`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarginProbe {
    pub w: Vec<f64>,
    pub b: f64,
    pub d: f64,
}

pub fn construct_margin_probe(w: &[f64], b: f64, d: f64) -> Result<MarginProbe> {
    if w.is_empty() || !w.iter().all(|v| v.is_finite()) || !b.is_finite() {
        return Err(contract("margin probe needs a finite, non-empty separator"));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(contract(format!("margin must be finite and non-negative, got {d}")));
    }
    Ok(MarginProbe { w: w.to_vec(), b, d })
}

impl MarginProbe {
    pub fn score(&self, x: &[f64], y: usize) -> f64 {
        let f = dot(&self.w, x) + self.b;
        if y == 0 {
            f
        } else {
            -f - self.d
        }
    }

    /// `(αw, αb, αd)`.
    pub fn scaled(&self, alpha: f64) -> MarginProbe {
        MarginProbe {
            w: self.w.iter().map(|v| alpha * v).collect(),
            b: alpha * self.b,
            d: alpha * self.d,
        }
    }

    /// The same score function as a two-class linear probe.
    pub fn to_linear_probe(&self) -> Result<ProbeState> {
        let neg: Vec<f64> = self.w.iter().map(|v| -v).collect();
        let weight = Matrix::from_rows(&[self.w.as_slice(), neg.as_slice()])?;
        ProbeState::linear_with(weight, &[self.b, -self.b - self.d])
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Theorem1Report {
    pub n: usize,
    pub d: f64,
    /// `d / ‖w‖`.
    pub geometric_margin: f64,
    /// `I(X;Y) = ln 2` for a balanced task with disjoint class supports.
    pub mi_true: f64,
    /// MINE value of the margin probe over the joint and the product of
    /// marginals.
    pub mi_estimate: f64,
    pub gap: f64,
    /// `e^{−d}`.
    pub bound: f64,
    pub verdict: Verdict,
    pub min_joint_score: f64,
    pub max_offjoint_score: f64,
    /// `log E_Q e^T − E_Q T ≥ 0`. The bound is only guaranteed when this
    /// is small compared with `e^{−d}`.
    pub jensen_gap: f64,
}

/// Computes the margin gap on a balanced, separable binary dataset.
pub fn check_theorem1(features: &Matrix, labels: &[usize], probe: &MarginProbe) -> Result<Theorem1Report> {
    if features.rows() != labels.len() || labels.is_empty() {
        return Err(shape(format!("{} rows for {} labels", features.rows(), labels.len())));
    }
    if features.cols() != probe.w.len() {
        return Err(shape(format!(
            "features have {} columns, separator has {}",
            features.cols(),
            probe.w.len()
        )));
    }
    let n0 = labels.iter().filter(|&&y| y == 0).count();
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    if n0 + n1 != labels.len() || n0 != n1 {
        return Err(contract(format!(
            "margin check needs a balanced binary task, got class counts {n0}/{n1} of {}",
            labels.len()
        )));
    }
    let n = labels.len();
    let mut joint = Vec::with_capacity(n);
    let mut all = Vec::with_capacity(2 * n);
    let mut min_joint = f64::INFINITY;
    let mut max_off = f64::NEG_INFINITY;
    for (x, &y) in features.row_iter().zip(labels) {
        let tj = probe.score(x, y);
        let to = probe.score(x, 1 - y);
        if !(tj > 0.0) || !(to < -probe.d) {
            return Err(contract(format!(
                "dataset is not separated by the probe with gap {}: joint score {tj}, off-joint score {to}",
                probe.d
            )));
        }
        min_joint = min_joint.min(tj);
        max_off = max_off.max(to);
        joint.push(tj);
        all.push(tj);
        all.push(to);
    }
    let mean_joint = joint.iter().sum::<f64>() / n as f64;
    // product of marginals = joint rows paired with both labels, weight ½ each
    let log_marginal = log_sum_exp(&all)? - math::ln(2.0 * n as f64);
    let mi_estimate = mean_joint - log_marginal;
    let jensen_gap = log_sum_exp(&joint)? - math::ln(n as f64) - mean_joint;
    let gap = (LN_2 - mi_estimate).abs();
    let bound = math::exp(-probe.d);
    let verdict = if (gap - bound).abs() <= TIE_TOLERANCE {
        Verdict::Tie
    } else if gap < bound {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let w_norm = math::sqrt(dot(&probe.w, &probe.w));
    Ok(Theorem1Report {
        n,
        d: probe.d,
        geometric_margin: if w_norm > 0.0 { probe.d / w_norm } else { f64::INFINITY },
        mi_true: LN_2,
        mi_estimate,
        gap,
        bound,
        verdict,
        min_joint_score: min_joint,
        max_offjoint_score: max_off,
        jensen_gap,
    })
}

/// `(lower, upper)` for the log-loss MI estimate:
/// `H(Y) − â ln C + (1 − â) ln ε` and `H(Y) − (1 − â) ln 2`.
pub fn theorem2_bounds(accuracy: f64, eps: f64, num_classes: usize, h_y: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(contract(format!("accuracy {accuracy} outside [0, 1]")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(contract(format!("ε = {eps} outside (0, 1]")));
    }
    if num_classes < 2 {
        return Err(contract("bounds need at least two classes"));
    }
    if !h_y.is_finite() || h_y < 0.0 {
        return Err(contract(format!("label entropy {h_y} is not a valid entropy")));
    }
    if accuracy < 1.0 && eps > 0.5 {
        return Err(contract(format!(
            "ε = {eps} > 1/2 with accuracy {accuracy} < 1: some wrong prediction would need true-class probability above 1/2"
        )));
    }
    let miss = 1.0 - accuracy;
    let lower = h_y - accuracy * math::ln(num_classes as f64) + miss * math::ln(eps);
    let upper = h_y - miss * LN_2;
    Ok((lower, upper))
}

/// Strictly inside `(lower, upper)` passes; within [`TIE_TOLERANCE`] of
/// either end is a tie.
pub fn bracket_verdict(value: f64, lower: f64, upper: f64) -> Verdict {
    if (value - lower).abs() <= TIE_TOLERANCE || (value - upper).abs() <= TIE_TOLERANCE {
        Verdict::Tie
    } else if value > lower && value < upper {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Theorem2Report {
    pub n: usize,
    pub num_classes: usize,
    pub h_y: f64,
    pub accuracy: f64,
    pub eps: f64,
    pub eps_underflow: bool,
    pub mi_estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub verdict: Verdict,
    /// Correct predictions whose true-class probability is at most `1/C`.
    pub regime_violations_correct: usize,
    /// Wrong predictions whose true-class probability is at least `1/2`.
    pub regime_violations_wrong: usize,
}

/// Log-loss MI of `logits` against the bracket built from its own
/// accuracy and `ε`.
pub fn check_theorem2(logits: &Matrix, labels: &[usize], dist: &LabelDistribution) -> Result<Theorem2Report> {
    let est = mi_cross_entropy(logits, labels, dist)?;
    let c = logits.cols();
    let (lower, upper) = theorem2_bounds(est.accuracy, est.eps_min_prob, c, est.h_y)?;
    let inv_c = 1.0 / c as f64;
    let mut logp = vec![0.0; c];
    let (mut bad_correct, mut bad_wrong) = (0, 0);
    for (row, &y) in logits.row_iter().zip(labels) {
        log_softmax_into(row, &mut logp);
        let p = math::exp(logp[y]);
        if argmax(row) == y {
            if p <= inv_c {
                bad_correct += 1;
            }
        } else if p >= 0.5 {
            bad_wrong += 1;
        }
    }
    let v = est.value;
    let verdict = bracket_verdict(v, lower, upper);
    Ok(Theorem2Report {
        n: labels.len(),
        num_classes: c,
        h_y: est.h_y,
        accuracy: est.accuracy,
        eps: est.eps_min_prob,
        eps_underflow: est.eps_underflow,
        mi_estimate: v,
        lower,
        upper,
        verdict,
        regime_violations_correct: bad_correct,
        regime_violations_wrong: bad_wrong,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum BoundsReport {
    Theorem1(Theorem1Report),
    Theorem2(Theorem2Report),
}

impl BoundsReport {
    pub fn verdict(&self) -> Verdict {
        match self {
            BoundsReport::Theorem1(r) => r.verdict,
            BoundsReport::Theorem2(r) => r.verdict,
        }
    }
}
