//! MI estimates from probe logits.
//!
//! Every estimator consumes the `batch × C` logit matrix of a probe, where
//! logit `c` of row `i` is the score `T(c, h_i)`. Three functionals are
//! provided:
//!
//! - cross-entropy: `H(Y) − mean(−log softmax(logits)[y])`,
//! - MINE (Donsker–Varadhan): `E_joint[T] − log E_product[e^T]`,
//! - InfoNCE: `mean_i [s_ii − log (1/B) Σ_j e^{s_ij}]`.
//!
//! All values are in nats.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{contract, shape, Error, Result};
use crate::numerics::{log_softmax_into, log_sum_exp, log_sum_exp_unchecked, math, Matrix};

/// Training objective / estimation functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Objective {
    CrossEntropy,
    Mine,
    #[cfg_attr(feature = "serde", serde(rename = "infonce"))]
    InfoNce,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::CrossEntropy, Objective::Mine, Objective::InfoNce];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::CrossEntropy => "cross_entropy",
            Objective::Mine => "mine",
            Objective::InfoNce => "infonce",
        }
    }

    /// Smallest batch the objective is defined for.
    pub fn min_batch(self) -> usize {
        match self {
            Objective::CrossEntropy => 1,
            Objective::Mine | Objective::InfoNce => 2,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" | "cross_entropy" | "cross-entropy" => Ok(Objective::CrossEntropy),
            "mine" => Ok(Objective::Mine),
            "infonce" | "info_nce" => Ok(Objective::InfoNce),
            other => Err(contract(format!("unknown objective '{other}'"))),
        }
    }
}

/// Class counts and probabilities of the label variable.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelDistribution {
    class_counts: Vec<usize>,
    probabilities: Vec<f64>,
}

impl LabelDistribution {
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(contract("label distribution needs at least one sample"));
        }
        Ok(Self {
            class_counts: counts.to_vec(),
            probabilities: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn from_labels(labels: &[usize], num_classes: usize) -> Result<Self> {
        let mut counts = vec![0usize; num_classes];
        for &y in labels {
            *counts
                .get_mut(y)
                .ok_or_else(|| contract(format!("label {y} outside {num_classes} classes")))? += 1;
        }
        Self::from_counts(&counts)
    }

    /// Distribution known only through its probabilities; counts are empty.
    pub fn from_probabilities(probs: &[f64]) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(contract("probabilities must be non-negative and sum to 1"));
        }
        Ok(Self {
            class_counts: Vec::new(),
            probabilities: probs.to_vec(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.probabilities.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }
}

/// `−Σ p log p`, with `0 · log 0 = 0`.
pub fn entropy(dist: &LabelDistribution) -> f64 {
    -dist
        .probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * math::ln(p))
        .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MIEstimate {
    /// Estimated `I(Y; H)` in nats. Not clamped at zero.
    pub value: f64,
    pub estimator: Objective,
    /// `H(Y)` of the distribution the estimate was computed against.
    pub h_y: f64,
    pub accuracy: f64,
    /// Smallest predicted true-class probability over the evaluation set.
    pub eps_min_prob: f64,
    /// Set when some true-class probability underflowed to zero and
    /// `eps_min_prob` was replaced by the smallest positive `f64`.
    pub eps_underflow: bool,
    pub mean_nll: f64,
    pub n_eval: usize,
}

impl MIEstimate {
    /// `value / H(Y)`, or `None` for a degenerate label distribution.
    pub fn normalized(&self) -> Option<f64> {
        (self.h_y > 0.0).then(|| self.value / self.h_y)
    }
}

fn check_logits(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if logits.rows() != labels.len() {
        return Err(shape(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(contract(format!("label {bad} outside {} classes", logits.cols())));
    }
    if !logits.is_finite() {
        return Err(Error::NonFinite("logits"));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    check_logits(logits, labels)?;
    if labels.is_empty() {
        return Err(contract("accuracy of an empty evaluation set"));
    }
    let hits = logits
        .row_iter()
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Log-loss MI estimate, `H(Y) − mean NLL`, plus accuracy and `ε`.
pub fn mi_cross_entropy(logits: &Matrix, labels: &[usize], dist: &LabelDistribution) -> Result<MIEstimate> {
    check_logits(logits, labels)?;
    if labels.is_empty() {
        return Err(contract("MI estimate on an empty evaluation set"));
    }
    if dist.num_classes() != logits.cols() {
        return Err(shape(format!(
            "label distribution has {} classes, logits have {}",
            dist.num_classes(),
            logits.cols()
        )));
    }
    let mut logp = vec![0.0; logits.cols()];
    let mut nll_sum = 0.0;
    let mut min_logp = f64::INFINITY;
    let mut hits = 0usize;
    for (row, &y) in logits.row_iter().zip(labels) {
        log_softmax_into(row, &mut logp);
        nll_sum -= logp[y];
        min_logp = min_logp.min(logp[y]);
        if argmax(row) == y {
            hits += 1;
        }
    }
    let n = labels.len() as f64;
    let mean_nll = nll_sum / n;
    let h_y = dist.entropy();
    let eps = math::exp(min_logp);
    let eps_underflow = eps == 0.0;
    Ok(MIEstimate {
        value: h_y - mean_nll,
        estimator: Objective::CrossEntropy,
        h_y,
        accuracy: hits as f64 / n,
        eps_min_prob: if eps_underflow { f64::from_bits(1) } else { eps },
        eps_underflow,
        mean_nll,
        n_eval: labels.len(),
    })
}

/// Donsker–Varadhan functional on sampled scores:
/// `mean(joint) − log_sum_exp(marginal) + log(len(marginal))`.
pub fn mi_mine(scores_joint: &[f64], scores_marginal: &[f64]) -> Result<f64> {
    if scores_joint.is_empty() || scores_marginal.is_empty() {
        return Err(contract("MINE needs non-empty joint and marginal scores"));
    }
    if !scores_joint.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("MINE joint scores"));
    }
    let mean = scores_joint.iter().sum::<f64>() / scores_joint.len() as f64;
    Ok(mean - log_sum_exp(scores_marginal)? + math::ln(scores_marginal.len() as f64))
}

/// InfoNCE on a `B × B` score matrix with positives on the diagonal.
pub fn mi_infonce(scores: &Matrix) -> Result<f64> {
    if scores.rows() != scores.cols() {
        return Err(contract(format!(
            "InfoNCE score matrix must be square, got {}x{}",
            scores.rows(),
            scores.cols()
        )));
    }
    if scores.rows() == 0 {
        return Err(contract("InfoNCE on an empty batch"));
    }
    if !scores.is_finite() {
        return Err(Error::NonFinite("InfoNCE scores"));
    }
    let b = scores.rows();
    let log_b = math::ln(b as f64);
    let total: f64 = scores
        .row_iter()
        .enumerate()
        .map(|(i, row)| row[i] - log_sum_exp_unchecked(row))
        .sum();
    Ok(total / b as f64 + log_b)
}

/// `s_ij = T(y_j, h_i) = logits[i][y_j]`: every representation scored
/// against every label in the batch.
pub fn label_score_matrix(logits: &Matrix, labels: &[usize]) -> Result<Matrix> {
    check_logits(logits, labels)?;
    let b = labels.len();
    let mut s = Matrix::zeros(b, b);
    for i in 0..b {
        let row = logits.row(i);
        for (j, &y) in labels.iter().enumerate() {
            s.set(i, j, row[y]);
        }
    }
    Ok(s)
}

/// MINE evaluated exactly over the empirical joint and the product of the
/// empirical representation marginal with `dist`:
/// `mean_i T(y_i, h_i) − log (1/n) Σ_i Σ_c p_c e^{T(c, h_i)}`.
pub fn mi_mine_population(logits: &Matrix, labels: &[usize], dist: &LabelDistribution) -> Result<f64> {
    check_logits(logits, labels)?;
    if labels.is_empty() {
        return Err(contract("MINE on an empty evaluation set"));
    }
    if dist.num_classes() != logits.cols() {
        return Err(shape("label distribution does not match logit width"));
    }
    let probs = dist.probabilities();
    let weight: f64 = probs.iter().sum();
    let m = logits
        .row_iter()
        .flat_map(|r| r.iter().zip(probs).filter(|(_, &p)| p > 0.0).map(|(&t, _)| t))
        .fold(f64::NEG_INFINITY, f64::max);
    let n = labels.len() as f64;
    let mut joint = 0.0;
    let mut marginal = 0.0;
    for (row, &y) in logits.row_iter().zip(labels) {
        joint += row[y] - m;
        let s: f64 = row
            .iter()
            .zip(probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&t, &p)| p * math::exp(t - m))
            .sum();
        marginal += s / weight;
    }
    Ok(joint / n - (math::ln(marginal) - math::ln(n)))
}

/// InfoNCE with the whole evaluation set as one batch. Because `s_ij`
/// depends on `j` only through `y_j`, the inner average collapses to
/// `Σ_c p_c e^{T(c, h_i)}`, which makes the computation `O(n·C)`.
pub fn mi_infonce_population(logits: &Matrix, labels: &[usize], dist: &LabelDistribution) -> Result<f64> {
    check_logits(logits, labels)?;
    if labels.is_empty() {
        return Err(contract("InfoNCE on an empty evaluation set"));
    }
    if dist.num_classes() != logits.cols() {
        return Err(shape("label distribution does not match logit width"));
    }
    let log_p: Vec<Option<f64>> = dist
        .probabilities()
        .iter()
        .map(|&p| (p > 0.0).then(|| math::ln(p)))
        .collect();
    let mut buf = Vec::with_capacity(logits.cols());
    let mut total = 0.0;
    for (row, &y) in logits.row_iter().zip(labels) {
        buf.clear();
        buf.extend(row.iter().zip(&log_p).filter_map(|(&t, lp)| lp.map(|lp| t + lp)));
        total += row[y] - log_sum_exp_unchecked(&buf);
    }
    Ok(total / labels.len() as f64)
}

/// Evaluates `objective` over a whole evaluation set. Accuracy, `ε` and
/// mean NLL always come from the softmax of the same logits.
pub fn estimate(
    objective: Objective,
    logits: &Matrix,
    labels: &[usize],
    dist: &LabelDistribution,
) -> Result<MIEstimate> {
    let mut est = mi_cross_entropy(logits, labels, dist)?;
    est.estimator = objective;
    est.value = match objective {
        Objective::CrossEntropy => est.value,
        Objective::Mine => mi_mine_population(logits, labels, dist)?,
        Objective::InfoNce => mi_infonce_population(logits, labels, dist)?,
    };
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use core::f64::consts::LN_2;

    #[test]
    fn entropy_examples() {
        let uniform = LabelDistribution::from_counts(&[5, 5]).unwrap();
        assert!((uniform.entropy() - LN_2).abs() < 1e-15);
        assert_eq!(LabelDistribution::from_counts(&[7]).unwrap().entropy(), 0.0);
        let skew = LabelDistribution::from_counts(&[3, 1]).unwrap();
        assert!((skew.entropy() - 0.562_335_144_618_808_4).abs() < 1e-15);
        // empty classes contribute nothing
        let with_zero = LabelDistribution::from_counts(&[3, 0, 1]).unwrap();
        assert_eq!(with_zero.entropy(), skew.entropy());
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        assert!(LabelDistribution::from_labels(&[0, 2], 2).is_err());
        assert!(LabelDistribution::from_counts(&[0, 0]).is_err());
    }

    #[test]
    fn ce_perfect_and_uninformative() {
        let dist = LabelDistribution::from_counts(&[2, 2]).unwrap();
        let y = [0, 1, 0, 1];
        let mut perfect = Matrix::zeros(4, 2);
        for (i, &c) in y.iter().enumerate() {
            perfect.set(i, c, 800.0);
        }
        let est = mi_cross_entropy(&perfect, &y, &dist).unwrap();
        assert_eq!(est.mean_nll, 0.0);
        assert_eq!(est.value, est.h_y);
        assert_eq!(est.accuracy, 1.0);

        let zero = mi_cross_entropy(&Matrix::zeros(4, 2), &y, &dist).unwrap();
        assert!((zero.mean_nll - LN_2).abs() < 1e-15);
        assert!(zero.value.abs() < 1e-15);
        assert_eq!(zero.eps_min_prob, 0.5);
    }

    #[test]
    fn eps_underflow_is_flagged() {
        let dist = LabelDistribution::from_counts(&[1, 1]).unwrap();
        let logits = Matrix::from_rows(&[[0.0, 1000.0], [0.0, 1.0]]).unwrap();
        let est = mi_cross_entropy(&logits, &[0, 1], &dist).unwrap();
        assert!(est.eps_underflow);
        assert_eq!(est.eps_min_prob, f64::from_bits(1));
        assert!(est.eps_min_prob > 0.0);
    }

    #[test]
    fn mine_constant_scores_give_zero() {
        assert!(mi_mine(&[3.0; 5], &[3.0; 7]).unwrap().abs() < 1e-15);
        assert_eq!(mi_mine(&[0.0; 4], &[0.0; 4]).unwrap(), 0.0);
        assert!(mi_mine(&[], &[1.0]).is_err());
        assert!(mi_mine(&[1.0], &[]).is_err());
    }

    #[test]
    fn infonce_examples() {
        let flat = Matrix::from_vec(3, 3, vec![1.7; 9]).unwrap();
        assert!(mi_infonce(&flat).unwrap().abs() < 1e-15);

        let mut s = Matrix::from_vec(4, 4, vec![-50.0; 16]).unwrap();
        for i in 0..4 {
            s.set(i, i, 50.0);
        }
        // 50 − log((e^50 + 3e^−50)/4) = log 4 to 40 digits
        assert!((mi_infonce(&s).unwrap() - 4f64.ln()).abs() < 1e-9);

        let single = Matrix::from_vec(1, 1, vec![12.3]).unwrap();
        assert_eq!(mi_infonce(&single).unwrap(), 0.0);
        assert!(mi_infonce(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let y = [2, 0, 1];
        let mut l = Matrix::zeros(3, 3);
        for (i, &c) in y.iter().enumerate() {
            l.set(i, c, 10.0);
        }
        assert_eq!(accuracy(&l, &y).unwrap(), 1.0);
        assert_eq!(accuracy(&Matrix::zeros(4, 2), &[0, 0, 0, 0]).unwrap(), 1.0);
        assert_eq!(accuracy(&Matrix::zeros(4, 2), &[0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn population_infonce_matches_full_matrix_route() {
        let mut rng = Rng::new(11);
        let n = 24;
        let c = 3;
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let mut logits = Matrix::zeros(n, c);
        logits.as_mut_slice().iter_mut().for_each(|v| *v = 3.0 * rng.normal());
        let dist = LabelDistribution::from_labels(&labels, c).unwrap();
        let via_matrix = mi_infonce(&label_score_matrix(&logits, &labels).unwrap()).unwrap();
        let via_counts = mi_infonce_population(&logits, &labels, &dist).unwrap();
        assert!((via_matrix - via_counts).abs() < 1e-12);
    }

    #[test]
    fn population_mine_matches_all_pairs() {
        let mut rng = Rng::new(5);
        let n = 15;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let mut logits = Matrix::zeros(n, 3);
        logits.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
        let dist = LabelDistribution::from_labels(&labels, 3).unwrap();
        let joint: Vec<f64> = (0..n).map(|i| logits.get(i, labels[i])).collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            for &y in &labels {
                pairs.push(logits.get(i, y));
            }
        }
        let brute = mi_mine(&joint, &pairs).unwrap();
        let fast = mi_mine_population(&logits, &labels, &dist).unwrap();
        assert!((brute - fast).abs() < 1e-12);
    }

    #[test]
    fn objective_parsing() {
        assert_eq!("ce".parse::<Objective>().unwrap(), Objective::CrossEntropy);
        assert_eq!("infonce".parse::<Objective>().unwrap(), Objective::InfoNce);
        assert!(matches!("nwj".parse::<Objective>(), Err(Error::Contract(_))));
    }
}
