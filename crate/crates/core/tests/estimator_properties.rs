use infoprobe_core::estimators::{estimate, mi_cross_entropy, mi_infonce, mi_mine, mi_mine_population};
use infoprobe_core::oracle::{exact_mi, JointDistribution};
use infoprobe_core::{LabelDistribution, Matrix, Objective, Rng};
use proptest::prelude::*;

fn random_logits(rng: &mut Rng, n: usize, c: usize, scale: f64) -> Matrix {
    let data = (0..n * c).map(|_| scale * rng.normal()).collect();
    Matrix::from_vec(n, c, data).unwrap()
}

/// Features drawn from a small alphabet so the empirical joint of
/// (symbol, label) is enumerable.
fn symbolic_dataset(rng: &mut Rng, n: usize, symbols: usize, c: usize) -> (Vec<usize>, Vec<usize>) {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.below(symbols);
        let y = if rng.uniform() < 0.7 { x % c } else { rng.below(c) };
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}

#[test]
fn population_estimates_never_exceed_empirical_mi() {
    let mut rng = Rng::new(17);
    for _ in 0..50 {
        let (symbols, c) = (2 + rng.below(6), 2 + rng.below(3));
        let (xs, ys) = symbolic_dataset(&mut rng, 300, symbols, c);
        let joint = JointDistribution::from_pairs(&xs, &ys, symbols, c).unwrap();
        let truth = exact_mi(&joint);
        // probe = arbitrary per-symbol score table
        let table = random_logits(&mut rng, symbols, c, 3.0);
        let logits = table.select_rows(&xs);
        let dist = LabelDistribution::from_labels(&ys, c).unwrap();
        let ce = mi_cross_entropy(&logits, &ys, &dist).unwrap().value;
        let mine = mi_mine_population(&logits, &ys, &dist).unwrap();
        assert!(ce <= truth + 1e-9, "ce {ce} > {truth}");
        assert!(mine <= truth + 1e-9, "mine {mine} > {truth}");
    }
}

#[test]
fn log_posterior_probe_attains_empirical_mi() {
    let mut rng = Rng::new(3);
    let (symbols, c) = (5, 3);
    let (xs, ys) = symbolic_dataset(&mut rng, 500, symbols, c);
    let joint = JointDistribution::from_pairs(&xs, &ys, symbols, c).unwrap();
    let truth = exact_mi(&joint);
    let px = joint.first_marginal();
    let mut table = Matrix::zeros(symbols, c);
    for (s, &ps) in px.iter().enumerate() {
        for y in 0..c {
            let p = joint.table().get(s, y) / ps;
            table.set(s, y, if p > 0.0 { p.ln() } else { -50.0 });
        }
    }
    let logits = table.select_rows(&xs);
    let dist = LabelDistribution::from_labels(&ys, c).unwrap();
    let ce = mi_cross_entropy(&logits, &ys, &dist).unwrap().value;
    assert!((ce - truth).abs() < 1e-9, "{ce} vs {truth}");
}

#[test]
fn mine_on_constant_scores_is_zero() {
    let zeros = vec![0.0; 64];
    assert_eq!(mi_mine(&zeros, &zeros).unwrap(), 0.0);
    let logits = Matrix::zeros(10, 3);
    let labels: Vec<usize> = (0..10).map(|i| i % 3).collect();
    let dist = LabelDistribution::from_labels(&labels, 3).unwrap();
    assert_eq!(mi_mine_population(&logits, &labels, &dist).unwrap(), 0.0);
}

#[test]
fn estimate_reports_shared_diagnostics() {
    let mut rng = Rng::new(9);
    let logits = random_logits(&mut rng, 40, 4, 2.0);
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let dist = LabelDistribution::from_labels(&labels, 4).unwrap();
    let ce = estimate(Objective::CrossEntropy, &logits, &labels, &dist).unwrap();
    for o in [Objective::Mine, Objective::InfoNce] {
        let e = estimate(o, &logits, &labels, &dist).unwrap();
        assert_eq!(e.estimator, o);
        assert_eq!(
            (e.accuracy, e.eps_min_prob, e.h_y),
            (ce.accuracy, ce.eps_min_prob, ce.h_y)
        );
    }
}

proptest! {
    #[test]
    fn cross_entropy_identity(seed in any::<u64>(), n in 1usize..50, c in 2usize..8) {
        let mut rng = Rng::new(seed);
        let logits = random_logits(&mut rng, n, c, 5.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let counts: Vec<usize> = (0..c).map(|_| 1 + rng.below(10)).collect();
        let dist = LabelDistribution::from_counts(&counts).unwrap();
        let e = mi_cross_entropy(&logits, &labels, &dist).unwrap();
        prop_assert!((e.value + e.mean_nll - dist.entropy()).abs() < 1e-12);
        prop_assert!(e.value <= dist.entropy());
    }

    #[test]
    fn infonce_below_log_batch(seed in any::<u64>(), b in 1usize..40, scale in 0.1f64..100.0) {
        let mut rng = Rng::new(seed);
        let s = random_logits(&mut rng, b, b, scale);
        prop_assert!(mi_infonce(&s).unwrap() <= (b as f64).ln());
    }

    #[test]
    fn row_shift_leaves_cross_entropy_unchanged(seed in any::<u64>(), shift in -100.0f64..100.0) {
        let mut rng = Rng::new(seed);
        let logits = random_logits(&mut rng, 20, 4, 3.0);
        let labels: Vec<usize> = (0..20).map(|_| rng.below(4)).collect();
        let dist = LabelDistribution::from_labels(&labels, 4).unwrap_or_else(|_| LabelDistribution::from_counts(&[1, 1, 1, 1]).unwrap());
        let shifted = logits.map(|v| v + shift);
        let a = mi_cross_entropy(&logits, &labels, &dist).unwrap().value;
        let b = mi_cross_entropy(&shifted, &labels, &dist).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12);
    }
}
