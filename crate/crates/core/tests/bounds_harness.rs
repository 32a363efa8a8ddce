use std::f64::consts::LN_2;

use infoprobe_core::bounds::{check_theorem1, check_theorem2, construct_margin_probe, theorem2_bounds, Verdict};
use infoprobe_core::oracle::{generate_margin_dataset, MarginDatasetSpec};
use infoprobe_core::{LabelDistribution, Matrix, Rng};

#[test]
fn margin_grid_meets_bound() {
    for d in [0.5, 1.0, 2.0, 4.0] {
        for seed in 0..5 {
            let ds = generate_margin_dataset(&MarginDatasetSpec::random(200, 8, d, seed)).unwrap();
            let probe = construct_margin_probe(&ds.w, ds.b, ds.d).unwrap();
            let r = check_theorem1(&ds.features, &ds.labels, &probe).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "d {d} seed {seed}: {r:?}");
            assert!((r.bound - (-d).exp()).abs() < 1e-15);
            assert!(r.mi_estimate < LN_2);
        }
    }
}

#[test]
fn wide_spread_exposes_the_jensen_gap() {
    // points far from the band make E e^T much larger than e^{E T}
    let mut spec = MarginDatasetSpec::random(200, 8, 4.0, 1);
    spec.spread = 3.0;
    let ds = generate_margin_dataset(&spec).unwrap();
    let probe = construct_margin_probe(&ds.w, ds.b, ds.d).unwrap();
    let r = check_theorem1(&ds.features, &ds.labels, &probe).unwrap();
    assert!(r.jensen_gap > r.bound);
    assert_eq!(r.verdict, Verdict::Fail);
}

#[test]
fn scaling_the_separator_scales_the_margin() {
    let ds = generate_margin_dataset(&MarginDatasetSpec::random(100, 4, 1.0, 2)).unwrap();
    let probe = construct_margin_probe(&ds.w, ds.b, ds.d).unwrap();
    let a = check_theorem1(&ds.features, &ds.labels, &probe).unwrap();
    let b = check_theorem1(&ds.features, &ds.labels, &probe.scaled(2.0)).unwrap();
    assert_eq!(b.d, 2.0 * a.d);
    assert!((b.geometric_margin - a.geometric_margin).abs() < 1e-12);
    assert!(b.gap < a.gap);
}

#[test]
fn bracket_holds_on_random_logits() {
    let mut rng = Rng::new(5);
    for _ in 0..200 {
        let c = 2 + rng.below(8);
        let n = 30;
        let data = (0..n * c).map(|_| 3.0 * rng.normal()).collect();
        let logits = Matrix::from_vec(n, c, data).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let dist = LabelDistribution::from_labels(&labels, c).unwrap();
        let r = check_theorem2(&logits, &labels, &dist).unwrap();
        assert_ne!(r.verdict, Verdict::Fail, "{r:?}");
    }
}

#[test]
fn spec_bracket_values() {
    let (lo, hi) = theorem2_bounds(0.9, 1e-3, 10, 10f64.ln()).unwrap();
    assert!((lo + 0.460_517).abs() < 1e-6);
    assert!((hi - 2.233_270).abs() < 1e-6);
}
