use std::sync::Arc;

use infoprobe_core::bounds::Verdict;
use infoprobe_core::oracle::{build_peak_pipeline, sample_through_network};
use infoprobe_core::probes::build_toy_network;
use infoprobe_core::trainer::{stratified_split, train_probe, train_probe_with_splits, SplitFractions, TrainConfig};
use infoprobe_core::{AdamConfig, Matrix, Objective, ProbeKind, ProbeSpec, Rng};

fn fast() -> TrainConfig {
    TrainConfig {
        adam: AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn noise_features_give_near_zero_mi() {
    let mut rng = Rng::new(1);
    let n = 2000;
    let x = Matrix::from_vec(n, 5, (0..n * 5).map(|_| rng.normal()).collect()).unwrap();
    let y: Vec<usize> = (0..n).map(|_| rng.below(2)).collect();
    for o in Objective::ALL {
        let cfg = TrainConfig { objective: o, ..fast() };
        let out = train_probe(&x, &y, ProbeSpec::linear(5, 2, 3), &cfg, None).unwrap();
        assert!(out.test.value <= 0.05, "{o:?}: {}", out.test.value);
    }
}

#[test]
fn every_objective_learns_separable_stage() {
    let peak = build_peak_pipeline();
    let (layers, labels) = sample_through_network(&peak.spec, &peak.network, 1000, 0.05, 2).unwrap();
    for o in Objective::ALL {
        let cfg = TrainConfig { objective: o, ..fast() };
        let out = train_probe(&layers[2], &labels, ProbeSpec::linear(4, 2, 0), &cfg, None).unwrap();
        assert!(out.test.value > 0.5, "{o:?}: {:?}", out.test);
        assert!(out.test.accuracy > 0.95);
    }
}

#[test]
fn suffix_training_leaves_base_untouched() {
    let net = Arc::new(build_toy_network(&[3, 5, 4, 2], 7).unwrap());
    let snapshot = (*net).clone();
    let mut rng = Rng::new(0);
    let x = Matrix::from_vec(300, 3, (0..900).map(|_| rng.normal()).collect()).unwrap();
    let h1 = net.forward_prefix(&x, 1).unwrap();
    let y: Vec<usize> = x.row_iter().map(|r| usize::from(r[0] > 0.0)).collect();
    let spec = ProbeSpec::suffix(&net, 1, 2, 0);
    let out = train_probe(&h1, &y, spec, &fast(), Some(net.clone())).unwrap();
    assert_eq!(*net, snapshot);
    assert!(out.test.accuracy > 0.8);
}

#[test]
fn log_records_bracket_at_every_evaluation() {
    let mut rng = Rng::new(4);
    let n = 600;
    let x = Matrix::from_vec(n, 3, (0..n * 3).map(|_| rng.normal()).collect()).unwrap();
    let y: Vec<usize> = x
        .row_iter()
        .map(|r| usize::from(r[0] + 0.5 * rng.normal() > 0.0))
        .collect();
    let splits = stratified_split(&y, 2, SplitFractions::default(), 0).unwrap();
    let out = train_probe_with_splits(&x, &y, &splits, ProbeSpec::linear(3, 2, 0), &fast(), None).unwrap();
    assert!(!out.log.is_empty());
    let best = out.log.iter().map(|r| r.val_mi).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best.val_mi, best);
    for r in &out.log {
        assert_ne!(r.bracket.verdict, Verdict::Fail);
        assert!(r.step > 0);
    }
    assert!(out.log.len() <= fast().max_epochs);
}

#[test]
fn empty_validation_split_is_rejected() {
    let x = Matrix::zeros(10, 2);
    let y = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
    let splits = infoprobe_core::trainer::Splits {
        train: (0..8).collect(),
        valid: vec![],
        test: vec![8, 9],
    };
    assert!(train_probe_with_splits(&x, &y, &splits, ProbeSpec::linear(2, 2, 0), &fast(), None).is_err());
    let empty = Matrix::zeros(0, 2);
    assert!(train_probe(&empty, &[], ProbeSpec::linear(2, 2, 0), &fast(), None).is_err());
}

#[test]
fn mlp_matches_linear_capacity_on_separable_data() {
    let peak = build_peak_pipeline();
    let (layers, labels) = sample_through_network(&peak.spec, &peak.network, 800, 0.05, 9).unwrap();
    let mut spec = ProbeSpec::for_layer(ProbeKind::Mlp, 0, 2, 2, 1);
    spec.mlp_hidden = 64;
    let out = train_probe(&layers[0], &labels, spec, &fast(), None).unwrap();
    // XOR is not linearly separable, but one hidden layer solves it
    assert!(out.test.accuracy > 0.95, "{:?}", out.test);
}
