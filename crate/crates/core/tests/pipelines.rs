use std::f64::consts::LN_2;

use infoprobe_core::oracle::{build_peak_pipeline, dpi_audit, sample_through_network, PipelineSpec};
use infoprobe_core::Matrix;

#[test]
fn hundred_random_chains_are_monotone() {
    for seed in 0..100 {
        let spec = PipelineSpec::random_chain(4, &[8, 6, 7, 5, 6, 4], 3, seed).unwrap();
        let audit = dpi_audit(&spec);
        assert!(audit.violations.is_empty(), "seed {seed}: {:?}", audit.mi);
        assert!(audit.mi.iter().all(|&v| v >= 0.0 && v <= audit.label_entropy + 1e-12));
    }
}

#[test]
fn peak_samples_follow_the_network() {
    let peak = build_peak_pipeline();
    let (layers, labels) = sample_through_network(&peak.spec, &peak.network, 200, 0.0, 5).unwrap();
    assert_eq!(layers.len(), 4);
    let dims: Vec<usize> = layers.iter().map(Matrix::cols).collect();
    assert_eq!(dims, peak.network.dims());
    // noiseless stage 0 rows are corners of the right class
    for (row, &y) in layers[0].row_iter().zip(&labels) {
        let product = row[0] * row[1];
        assert_eq!(if y == 0 { 1.0 } else { -1.0 }, product);
    }
    // the final stage carries the sign of x1 only
    for (x, h) in layers[0].row_iter().zip(layers[3].row_iter()) {
        assert_eq!(x[0] > 0.0, h[0] > 0.0);
    }
}

#[test]
fn peak_exact_curve() {
    let audit = dpi_audit(&build_peak_pipeline().spec);
    assert!((audit.mi[0] - LN_2).abs() < 1e-12);
    assert!(audit.mi.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(audit.mi[3] <= 0.1);
}

#[test]
fn lossy_input_is_flagged() {
    let spec = PipelineSpec::new(
        vec![0.5, 0.5],
        Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap(),
        vec![Matrix::identity(2)],
        vec![Matrix::identity(2), Matrix::identity(2)],
        0,
    )
    .unwrap();
    let audit = dpi_audit(&spec);
    assert!(!audit.input_retains_label);
    assert!((audit.mi[0] - 0.368_064_207_168_497).abs() < 1e-9);
}
