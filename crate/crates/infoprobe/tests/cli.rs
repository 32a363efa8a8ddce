use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use infoprobe::dataio;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infoprobe"))
        .args(args)
        .env("INFOPROBE_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_peak(dir: &Path, samples: &str) -> PathBuf {
    let data = dir.join("data");
    ok(&["synth", "--out", p(&data), "--samples", samples, "--seed", "3"]);
    data
}

#[test]
fn synth_peak_writes_every_layer() {
    let tmp = TempDir::new().unwrap();
    let data = synth_peak(tmp.path(), "400");
    for i in 0..4 {
        let ds = dataio::load_dataset(&data.join(format!("layer_{i}.json"))).unwrap();
        assert_eq!(ds.features.rows(), 400);
        assert!(ds.network.is_some());
    }
    let csv = fs::read_to_string(data.join("exact_mi.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(data.join("resolved_config.toml").exists());
    assert!(data.join("dpi_audit.json").exists());
}

#[test]
fn identity_chain_keeps_label_entropy() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("chain.toml");
    fs::write(
        &cfg,
        r#"seed = 1
samples = 300

[pipeline]
label_probs = [0.25, 0.25, 0.5]
emission = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]

[[pipeline.layers]]
channel = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]

[[pipeline.layers]]
channel = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    ok(&["synth", "--config", p(&cfg), "--out", p(&out)]);
    let csv = fs::read_to_string(out.join("exact_mi.csv")).unwrap();
    let h = 1.5 * std::f64::consts::LN_2;
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
    for v in values {
        assert!((v - h).abs() < 1e-12, "{v} vs {h}");
    }
}

#[test]
fn missing_channel_names_the_layer() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        r#"seed = 1
samples = 100

[pipeline]
label_probs = [0.5, 0.5]
emission = [[1, 0], [0, 1]]

[[pipeline.layers]]
channel = [[1, 0], [0, 1]]

[[pipeline.layers]]
embedding = [[1, 0], [0, 1]]
"#,
    )
    .unwrap();
    let out = run(&["synth", "--config", p(&cfg), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("pipeline.layers[1].channel"), "{err}");
    assert!(err.contains("layer 2"), "{err}");
}

#[test]
fn sweep_reports_every_job_and_one_ceiling() {
    let tmp = TempDir::new().unwrap();
    let data = synth_peak(tmp.path(), "300");
    let out = tmp.path().join("sweep");
    ok(&[
        "sweep",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--probes",
        "linear,suffix",
        "--epochs",
        "3",
        "--jobs",
        "2",
    ]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    for stem in ["mi_nats", "mi_over_hy", "accuracy"] {
        let svg = fs::read_to_string(out.join(format!("{stem}.svg"))).unwrap();
        assert_eq!(svg.matches("class=\"ceiling\"").count(), 1, "{stem}");
        assert_eq!(svg.matches("class=\"series\"").count(), 2, "{stem}");
    }
    let log = fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    assert!(log.lines().count() >= 8);
}

#[test]
fn saved_probes_round_trip() {
    let tmp = TempDir::new().unwrap();
    let data = synth_peak(tmp.path(), "200");
    let out = tmp.path().join("sweep");
    ok(&[
        "sweep",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--epochs",
        "2",
        "--save-probes",
    ]);
    let state = dataio::load_checkpoint(&out.join("probes"), "layer0_linear_cross_entropy", None).unwrap();
    assert_eq!(state.params.len(), 2);
}

fn rerun_matches(dir: &Path, first: &[&str], sub: &[&str], files: &[&str]) {
    let a = dir.join("a");
    let b = dir.join("b");
    let mut args: Vec<&str> = first.to_vec();
    args.extend(["--out", p(&a)]);
    ok(&args);
    let cfg = a.join("resolved_config.toml");
    let mut again: Vec<&str> = sub.to_vec();
    again.extend(["--config", p(&cfg), "--out", p(&b)]);
    ok(&again);
    for f in files {
        let x = fs::read(a.join(f)).unwrap();
        let y = fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs after re-run");
    }
    assert_eq!(
        fs::read_to_string(&cfg).unwrap(),
        fs::read_to_string(b.join("resolved_config.toml")).unwrap()
    );
}

#[test]
fn every_command_reruns_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let data = synth_peak(root, "300");

    let synth = root.join("synth");
    rerun_matches(
        &synth,
        &["synth", "--samples", "200", "--seed", "8"],
        &["synth"],
        &["exact_mi.csv", "dpi_audit.json", "layer_0.json", "layer_3.json"],
    );

    rerun_matches(
        &root.join("sweep"),
        &[
            "sweep",
            "--data",
            p(&data),
            "--epochs",
            "3",
            "--jobs",
            "3",
            "--probes",
            "linear,mlp",
            "--estimator",
            "ce,mine",
        ],
        &["sweep"],
        &["sweep.csv", "sweep.json", "train_log.jsonl", "mi_nats.svg"],
    );

    rerun_matches(
        &root.join("t1"),
        &[
            "bounds",
            "theorem1",
            "--d",
            "2",
            "--n-per-class",
            "50",
            "--dim",
            "4",
            "--seed",
            "2",
        ],
        &["bounds", "theorem1"],
        &["bounds.json"],
    );

    rerun_matches(
        &root.join("t2"),
        &[
            "bounds",
            "theorem2",
            "--accuracy",
            "0.9",
            "--eps",
            "0.001",
            "--classes",
            "10",
            "--h-y",
            "2.302585092994046",
            "--mi",
            "1.0",
        ],
        &["bounds", "theorem2"],
        &["bounds.json"],
    );

    let manifest = data.join("layer_2.json");
    rerun_matches(
        &root.join("filter"),
        &["filter", "--manifest", p(&manifest), "--n-min", "10"],
        &["filter"],
        &["manifest.json", "filter.json", "features.pfv", "labels.plb"],
    );
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let data = synth_peak(root, "200");
    let o = |name: &str| root.join(name);

    // usage
    assert_eq!(code(&run(&["sweep", "--out", p(&o("u"))])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    // config contract
    assert_eq!(
        code(&run(&[
            "sweep",
            "--data",
            p(&data),
            "--mlp-hidden",
            "0",
            "--out",
            p(&o("c"))
        ])),
        2
    );
    // missing file
    let missing = root.join("nope.json");
    assert_eq!(code(&run(&["inspect", p(&missing)])), 1);
    // corrupted payload
    let feats = data.join("layer_1.pfv");
    let mut bytes = fs::read(&feats).unwrap();
    bytes[40] ^= 0x5a;
    fs::write(&feats, bytes).unwrap();
    let corrupt = run(&["inspect", p(&data.join("layer_1.json"))]);
    assert_eq!(code(&corrupt), 3);
    assert!(String::from_utf8_lossy(&corrupt.stderr).contains("layer_1.pfv"));
    // bound violation
    let viol = run(&[
        "bounds",
        "theorem2",
        "--accuracy",
        "0.9",
        "--eps",
        "0.001",
        "--classes",
        "10",
        "--h-y",
        "2.302585092994046",
        "--mi",
        "5",
        "--out",
        p(&o("v")),
    ]);
    assert_eq!(code(&viol), 5);
    // filter that empties the dataset
    let empty = run(&[
        "filter",
        "--manifest",
        p(&data.join("layer_0.json")),
        "--n-min",
        "100000",
        "--out",
        p(&o("e")),
    ]);
    assert_eq!(code(&empty), 2);
}

#[test]
fn theorem1_rejects_unbalanced_data() {
    let tmp = TempDir::new().unwrap();
    let x = infoprobe_core::Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0]]).unwrap();
    let feats = tmp.path().join("x.pfv");
    let labels = tmp.path().join("y.plb");
    dataio::write_features(&feats, &x).unwrap();
    dataio::write_labels(&labels, &dataio::LabelSet::new(vec![0, 0, 1], 2).unwrap()).unwrap();
    let out = run(&[
        "bounds",
        "theorem1",
        "--features",
        p(&feats),
        "--labels",
        p(&labels),
        "--w",
        "1,0",
        "--b",
        "0",
        "--d",
        "1",
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("balanced binary task"));
}

#[test]
fn theorem2_checks_a_stored_log() {
    let tmp = TempDir::new().unwrap();
    let data = synth_peak(tmp.path(), "300");
    let sweep = tmp.path().join("sweep");
    ok(&["sweep", "--data", p(&data), "--epochs", "4", "--out", p(&sweep)]);
    let out = tmp.path().join("t2");
    ok(&[
        "bounds",
        "theorem2",
        "--log",
        p(&sweep.join("train_log.jsonl")),
        "--out",
        p(&out),
    ]);
    let reports: serde_json::Value = serde_json::from_slice(&fs::read(out.join("bounds.json")).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    let lines = fs::read_to_string(sweep.join("train_log.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(reports.len(), lines);
    assert!(reports.iter().all(|r| r["verdict"] != "fail"));
}

fn filtered_entropy(root: &Path, manifest: &Path, n_min: usize) -> f64 {
    let out = root.join(format!("f{n_min}"));
    ok(&[
        "filter",
        "--manifest",
        p(manifest),
        "--n-min",
        &n_min.to_string(),
        "--out",
        p(&out),
    ]);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("filter.json")).unwrap()).unwrap();
    let ds = dataio::load_dataset(&out.join("manifest.json")).unwrap();
    assert_eq!(ds.features.rows(), summary["rows_out"].as_u64().unwrap() as usize);
    summary["h_y"].as_f64().unwrap()
}

#[test]
fn stricter_filters_lower_label_entropy() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    // skewed 6-class chain with a long tail
    let cfg = root.join("skew.toml");
    fs::write(
        &cfg,
        r#"seed = 4
samples = 3000

[pipeline]
label_probs = [0.5, 0.3, 0.12, 0.05, 0.02, 0.01]
emission = [[1,0,0,0,0,0],[0,1,0,0,0,0],[0,0,1,0,0,0],[0,0,0,1,0,0],[0,0,0,0,1,0],[0,0,0,0,0,1]]

[[pipeline.layers]]
channel = [[1,0,0,0,0,0],[0,1,0,0,0,0],[0,0,1,0,0,0],[0,0,0,1,0,0],[0,0,0,0,1,0],[0,0,0,0,0,1]]
"#,
    )
    .unwrap();
    let data = root.join("data");
    ok(&["synth", "--config", p(&cfg), "--out", p(&data)]);
    let manifest = data.join("layer_1.json");
    let h: Vec<f64> = [20, 200, 1000]
        .iter()
        .map(|&n| filtered_entropy(root, &manifest, n))
        .collect();
    assert!(h[0] > h[1] && h[1] > h[2], "{h:?}");
}

#[test]
fn inspect_counts_rows_and_classes() {
    let tmp = TempDir::new().unwrap();
    let data = synth_peak(tmp.path(), "250");
    let out = ok(&["inspect", p(&data.join("layer_0.json")), p(&data.join("layer_3.json"))]);
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().filter(|l| l.contains("synthetic-peak")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|l| l.contains("250")));
}

#[test]
fn mismatched_splits_are_a_contract_error() {
    let tmp = TempDir::new().unwrap();
    let a = synth_peak(tmp.path(), "200");
    let b = tmp.path().join("other");
    ok(&["synth", "--out", p(&b), "--samples", "200", "--seed", "4"]);
    let out = run(&[
        "sweep",
        p(&a.join("layer_0.json")),
        p(&b.join("layer_1.json")),
        "--out",
        p(&tmp.path().join("s")),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}
