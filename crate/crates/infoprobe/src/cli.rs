//! Command-line front end.
//!
//! ```text
//! infoprobe synth  --config pipeline.toml --out data/
//! infoprobe sweep  --data data/ --probes linear,suffix --out runs/peak
//! infoprobe bounds theorem1 --d 2 --out runs/t1
//! infoprobe bounds theorem2 --log runs/peak/train_log.jsonl --out runs/t2
//! infoprobe filter --manifest data/layer_0.json --n-min 200 --out filtered/
//! ```
//!
//! Every command writes `resolved_config.toml` into its output directory;
//! passing that file back through `--config` repeats the run and
//! reproduces its CSV and JSON outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use infoprobe_core::bounds::{
    bracket_verdict, check_theorem1, construct_margin_probe, theorem2_bounds, BoundsReport, Theorem2Report, Verdict,
};
use infoprobe_core::oracle::{dpi_audit, generate_margin_dataset, sample_through_network, MarginDatasetSpec};
use infoprobe_core::trainer::{stratified_split, SplitFractions};
use infoprobe_core::{LabelDistribution, Objective, ProbeKind};
use serde::Serialize;

use crate::config::{self, BoundsConfig, FilterConfig, Pipeline, SweepConfig, SynthConfig, RESOLVED_CONFIG};
use crate::dataio::{self, DatasetManifest, LabelSet, MANIFEST_VERSION};
use crate::error::{CliError, Result};
use crate::report;
use crate::sweep::{run_sweep, LogLine, SweepData};

#[derive(Debug, Parser)]
#[command(
    name = "infoprobe",
    version,
    about = "Mutual-information probing of layer representations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic pipeline into per-layer feature files.
    Synth(SynthArgs),
    /// Train probes on every layer and report MI estimates.
    Sweep(SweepArgs),
    /// Check an estimator bound.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Drop classes with fewer than N rows.
    Filter(FilterArgs),
    /// Validate layer manifests and print their row and class counts.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of rows to sample.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Noise std-dev added to stage-0 embeddings.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Built-in pipeline to use when no config is given.
    #[arg(long, value_parser = ["peak"])]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Layer manifests.
    pub manifests: Vec<PathBuf>,
    /// Directory whose `layer_*.json` manifests are all swept.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Comma-separated probe kinds: linear, mlp, suffix.
    #[arg(long, value_delimiter = ',')]
    pub probes: Option<Vec<ProbeKind>>,
    /// Comma-separated estimators: ce, mine, infonce.
    #[arg(long, value_delimiter = ',')]
    pub estimator: Option<Vec<Objective>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub mlp_hidden: Option<usize>,
    /// Write the best checkpoint of every job under `probes/`.
    #[arg(long)]
    pub save_probes: bool,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCommand {
    /// Margin bound `|ln 2 − Î| < e^{−d}` for a constructed probe.
    Theorem1(Theorem1Args),
    /// Accuracy/ε bracket for the cross-entropy estimate.
    Theorem2(Theorem2Args),
}

#[derive(Debug, Args)]
pub struct Theorem1Args {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub n_per_class: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub spread: Option<f64>,
    /// Stored features (with --labels, --w and --b) instead of a generated set.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub w: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Theorem2Args {
    #[command(flatten)]
    pub common: Common,
    /// `train_log.jsonl` written by `sweep`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub accuracy: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub h_y: Option<f64>,
    /// Estimate to test against the bracket.
    #[arg(long, allow_hyphen_values = true)]
    pub mi: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub n_min: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Layer manifests to validate.
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
}

/// Sets up logging from `INFOPROBE_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::default().filter_or("INFOPROBE_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(BoundsCommand::Theorem1(a)) => cmd_theorem1(a),
        Command::Bounds(BoundsCommand::Theorem2(a)) => cmd_theorem2(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise to JSON");
    s.push('\n');
    s
}

fn write_resolved<T: Serialize>(out: &Path, cfg: &T) -> Result<()> {
    write(&out.join(RESOLVED_CONFIG), config::to_toml(cfg))
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

pub fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.samples {
        cfg.samples = n;
    }
    if a.noise.is_some() {
        cfg.noise = a.noise;
    }
    if let Some(p) = a.preset {
        cfg.pipeline = toml::Table::new();
        cfg.pipeline.insert("preset".into(), toml::Value::String(p));
    }
    let out = &a.common.out;
    prepare_out(out)?;
    write_resolved(out, &cfg)?;

    let pipeline = config::parse_pipeline(&cfg.pipeline, cfg.seed)?;
    let spec = pipeline.spec();
    let noise = cfg.noise.unwrap_or_else(|| spec.default_noise_sigma());
    let (layers, labels) = match &pipeline {
        Pipeline::Peak(p) => sample_through_network(&p.spec, &p.network, cfg.samples, noise, cfg.seed)?,
        Pipeline::Chain(s) => {
            let chain = s.sample_chain(cfg.samples, noise, cfg.seed)?;
            (chain.features, chain.labels)
        }
    };
    let num_classes = spec.num_classes();
    let splits = stratified_split(&labels, num_classes, SplitFractions::default(), cfg.seed)?;
    dataio::write_labels(&out.join("labels.plb"), &LabelSet::new(labels, num_classes)?)?;
    let network = match &pipeline {
        Pipeline::Peak(p) => {
            dataio::write_network(&out.join("network.json"), &p.network)?;
            Some("network.json".to_string())
        }
        Pipeline::Chain(_) => None,
    };
    for (i, m) in layers.iter().enumerate() {
        let features = format!("layer_{i}.pfv");
        dataio::write_features(&out.join(&features), m)?;
        let manifest = DatasetManifest {
            format_version: MANIFEST_VERSION,
            model: format!("synthetic-{}", pipeline.name()),
            layer: i,
            task: cfg.task.clone(),
            class_names: (0..num_classes).map(|c| format!("class_{c}")).collect(),
            features,
            labels: "labels.plb".into(),
            rows: m.rows(),
            cols: m.cols(),
            splits: splits.clone(),
            notes: vec![format!("seed {}, noise {noise}", cfg.seed)],
            relabel: None,
            network: network.clone(),
            pooling: None,
            row_checksums: None,
        };
        dataio::write_manifest(&out.join(format!("layer_{i}.json")), &manifest)?;
    }
    let audit = dpi_audit(spec);
    write(&out.join("exact_mi.csv"), report::exact_mi_csv(&audit))?;
    write(&out.join("dpi_audit.json"), json(&audit))?;

    let rows: Vec<Vec<String>> = audit
        .mi
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), format!("{v:.6}"), layers[i].cols().to_string()])
        .collect();
    print!("{}", report::table(&["layer", "exact_mi", "dim"], &rows));
    println!("H(Y) = {:.6} nats; monotone: {}", audit.label_entropy, audit.monotone);
    if !audit.input_retains_label {
        log::warn!("I(Y;X) < H(Y): fractions of H(Y) understate what the input can reveal");
    }
    Ok(())
}

fn manifests_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("layer_") && name.ends_with(".json")
        })
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(CliError::Usage(format!(
            "no layer_*.json manifests in {}",
            dir.display()
        )));
    }
    Ok(found)
}

pub fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let mut cfg: SweepConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => SweepConfig::default(),
    };
    let mut manifests = a.manifests.clone();
    if let Some(dir) = &a.data {
        manifests.extend(manifests_in(dir)?);
    }
    if !manifests.is_empty() {
        cfg.manifests = manifests.iter().map(|p| absolute(p)).collect();
    }
    if let Some(s) = a.common.seed {
        cfg.train.seed = s;
    }
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if let Some(p) = a.probes {
        cfg.probes = p;
    }
    if let Some(e) = a.estimator {
        cfg.estimators = e;
    }
    if let Some(e) = a.epochs {
        cfg.train.max_epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.adam.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(h) = a.mlp_hidden {
        cfg.mlp_hidden = h;
    }
    cfg.save_checkpoints |= a.save_probes;
    cfg.validate()?;
    let out = &a.common.out;
    prepare_out(out)?;
    write_resolved(out, &cfg)?;

    let datasets = cfg
        .manifests
        .iter()
        .map(|p| dataio::load_dataset(p))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let data = SweepData::assemble(datasets)?;
    let result = run_sweep(&data, &cfg)?;

    write(&out.join("sweep.csv"), report::sweep_csv(&result.report))?;
    write(&out.join("sweep.json"), json(&result.report))?;
    let mut log = String::new();
    for line in &result.log {
        log.push_str(&serde_json::to_string(line).expect("log lines serialise"));
        log.push('\n');
    }
    write(&out.join("train_log.jsonl"), log)?;
    for m in report::Metric::ALL {
        write(
            &out.join(format!("{}.svg", m.file_stem())),
            report::sweep_svg(&result.report, m),
        )?;
    }
    if cfg.save_checkpoints {
        let dir = out.join("probes");
        prepare_out(&dir)?;
        for (job, state) in &result.states {
            let stem = format!("layer{}_{}_{}", job.layer, job.probe.as_str(), job.objective.as_str());
            dataio::save_checkpoint(&dir, &stem, state)?;
        }
    }
    print!("{}", report::sweep_table(&result.report));
    println!("H(Y) of the test split = {:.6} nats", result.report.h_y);
    Ok(())
}

fn finish_bounds(out: &Path, reports: &[BoundsReport]) -> Result<()> {
    write(&out.join("bounds.json"), json(&reports))?;
    let fails = reports.iter().filter(|r| r.verdict() == Verdict::Fail).count();
    let ties = reports.iter().filter(|r| r.verdict() == Verdict::Tie).count();
    if ties > 0 {
        log::warn!("{ties} checks tie a bound within 1e-12; not counted as violations");
        eprintln!("warning: {ties} check(s) tie a bound within 1e-12");
    }
    if fails > 0 {
        return Err(CliError::BoundViolation(format!(
            "{fails} of {} checks failed",
            reports.len()
        )));
    }
    Ok(())
}

pub fn cmd_theorem1(a: Theorem1Args) -> Result<()> {
    let mut cfg = match &a.common.config {
        Some(p) => config::load(p)?,
        None => BoundsConfig::Theorem1 {
            d: 2.0,
            n_per_class: 200,
            dim: 8,
            seed: 0,
            spread: None,
            features: None,
            labels: None,
            w: None,
            b: None,
        },
    };
    let BoundsConfig::Theorem1 {
        d,
        n_per_class,
        dim,
        seed,
        spread,
        features,
        labels,
        w,
        b,
    } = &mut cfg
    else {
        return Err(CliError::Usage(
            "config describes a different bound than `theorem1`".into(),
        ));
    };
    if let Some(v) = a.d {
        *d = v;
    }
    if let Some(v) = a.n_per_class {
        *n_per_class = v;
    }
    if let Some(v) = a.dim {
        *dim = v;
    }
    if let Some(v) = a.common.seed {
        *seed = v;
    }
    if a.spread.is_some() {
        *spread = a.spread;
    }
    if a.features.is_some() {
        *features = a.features.as_deref().map(absolute);
    }
    if a.labels.is_some() {
        *labels = a.labels.as_deref().map(absolute);
    }
    if a.w.is_some() {
        *w = a.w.clone();
    }
    if a.b.is_some() {
        *b = a.b;
    }
    let out = &a.common.out;
    prepare_out(out)?;
    write_resolved(out, &cfg)?;
    let BoundsConfig::Theorem1 {
        d,
        n_per_class,
        dim,
        seed,
        spread,
        features,
        labels,
        w,
        b,
    } = cfg
    else {
        unreachable!()
    };

    let (x, y, probe) = match (features, labels) {
        (Some(f), Some(l)) => {
            let (Some(w), Some(b)) = (w, b) else {
                return Err(CliError::Usage(
                    "stored data needs an explicit separator: --w and --b".into(),
                ));
            };
            let x = dataio::read_features(&f)?;
            let y = dataio::read_labels(&l)?;
            (x, y.labels, construct_margin_probe(&w, b, d)?)
        }
        (None, None) => {
            let mut spec = MarginDatasetSpec::random(n_per_class, dim, d, seed);
            if let Some(s) = spread {
                spec.spread = s;
            }
            if let Some(w) = w {
                spec.dim = w.len();
                spec.w = w;
            }
            if let Some(b) = b {
                spec.b = b;
            }
            let ds = generate_margin_dataset(&spec)?;
            let probe = construct_margin_probe(&ds.w, ds.b, ds.d)?;
            (ds.features, ds.labels, probe)
        }
        _ => return Err(CliError::Usage("--features and --labels go together".into())),
    };
    let r = check_theorem1(&x, &y, &probe)?;
    let rows = vec![vec![
        format!("{}", r.d),
        format!("{:.6}", r.mi_estimate),
        format!("{:.6}", r.gap),
        format!("{:.6}", r.bound),
        format!("{:.2e}", r.jensen_gap),
        r.verdict.as_str().to_string(),
    ]];
    print!(
        "{}",
        report::table(&["d", "mi_estimate", "gap", "e^-d", "jensen_gap", "verdict"], &rows)
    );
    finish_bounds(out, &[BoundsReport::Theorem1(r)])
}

pub fn cmd_theorem2(a: Theorem2Args) -> Result<()> {
    let mut cfg = match &a.common.config {
        Some(p) => config::load(p)?,
        None => BoundsConfig::Theorem2 {
            log: None,
            accuracy: None,
            eps: None,
            classes: None,
            h_y: None,
            mi: None,
        },
    };
    let BoundsConfig::Theorem2 {
        log,
        accuracy,
        eps,
        classes,
        h_y,
        mi,
    } = &mut cfg
    else {
        return Err(CliError::Usage(
            "config describes a different bound than `theorem2`".into(),
        ));
    };
    if a.log.is_some() {
        *log = a.log.as_deref().map(absolute);
    }
    for (dst, src) in [
        (&mut *accuracy, a.accuracy),
        (&mut *eps, a.eps),
        (&mut *h_y, a.h_y),
        (&mut *mi, a.mi),
    ] {
        if src.is_some() {
            *dst = src;
        }
    }
    if a.classes.is_some() {
        *classes = a.classes;
    }
    let out = &a.common.out;
    prepare_out(out)?;
    write_resolved(out, &cfg)?;
    let BoundsConfig::Theorem2 {
        log,
        accuracy,
        eps,
        classes,
        h_y,
        mi,
    } = cfg
    else {
        unreachable!()
    };

    let mut labels = Vec::new();
    let mut reports = Vec::new();
    if let Some(path) = log {
        let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let entry: LogLine = serde_json::from_str(line).map_err(|e| {
                CliError::Data(dataio::DataError::Invalid(format!(
                    "{} line {}: {e}",
                    path.display(),
                    k + 1
                )))
            })?;
            let b = &entry.record.bracket;
            let (lower, upper) = theorem2_bounds(b.accuracy, b.eps, b.num_classes, b.h_y)?;
            let report = Theorem2Report {
                lower,
                upper,
                verdict: bracket_verdict(b.mi_estimate, lower, upper),
                ..b.clone()
            };
            labels.push(format!(
                "{}/{}/{}@{}",
                entry.layer,
                entry.probe.as_str(),
                entry.estimator.as_str(),
                entry.record.step
            ));
            reports.push(report);
        }
    } else {
        let (Some(acc), Some(e), Some(c), Some(h)) = (accuracy, eps, classes, h_y) else {
            return Err(CliError::Usage(
                "theorem2 needs --log, or --accuracy, --eps, --classes and --h-y".into(),
            ));
        };
        let (lower, upper) = theorem2_bounds(acc, e, c, h)?;
        let value = mi.unwrap_or(f64::NAN);
        labels.push("params".into());
        reports.push(Theorem2Report {
            n: 0,
            num_classes: c,
            h_y: h,
            accuracy: acc,
            eps: e,
            eps_underflow: false,
            mi_estimate: value,
            lower,
            upper,
            verdict: if mi.is_some() {
                bracket_verdict(value, lower, upper)
            } else {
                Verdict::Pass
            },
            regime_violations_correct: 0,
            regime_violations_wrong: 0,
        });
        if mi.is_none() {
            println!("no --mi given; printing the bracket only");
        }
    }
    let rows: Vec<Vec<String>> = labels
        .iter()
        .zip(&reports)
        .map(|(l, r)| {
            vec![
                l.clone(),
                format!("{:.6}", r.lower),
                format!("{:.6}", r.mi_estimate),
                format!("{:.6}", r.upper),
                format!("{:.3}", r.accuracy),
                format!("{:.3e}", r.eps),
                format!("{}/{}", r.regime_violations_correct, r.regime_violations_wrong),
                r.verdict.as_str().to_string(),
            ]
        })
        .collect();
    print!(
        "{}",
        report::table(
            &[
                "checkpoint",
                "lower",
                "mi",
                "upper",
                "accuracy",
                "eps",
                "regime",
                "verdict"
            ],
            &rows
        )
    );
    let all: Vec<BoundsReport> = reports.into_iter().map(BoundsReport::Theorem2).collect();
    finish_bounds(out, &all)
}

#[derive(Serialize)]
struct FilterSummary {
    n_min: usize,
    rows_in: usize,
    rows_out: usize,
    classes_in: usize,
    classes_out: usize,
    relabel: Vec<Option<usize>>,
    counts_out: Vec<usize>,
    h_y: f64,
}

pub fn cmd_filter(a: FilterArgs) -> Result<()> {
    let mut cfg: FilterConfig = match &a.common.config {
        Some(p) => config::load(p)?,
        None => FilterConfig {
            manifest: None,
            features: None,
            labels: None,
            n_min: 1,
            seed: 0,
        },
    };
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if a.manifest.is_some() {
        cfg.manifest = a.manifest.as_deref().map(absolute);
    }
    if a.features.is_some() {
        cfg.features = a.features.as_deref().map(absolute);
    }
    if a.labels.is_some() {
        cfg.labels = a.labels.as_deref().map(absolute);
    }
    if let Some(n) = a.n_min {
        cfg.n_min = n;
    }
    let out = &a.common.out;
    prepare_out(out)?;
    write_resolved(out, &cfg)?;

    let (features, labels, manifest) = match (&cfg.manifest, &cfg.features, &cfg.labels) {
        (Some(m), None, None) => {
            let ds = dataio::load_dataset(m)?;
            (ds.features, ds.labels, Some(ds.manifest))
        }
        (None, Some(f), Some(l)) => (dataio::read_features(f)?, dataio::read_labels(l)?, None),
        _ => {
            return Err(CliError::Usage(
                "filter needs either --manifest, or --features together with --labels".into(),
            ))
        }
    };
    let filtered = dataio::filter_min_class_count(&features, &labels, cfg.n_min)?;
    dataio::write_features(&out.join("features.pfv"), &filtered.features)?;
    dataio::write_labels(&out.join("labels.plb"), &filtered.labels)?;

    let splits = match &manifest {
        Some(m) => dataio::remap_splits(&m.splits, &filtered.kept_rows, labels.len()),
        None => stratified_split(
            &filtered.labels.labels,
            filtered.labels.num_classes,
            SplitFractions::default(),
            cfg.seed,
        )?,
    };
    let class_names = match &manifest {
        Some(m) if !m.class_names.is_empty() => filtered
            .relabel
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_some())
            .map(|(old, _)| m.class_names[old].clone())
            .collect(),
        _ => Vec::new(),
    };
    let new_manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        model: manifest
            .as_ref()
            .map(|m| m.model.clone())
            .unwrap_or_else(|| "unknown".into()),
        layer: manifest.as_ref().map_or(0, |m| m.layer),
        task: manifest
            .as_ref()
            .map(|m| m.task.clone())
            .unwrap_or_else(|| "unknown".into()),
        class_names,
        features: "features.pfv".into(),
        labels: "labels.plb".into(),
        rows: filtered.features.rows(),
        cols: filtered.features.cols(),
        splits,
        notes: vec![format!("classes with fewer than {} rows removed", cfg.n_min)],
        relabel: Some(filtered.relabel.clone()),
        network: None,
        pooling: manifest.as_ref().and_then(|m| m.pooling.clone()),
        row_checksums: manifest
            .as_ref()
            .and_then(|m| m.row_checksums.as_ref())
            .map(|sums| filtered.kept_rows.iter().map(|&i| sums[i]).collect()),
    };
    dataio::write_manifest(&out.join("manifest.json"), &new_manifest)?;
    let counts = filtered.labels.counts();
    let h_y = LabelDistribution::from_counts(&counts)?.entropy();
    let summary = FilterSummary {
        n_min: cfg.n_min,
        rows_in: labels.len(),
        rows_out: filtered.labels.len(),
        classes_in: labels.num_classes,
        classes_out: filtered.labels.num_classes,
        relabel: filtered.relabel,
        counts_out: counts,
        h_y,
    };
    write(&out.join("filter.json"), json(&summary))?;
    println!(
        "kept {} of {} classes, {} of {} rows; H(Y) = {:.6} nats",
        summary.classes_out, summary.classes_in, summary.rows_out, summary.rows_in, h_y
    );
    Ok(())
}

/// Loads each manifest with full validation (checksums, shapes, row
/// alignment) and prints one line of counts per layer.
pub fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &a.manifests {
        let ds = dataio::load_dataset(path)?;
        let counts = ds.labels.counts();
        let present = counts.iter().filter(|&&c| c > 0).count();
        rows.push(vec![
            ds.manifest.layer.to_string(),
            ds.manifest.rows.to_string(),
            ds.manifest.cols.to_string(),
            ds.labels.num_classes.to_string(),
            present.to_string(),
            format!(
                "{}/{}/{}",
                ds.manifest.splits.train.len(),
                ds.manifest.splits.valid.len(),
                ds.manifest.splits.test.len()
            ),
            ds.manifest.model.clone(),
        ]);
    }
    print!(
        "{}",
        report::table(
            &[
                "layer",
                "rows",
                "cols",
                "classes",
                "present",
                "train/valid/test",
                "model"
            ],
            &rows
        )
    );
    Ok(())
}
