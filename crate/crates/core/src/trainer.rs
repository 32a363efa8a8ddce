//! Probe training and the per-layer sweep.
//!
//! Training runs minibatch AdamW on the probe's loss, evaluates the chosen
//! MI estimator on the validation split at a fixed step interval, keeps the
//! best checkpoint and stops after `early_stop_patience` evaluations without
//! improvement. The reported figure is the test-split estimate of that
//! checkpoint.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::bounds::{check_theorem2, Theorem2Report};
use crate::error::{contract, shape, Error, Result};
use crate::estimators::{estimate, LabelDistribution, MIEstimate, Objective};
use crate::numerics::{derive_seed, AdamConfig, AdamState, Matrix, Rng};
use crate::probes::{Loss, ProbeKind, ProbeSpec, ProbeState, ToyNetwork, DEFAULT_MLP_HIDDEN};

/// Validation MI must rise by more than this to count as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

/// Row indices of the three splits, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Splits {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Errors unless every index is `< n` and no index is used twice.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = alloc::vec![false; n];
        for &i in self.train.iter().chain(&self.valid).chain(&self.test) {
            if i >= n {
                return Err(contract(format!("split index {i} outside {n} rows")));
            }
            if core::mem::replace(&mut seen[i], true) {
                return Err(contract(format!("row {i} appears in more than one split")));
            }
        }
        Ok(())
    }
}

/// Per-class shuffle and cut, so every split keeps the class proportions
/// up to rounding.
pub fn stratified_split(labels: &[usize], num_classes: usize, fractions: SplitFractions, seed: u64) -> Result<Splits> {
    check_fractions(fractions)?;
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(contract(format!("label {bad} outside {num_classes} classes")));
    }
    let mut rng = Rng::new(seed);
    let mut splits = Splits {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    for c in 0..num_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        rng.shuffle(&mut idx);
        let n = idx.len() as f64;
        let n_valid = libm::round(n * fractions.valid) as usize;
        let n_test = (libm::round(n * fractions.test) as usize).min(idx.len() - n_valid.min(idx.len()));
        let n_valid = n_valid.min(idx.len());
        splits.valid.extend_from_slice(&idx[..n_valid]);
        splits.test.extend_from_slice(&idx[n_valid..n_valid + n_test]);
        splits.train.extend_from_slice(&idx[n_valid + n_test..]);
    }
    splits.train.sort_unstable();
    splits.valid.sort_unstable();
    splits.test.sort_unstable();
    Ok(splits)
}

fn check_fractions(f: SplitFractions) -> Result<()> {
    let parts = [f.train, f.valid, f.test];
    if parts.iter().any(|&p| !(p >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(contract(format!(
            "split fractions {}/{}/{} must be non-negative and sum to 1",
            f.train, f.valid, f.test
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub objective: Objective,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Evaluate every `eval_interval` epochs (fractions allowed).
    pub eval_interval: f64,
    /// Evaluations without improvement before stopping.
    pub early_stop_patience: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub split_fractions: SplitFractions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::CrossEntropy,
            batch_size: 64,
            max_epochs: 50,
            eval_interval: 1.0,
            early_stop_patience: 5,
            adam: AdamConfig::default(),
            seed: 0,
            split_fractions: SplitFractions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < self.objective.min_batch() {
            return Err(contract(format!(
                "{} needs batches of at least {}, got {}",
                self.objective.as_str(),
                self.objective.min_batch(),
                self.batch_size
            )));
        }
        if self.max_epochs == 0 {
            return Err(contract("max_epochs must be at least 1"));
        }
        if !(self.eval_interval > 0.0) || !self.eval_interval.is_finite() {
            return Err(contract("eval_interval must be a positive number of epochs"));
        }
        if self.early_stop_patience == 0 {
            return Err(contract("early_stop_patience must be at least 1"));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0)
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || !(a.eps > 0.0)
        {
            return Err(contract("invalid optimizer hyperparameters"));
        }
        check_fractions(self.split_fractions)
    }
}

/// One validation pass.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalRecord {
    pub step: usize,
    pub epoch: f64,
    /// Validation estimate of the training objective.
    pub val_mi: f64,
    /// Cross-entropy estimate with its accuracy/`ε` bracket on the same
    /// validation logits.
    pub bracket: Theorem2Report,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation checkpoint.
    pub state: ProbeState,
    pub test: MIEstimate,
    pub best: EvalRecord,
    pub log: Vec<EvalRecord>,
    pub steps: usize,
}

impl TrainOutcome {
    pub fn best_epoch(&self) -> f64 {
        self.best.epoch
    }
}

/// Stratified split from `config.seed`, then [`train_probe_with_splits`].
pub fn train_probe(
    features: &Matrix,
    labels: &[usize],
    spec: ProbeSpec,
    config: &TrainConfig,
    base: Option<Arc<ToyNetwork>>,
) -> Result<TrainOutcome> {
    let splits = stratified_split(labels, spec.num_classes, config.split_fractions, config.seed)?;
    train_probe_with_splits(features, labels, &splits, spec, config, base)
}

struct EvalSet {
    features: Matrix,
    labels: Vec<usize>,
    dist: LabelDistribution,
}

impl EvalSet {
    fn new(features: &Matrix, labels: &[usize], idx: &[usize], num_classes: usize) -> Result<Self> {
        let labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let dist = LabelDistribution::from_labels(&labels, num_classes)?;
        Ok(Self {
            features: features.select_rows(idx),
            labels,
            dist,
        })
    }

    fn estimate(&self, state: &ProbeState, objective: Objective) -> Result<(MIEstimate, Matrix)> {
        let logits = state.logits(&self.features)?;
        Ok((estimate(objective, &logits, &self.labels, &self.dist)?, logits))
    }
}

/// Trains on `splits.train`, selects on `splits.valid`, reports on
/// `splits.test`.
pub fn train_probe_with_splits(
    features: &Matrix,
    labels: &[usize],
    splits: &Splits,
    spec: ProbeSpec,
    config: &TrainConfig,
    base: Option<Arc<ToyNetwork>>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if features.rows() != labels.len() {
        return Err(shape(format!(
            "{} feature rows for {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if features.cols() != spec.input_dim {
        return Err(shape(format!(
            "features have {} columns, probe expects {}",
            features.cols(),
            spec.input_dim
        )));
    }
    splits.validate(labels.len())?;
    for (name, part) in [
        ("train", &splits.train),
        ("valid", &splits.valid),
        ("test", &splits.test),
    ] {
        if part.is_empty() {
            return Err(contract(format!("{name} split is empty")));
        }
    }
    let c = spec.num_classes;
    let valid = EvalSet::new(features, labels, &splits.valid, c)?;
    let test = EvalSet::new(features, labels, &splits.test, c)?;
    let train_x = features.select_rows(&splits.train);
    let train_y: Vec<usize> = splits.train.iter().map(|&i| labels[i]).collect();
    if let Some(&bad) = train_y.iter().find(|&&y| y >= c) {
        return Err(contract(format!("label {bad} outside {c} classes")));
    }

    let mut state = ProbeState::new(spec, base)?;
    let mut adam = AdamState::new(config.adam, &state.params);
    let mut rng = Rng::new(config.seed).fork(1);
    let n_train = train_y.len();
    let batch = config.batch_size.min(n_train);
    let steps_per_epoch = n_train.div_ceil(batch);
    let eval_every = (libm::round(config.eval_interval * steps_per_epoch as f64) as usize).max(1);

    let mut order: Vec<usize> = (0..n_train).collect();
    let mut log = Vec::new();
    let mut best: Option<(EvalRecord, ProbeState)> = None;
    let mut since_best = 0usize;
    let mut step = 0usize;
    let mut marginal = Vec::with_capacity(batch);

    let mut evaluate = |state: &ProbeState, step: usize, log: &mut Vec<EvalRecord>| -> Result<bool> {
        let (est, logits) = valid.estimate(state, config.objective)?;
        let bracket = check_theorem2(&logits, &valid.labels, &valid.dist)?;
        let record = EvalRecord {
            step,
            epoch: step as f64 / steps_per_epoch as f64,
            val_mi: est.value,
            bracket,
        };
        log.push(record.clone());
        let improved = best
            .as_ref()
            .is_none_or(|(b, _)| record.val_mi > b.val_mi + MIN_IMPROVEMENT);
        if improved {
            best = Some((record, state.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        Ok(since_best >= config.early_stop_patience)
    };

    'epochs: for _ in 0..config.max_epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            if chunk.len() < config.objective.min_batch() {
                continue;
            }
            let bx = train_x.select_rows(chunk);
            let by: Vec<usize> = chunk.iter().map(|&i| train_y[i]).collect();
            let loss = match config.objective {
                Objective::CrossEntropy => Loss::CrossEntropy,
                Objective::InfoNce => Loss::InfoNce,
                Objective::Mine => {
                    marginal.clear();
                    marginal.extend_from_slice(&by);
                    rng.shuffle(&mut marginal);
                    Loss::Mine {
                        marginal_labels: &marginal,
                    }
                }
            };
            let grads = match state.backward(&bx, &by, loss) {
                Ok(g) if g.loss.is_finite() && g.grads.iter().all(Matrix::is_finite) => g,
                Ok(_) | Err(Error::NonFinite(_)) => {
                    return Err(Error::Diverged {
                        step,
                        last_state: alloc::boxed::Box::new(state),
                    })
                }
                Err(e) => return Err(e),
            };
            let mut next = state.params.clone();
            adam.update(&mut next, &grads.grads)?;
            if !next.iter().all(Matrix::is_finite) {
                return Err(Error::Diverged {
                    step,
                    last_state: alloc::boxed::Box::new(state),
                });
            }
            state.params = next;
            step += 1;
            if step.is_multiple_of(eval_every) && evaluate(&state, step, &mut log)? {
                break 'epochs;
            }
        }
    }
    if log.is_empty() {
        evaluate(&state, step, &mut log)?;
    }
    let (best_record, best_state) = best.expect("at least one evaluation ran");
    let (test_est, _) = test.estimate(&best_state, config.objective)?;
    Ok(TrainOutcome {
        state: best_state,
        test: test_est,
        best: best_record,
        log,
        steps: step,
    })
}

/// One `(layer, probe, estimator)` cell of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepJob {
    pub layer: usize,
    pub probe: ProbeKind,
    pub objective: Objective,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub layer: usize,
    pub probe: ProbeKind,
    pub estimator: Objective,
    pub test: MIEstimate,
    pub best_epoch: f64,
    pub steps: usize,
    /// Filled in by callers that time jobs; never serialised, so reports
    /// stay byte-identical across runs.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub wall_time_secs: Option<f64>,
}

impl SweepRow {
    pub fn mi_over_hy(&self) -> Option<f64> {
        self.test.normalized()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSweepReport {
    /// `H(Y)` of the test split shared by every row.
    pub h_y: f64,
    pub rows: Vec<SweepRow>,
}

/// Features of every layer with shared labels and splits.
#[derive(Clone, Debug)]
pub struct SweepInput<'a> {
    /// `(layer index, features)`.
    pub layers: &'a [(usize, Matrix)],
    pub labels: &'a [usize],
    pub num_classes: usize,
    pub splits: &'a Splits,
    /// Needed only by suffix probes.
    pub network: Option<Arc<ToyNetwork>>,
    pub mlp_hidden: usize,
}

impl<'a> SweepInput<'a> {
    pub fn new(layers: &'a [(usize, Matrix)], labels: &'a [usize], num_classes: usize, splits: &'a Splits) -> Self {
        Self {
            layers,
            labels,
            num_classes,
            splits,
            network: None,
            mlp_hidden: DEFAULT_MLP_HIDDEN,
        }
    }

    /// Every layer must have one row per label.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(contract("sweep without layers"));
        }
        for (idx, m) in self.layers {
            if m.rows() != self.labels.len() {
                return Err(contract(format!(
                    "layer {idx} has {} rows but the label set has {}; layers must share one label set",
                    m.rows(),
                    self.labels.len()
                )));
            }
        }
        self.splits.validate(self.labels.len())
    }

    fn features(&self, layer: usize) -> Result<&'a Matrix> {
        self.layers
            .iter()
            .find(|(i, _)| *i == layer)
            .map(|(_, m)| m)
            .ok_or_else(|| contract(format!("no features for layer {layer}")))
    }
}

/// Jobs in report order: layer, then probe, then estimator.
pub fn plan_sweep(layers: &[usize], probes: &[ProbeKind], objectives: &[Objective]) -> Vec<SweepJob> {
    let mut jobs = Vec::new();
    for &layer in layers {
        for &probe in probes {
            for &objective in objectives {
                jobs.push(SweepJob {
                    layer,
                    probe,
                    objective,
                });
            }
        }
    }
    jobs
}

fn probe_code(kind: ProbeKind) -> u64 {
    match kind {
        ProbeKind::Linear => 0,
        ProbeKind::Mlp => 1,
        ProbeKind::Suffix => 2,
    }
}

fn objective_code(o: Objective) -> u64 {
    match o {
        Objective::CrossEntropy => 0,
        Objective::Mine => 1,
        Objective::InfoNce => 2,
    }
}

/// Runs one job. Seeds derive from `config.seed` and the job coordinates
/// only, so results do not depend on scheduling.
pub fn run_sweep_job(input: &SweepInput<'_>, job: SweepJob, config: &TrainConfig) -> Result<(SweepRow, TrainOutcome)> {
    let features = input.features(job.layer)?;
    let path = [job.layer as u64, probe_code(job.probe), objective_code(job.objective)];
    let init_seed = derive_seed(config.seed, &[path[0], path[1], path[2], 0]);
    let train_seed = derive_seed(config.seed, &[path[0], path[1], path[2], 1]);
    let mut spec = ProbeSpec::for_layer(job.probe, job.layer, features.cols(), input.num_classes, init_seed);
    spec.mlp_hidden = input.mlp_hidden;
    let cfg = TrainConfig {
        objective: job.objective,
        seed: train_seed,
        ..config.clone()
    };
    let base = if job.probe == ProbeKind::Suffix {
        input.network.clone()
    } else {
        None
    };
    let out = train_probe_with_splits(features, input.labels, input.splits, spec, &cfg, base)?;
    let row = SweepRow {
        layer: job.layer,
        probe: job.probe,
        estimator: job.objective,
        best_epoch: out.best_epoch(),
        steps: out.steps,
        test: out.test.clone(),
        wall_time_secs: None,
    };
    Ok((row, out))
}

/// Test-split label entropy of a sweep.
pub fn sweep_label_entropy(input: &SweepInput<'_>) -> Result<f64> {
    let labels: Vec<usize> = input.splits.test.iter().map(|&i| input.labels[i]).collect();
    Ok(LabelDistribution::from_labels(&labels, input.num_classes)?.entropy())
}

/// Sequential sweep over every layer × probe × estimator.
pub fn sweep_layers(
    input: &SweepInput<'_>,
    probes: &[ProbeKind],
    objectives: &[Objective],
    config: &TrainConfig,
) -> Result<LayerSweepReport> {
    input.validate()?;
    let layers: Vec<usize> = input.layers.iter().map(|(i, _)| *i).collect();
    let rows = plan_sweep(&layers, probes, objectives)
        .into_iter()
        .map(|job| run_sweep_job(input, job, config).map(|(row, _)| row))
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerSweepReport {
        h_y: sweep_label_entropy(input)?,
        rows,
    })
}
