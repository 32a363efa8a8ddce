//! Parallel layer sweeps over stored datasets.

use std::sync::Arc;
use std::time::Instant;

use infoprobe_core::trainer::{
    plan_sweep, run_sweep_job, sweep_label_entropy, EvalRecord, LayerSweepReport, Splits, SweepInput, SweepJob,
};
use infoprobe_core::{Matrix, ProbeKind, ProbeState, ToyNetwork};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SweepConfig;
use crate::dataio::Dataset;
use crate::error::{CliError, Result};

/// Per-layer features that share one label vector and one split.
#[derive(Clone, Debug)]
pub struct SweepData {
    pub layers: Vec<(usize, Matrix)>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: Splits,
    pub network: Option<Arc<ToyNetwork>>,
}

impl SweepData {
    /// Checks that every dataset carries the same labels and splits and
    /// orders the layers by index.
    pub fn assemble(mut datasets: Vec<Dataset>) -> Result<Self> {
        datasets.sort_by_key(|d| d.manifest.layer);
        let first = datasets
            .first()
            .ok_or_else(|| CliError::Usage("no datasets to sweep".into()))?;
        for d in &datasets[1..] {
            if d.labels != first.labels {
                return Err(CliError::Contract(format!(
                    "layer {} has a different label set than layer {}",
                    d.manifest.layer, first.manifest.layer
                )));
            }
            if d.manifest.splits != first.manifest.splits {
                return Err(CliError::Contract(format!(
                    "layer {} has different split assignments than layer {}",
                    d.manifest.layer, first.manifest.layer
                )));
            }
        }
        if let Some(w) = datasets.windows(2).find(|w| w[0].manifest.layer == w[1].manifest.layer) {
            return Err(CliError::Contract(format!("layer {} given twice", w[0].manifest.layer)));
        }
        let network = first.network.clone();
        let labels = first.labels.labels.clone();
        let num_classes = first.labels.num_classes;
        let splits = first.manifest.splits.clone();
        Ok(Self {
            layers: datasets.into_iter().map(|d| (d.manifest.layer, d.features)).collect(),
            labels,
            num_classes,
            splits,
            network,
        })
    }

    pub fn input(&self, mlp_hidden: usize) -> SweepInput<'_> {
        let mut input = SweepInput::new(&self.layers, &self.labels, self.num_classes, &self.splits);
        input.network = self.network.clone();
        input.mlp_hidden = mlp_hidden;
        input
    }
}

/// One line of `train_log.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub layer: usize,
    pub probe: ProbeKind,
    pub estimator: infoprobe_core::Objective,
    #[serde(flatten)]
    pub record: EvalRecord,
}

pub struct SweepOutput {
    pub report: LayerSweepReport,
    pub log: Vec<LogLine>,
    pub states: Vec<(SweepJob, ProbeState)>,
}

/// Runs every job of the sweep on a pool of `config.jobs` threads. Rows
/// come back in plan order whatever the scheduling.
pub fn run_sweep(data: &SweepData, config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    if config.probes.contains(&ProbeKind::Suffix) && data.network.is_none() {
        return Err(CliError::Contract(
            "suffix probes need the base network; these features carry none (external features cannot be fine-tuned)"
                .into(),
        ));
    }
    let input = data.input(config.mlp_hidden);
    input.validate()?;
    let layer_ids: Vec<usize> = data.layers.iter().map(|(i, _)| *i).collect();
    let jobs = plan_sweep(&layer_ids, &config.probes, &config.estimators);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", config.jobs)))?;
    let results: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&job| {
                let t = Instant::now();
                let out = run_sweep_job(&input, job, &config.train);
                log::info!(
                    "layer {} {} {} done in {:.2?}",
                    job.layer,
                    job.probe,
                    job.objective.as_str(),
                    t.elapsed()
                );
                out.map(|(mut row, outcome)| {
                    row.wall_time_secs = Some(t.elapsed().as_secs_f64());
                    (job, row, outcome)
                })
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let mut log = Vec::new();
    let mut states = Vec::new();
    for r in results {
        let (job, row, outcome) = r?;
        log.extend(outcome.log.into_iter().map(|record| LogLine {
            layer: job.layer,
            probe: job.probe,
            estimator: job.objective,
            record,
        }));
        states.push((job, outcome.state));
        rows.push(row);
    }
    Ok(SweepOutput {
        report: LayerSweepReport {
            h_y: sweep_label_entropy(&input)?,
            rows,
        },
        log,
        states,
    })
}
