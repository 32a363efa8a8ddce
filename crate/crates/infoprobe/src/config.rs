//! Run configurations for each command and the TOML pipeline description.
//!
//! Every command resolves its configuration (file + flags) into one of the
//! structs below and writes it back as `resolved_config.toml`, which can be
//! passed to `--config` to repeat the run exactly.

use std::fmt;
use std::path::{Path, PathBuf};

use infoprobe_core::oracle::{build_peak_pipeline, PeakPipeline, PipelineSpec};
use infoprobe_core::trainer::TrainConfig;
use infoprobe_core::{Matrix, Objective, ProbeKind};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// A configuration problem, located by its dotted key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "`{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

/// Reads `path` as a TOML document of type `T`.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| ConfigError::new("", e.message().to_string() + &span_note(text, e.span())))
}

fn span_note(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("run configs serialise to TOML")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub samples: usize,
    /// Std-dev of the Gaussian noise added to stage-0 embeddings (and to
    /// every stage of table-only pipelines). Defaults to 5% of the
    /// embedding scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default = "default_task")]
    pub task: String,
    pub pipeline: Table,
}

fn default_task() -> String {
    "synthetic".into()
}

impl Default for SynthConfig {
    fn default() -> Self {
        let mut pipeline = Table::new();
        pipeline.insert("preset".into(), Value::String("peak".into()));
        Self {
            seed: 0,
            samples: 2000,
            noise: None,
            task: default_task(),
            pipeline,
        }
    }
}

/// A parsed pipeline: either the fixed peak construction (with its base
/// network) or a table-only Markov chain.
#[derive(Clone, Debug)]
pub enum Pipeline {
    Peak(PeakPipeline),
    Chain(PipelineSpec),
}

impl Pipeline {
    pub fn spec(&self) -> &PipelineSpec {
        match self {
            Pipeline::Peak(p) => &p.spec,
            Pipeline::Chain(s) => s,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Peak(_) => "peak",
            Pipeline::Chain(_) => "chain",
        }
    }
}

fn get<'a>(t: &'a Table, prefix: &str, key: &str) -> Result<&'a Value> {
    t.get(key)
        .ok_or_else(|| ConfigError::new(format!("{prefix}.{key}"), "missing"))
}

fn as_f64(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(ConfigError::new(
            key,
            format!("expected a number, found {}", other.type_str()),
        )),
    }
}

fn as_usize(v: &Value, key: &str) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(ConfigError::new(
            key,
            format!("expected a non-negative integer, found {other}"),
        )),
    }
}

fn as_array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| ConfigError::new(key, format!("expected an array, found {}", v.type_str())))
}

fn vector(v: &Value, key: &str) -> Result<Vec<f64>> {
    as_array(v, key)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{key}[{i}]")))
        .collect()
}

fn matrix(v: &Value, key: &str) -> Result<Matrix> {
    let rows = as_array(v, key)?
        .iter()
        .enumerate()
        .map(|(i, r)| vector(r, &format!("{key}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(ConfigError::new(key, "empty table"));
    }
    Matrix::from_rows(&rows).map_err(|e| ConfigError::new(key, e.to_string()))
}

/// Builds the pipeline described by a `[pipeline]` table.
///
/// `preset = "peak"` selects the fixed peak construction; `preset =
/// "random"` draws a chain from `classes`, `alphabets` and `embed_dim`.
/// Without a preset the table must give `label_probs`, `emission` and a
/// `[[pipeline.layers]]` entry with a `channel` table per layer; embeddings
/// default to one-hot codes.
pub fn parse_pipeline(t: &Table, seed: u64) -> Result<Pipeline> {
    let p = "pipeline";
    match t.get("preset") {
        Some(Value::String(s)) if s == "peak" => Ok(Pipeline::Peak(build_peak_pipeline())),
        Some(Value::String(s)) if s == "random" => {
            let classes = as_usize(get(t, p, "classes")?, "pipeline.classes")?;
            let alphabets = as_array(get(t, p, "alphabets")?, "pipeline.alphabets")?
                .iter()
                .enumerate()
                .map(|(i, v)| as_usize(v, &format!("pipeline.alphabets[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let embed_dim = match t.get("embed_dim") {
                Some(v) => as_usize(v, "pipeline.embed_dim")?,
                None => 2,
            };
            PipelineSpec::random_chain(classes, &alphabets, embed_dim, seed)
                .map(Pipeline::Chain)
                .map_err(|e| ConfigError::new(p, e.to_string()))
        }
        Some(other) => Err(ConfigError::new(
            "pipeline.preset",
            format!("unknown preset {other}; expected \"peak\" or \"random\""),
        )),
        None => {
            let label_probs = vector(get(t, p, "label_probs")?, "pipeline.label_probs")?;
            let emission = matrix(get(t, p, "emission")?, "pipeline.emission")?;
            let layers = as_array(get(t, p, "layers")?, "pipeline.layers")?;
            let mut channels = Vec::with_capacity(layers.len());
            let mut embeddings = vec![match t.get("input_embedding") {
                Some(v) => matrix(v, "pipeline.input_embedding")?,
                None => Matrix::identity(emission.cols()),
            }];
            for (i, layer) in layers.iter().enumerate() {
                let key = format!("pipeline.layers[{i}]");
                let lt = layer
                    .as_table()
                    .ok_or_else(|| ConfigError::new(&key, "expected a table"))?;
                let channel = lt.get("channel").ok_or_else(|| {
                    ConfigError::new(
                        format!("{key}.channel"),
                        format!("missing channel table for layer {}", i + 1),
                    )
                })?;
                let channel = matrix(channel, &format!("{key}.channel"))?;
                let emb = match lt.get("embedding") {
                    Some(v) => matrix(v, &format!("{key}.embedding"))?,
                    None => Matrix::identity(channel.cols()),
                };
                channels.push(channel);
                embeddings.push(emb);
            }
            PipelineSpec::new(label_probs, emission, channels, embeddings, seed)
                .map(Pipeline::Chain)
                .map_err(|e| ConfigError::new(p, e.to_string()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// One manifest per layer; all must share labels and splits.
    pub manifests: Vec<PathBuf>,
    pub probes: Vec<ProbeKind>,
    pub estimators: Vec<Objective>,
    pub jobs: usize,
    pub mlp_hidden: usize,
    #[serde(default)]
    pub save_checkpoints: bool,
    pub train: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            manifests: Vec::new(),
            probes: vec![ProbeKind::Linear],
            estimators: vec![Objective::CrossEntropy],
            jobs: 1,
            mlp_hidden: infoprobe_core::probes::DEFAULT_MLP_HIDDEN,
            save_checkpoints: false,
            train: TrainConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.manifests.is_empty() {
            return Err(ConfigError::new("manifests", "no layer manifests given"));
        }
        if self.probes.is_empty() {
            return Err(ConfigError::new("probes", "empty probe list"));
        }
        if self.estimators.is_empty() {
            return Err(ConfigError::new("estimators", "empty estimator list"));
        }
        if self.jobs == 0 {
            return Err(ConfigError::new("jobs", "must be at least 1"));
        }
        if self.mlp_hidden == 0 {
            return Err(ConfigError::new("mlp_hidden", "must be at least 1"));
        }
        for &o in &self.estimators {
            let cfg = TrainConfig {
                objective: o,
                ..self.train.clone()
            };
            cfg.validate().map_err(|e| ConfigError::new("train", e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bound", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundsConfig {
    /// Margin check on a generated dataset, or on stored files with an
    /// explicit separator.
    Theorem1 {
        d: f64,
        #[serde(default = "default_n_per_class")]
        n_per_class: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spread: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    /// Bracket check on every record of a stored training log, or on one
    /// set of explicit values.
    Theorem2 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        accuracy: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        classes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_y: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mi: Option<f64>,
    },
}

fn default_n_per_class() -> usize {
    200
}

fn default_dim() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Either a manifest, or a feature file plus a label file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    pub n_min: usize,
    /// Split seed when the input has no manifest to inherit splits from.
    #[serde(default)]
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use infoprobe_core::oracle::dpi_audit;

    fn pipeline_of(text: &str) -> Result<Pipeline> {
        let t: Table = toml::from_str(text).unwrap();
        parse_pipeline(t["pipeline"].as_table().unwrap(), 0)
    }

    #[test]
    fn peak_preset() {
        let p = pipeline_of("[pipeline]\npreset = \"peak\"\n").unwrap();
        assert!(matches!(p, Pipeline::Peak(_)));
        assert_eq!(p.spec().num_layers(), 3);
    }

    #[test]
    fn explicit_identity_chain() {
        let text = r#"
[pipeline]
label_probs = [0.5, 0.5]
emission = [[1, 0], [0, 1]]
[[pipeline.layers]]
channel = [[1, 0], [0, 1]]
[[pipeline.layers]]
channel = [[1.0, 0.0], [0.0, 1.0]]
"#;
        let p = pipeline_of(text).unwrap();
        let audit = dpi_audit(p.spec());
        assert!(audit.mi.iter().all(|&v| (v - audit.mi[0]).abs() < 1e-15));
    }

    #[test]
    fn missing_channel_names_the_layer() {
        let text = r#"
[pipeline]
label_probs = [0.5, 0.5]
emission = [[1, 0], [0, 1]]
[[pipeline.layers]]
channel = [[1, 0], [0, 1]]
[[pipeline.layers]]
embedding = [[1.0], [2.0]]
"#;
        let err = pipeline_of(text).unwrap_err();
        assert_eq!(err.key, "pipeline.layers[1].channel");
        assert!(err.to_string().contains("layer 2"), "{err}");
    }

    #[test]
    fn bad_values_name_their_key() {
        let err = pipeline_of("[pipeline]\nlabel_probs = [0.5, \"x\"]\nemission = [[1]]\nlayers = []\n").unwrap_err();
        assert_eq!(err.key, "pipeline.label_probs[1]");
        let err = pipeline_of("[pipeline]\npreset = \"spiral\"\n").unwrap_err();
        assert_eq!(err.key, "pipeline.preset");
        let err = pipeline_of("[pipeline]\npreset = \"random\"\nclasses = 2\n").unwrap_err();
        assert_eq!(err.key, "pipeline.alphabets");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            parse::<SynthConfig>("seed = 1\nsamples = 10\nsampels = 3\n[pipeline]\npreset = \"peak\"\n").unwrap_err();
        assert!(err.to_string().contains("sampels"), "{err}");
    }

    #[test]
    fn configs_round_trip_through_toml() {
        let synth = SynthConfig::default();
        assert_eq!(parse::<SynthConfig>(&to_toml(&synth)).unwrap(), synth);
        let sweep = SweepConfig {
            manifests: vec!["a.json".into()],
            ..SweepConfig::default()
        };
        assert_eq!(parse::<SweepConfig>(&to_toml(&sweep)).unwrap(), sweep);
        let b = BoundsConfig::Theorem1 {
            d: 2.0,
            n_per_class: 200,
            dim: 8,
            seed: 0,
            spread: None,
            features: None,
            labels: None,
            w: None,
            b: None,
        };
        assert_eq!(parse::<BoundsConfig>(&to_toml(&b)).unwrap(), b);
    }
}
