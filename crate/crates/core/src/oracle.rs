//! Ground truth by enumeration.
//!
//! A [`PipelineSpec`] describes a Markov chain `Y → X → H¹ → … → H^L` over
//! small finite alphabets: a label prior, an emission table `P(X | Y)` and
//! one row-stochastic channel per layer. Joint distributions of `(Y, H^i)`
//! are obtained by chaining the tables, so their MI is exact up to
//! rounding. Each stage also carries an embedding table that turns symbols
//! into feature vectors, which is how the exact pipelines become datasets
//! that probes can be trained on.

use crate::error::{contract, shape, Error, Result};
use crate::numerics::{dot, math, Matrix, Rng};
use crate::probes::{Activation, DenseLayer, ToyNetwork};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Largest alphabet a pipeline variable may have.
pub const MAX_ALPHABET: usize = 64;

const SUM_TOLERANCE: f64 = 1e-12;

/// Probability table `p(v, w)` over two finite variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    table: Matrix,
}

impl JointDistribution {
    pub fn new(table: Matrix) -> Result<Self> {
        if table.is_empty() {
            return Err(contract("joint distribution over an empty support"));
        }
        if table.as_slice().iter().any(|&p| p < 0.0) {
            return Err(contract("joint distribution has negative entries"));
        }
        let sum: f64 = table.as_slice().iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(contract(format!("joint distribution sums to {sum}, not 1")));
        }
        Ok(Self { table })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Empirical joint of paired symbol sequences.
    pub fn from_pairs(v: &[usize], w: &[usize], v_size: usize, w_size: usize) -> Result<Self> {
        if v.len() != w.len() || v.is_empty() {
            return Err(contract("paired samples must be non-empty and equally long"));
        }
        let mut table = Matrix::zeros(v_size, w_size);
        let unit = 1.0 / v.len() as f64;
        for (&a, &b) in v.iter().zip(w) {
            if a >= v_size || b >= w_size {
                return Err(contract(format!("symbol pair ({a}, {b}) outside {v_size}x{w_size}")));
            }
            table.set(a, b, table.get(a, b) + unit);
        }
        Self::new(table)
    }

    /// `p(v) p(w)`.
    pub fn product(pv: &[f64], pw: &[f64]) -> Result<Self> {
        let mut table = Matrix::zeros(pv.len(), pw.len());
        for (i, &a) in pv.iter().enumerate() {
            for (j, &b) in pw.iter().enumerate() {
                table.set(i, j, a * b);
            }
        }
        Self::new(table)
    }

    pub fn table(&self) -> &Matrix {
        &self.table
    }

    pub fn first_marginal(&self) -> Vec<f64> {
        self.table.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.table.cols()];
        for r in self.table.row_iter() {
            for (acc, &p) in m.iter_mut().zip(r) {
                *acc += p;
            }
        }
        m
    }

    pub fn first_entropy(&self) -> f64 {
        entropy_of(&self.first_marginal())
    }

    pub fn second_entropy(&self) -> f64 {
        entropy_of(&self.second_marginal())
    }

    pub fn mutual_information(&self) -> f64 {
        exact_mi(self)
    }
}

/// Shannon entropy of a probability vector in nats.
pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * math::ln(p))
        .sum::<f64>()
}

/// `Σ p(v,w) log(p(v,w) / (p(v) p(w)))` over the support. Rounding can
/// leave a product-form table a few ulps below zero; the result is
/// clamped to be non-negative.
pub fn exact_mi(joint: &JointDistribution) -> f64 {
    let pv = joint.first_marginal();
    let pw = joint.second_marginal();
    let mut mi = 0.0;
    for (i, row) in joint.table.row_iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (math::ln(p) - math::ln(pv[i]) - math::ln(pw[j]));
            }
        }
    }
    mi.max(0.0)
}

fn check_stochastic(name: &str, m: &Matrix) -> Result<()> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(contract(format!("{name} is empty")));
    }
    if m.rows() > MAX_ALPHABET || m.cols() > MAX_ALPHABET {
        return Err(contract(format!(
            "{name} is {}x{}; alphabets are capped at {MAX_ALPHABET}",
            m.rows(),
            m.cols()
        )));
    }
    for (r, row) in m.row_iter().enumerate() {
        if row.iter().any(|&p| p < 0.0) {
            return Err(contract(format!("{name} row {r} has negative entries")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(contract(format!("{name} row {r} sums to {s}, not 1")));
        }
    }
    Ok(())
}

/// A validated Markov chain `Y → X → H¹ → … → H^L` with per-stage
/// embeddings. Stage 0 is `X`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawPipeline"))]
pub struct PipelineSpec {
    label_probs: Vec<f64>,
    emission: Matrix,
    channels: Vec<Matrix>,
    embeddings: Vec<Matrix>,
    seed: u64,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawPipeline {
    label_probs: Vec<f64>,
    emission: Matrix,
    channels: Vec<Matrix>,
    embeddings: Vec<Matrix>,
    seed: u64,
}

#[cfg(feature = "serde")]
impl TryFrom<RawPipeline> for PipelineSpec {
    type Error = Error;

    fn try_from(r: RawPipeline) -> Result<Self> {
        PipelineSpec::new(r.label_probs, r.emission, r.channels, r.embeddings, r.seed)
    }
}

impl PipelineSpec {
    /// `emission` is `C × |X|`; `channels[i-1]` is `|H^{i-1}| × |H^i|`;
    /// `embeddings[i]` is `|H^i| × D_i` for stages `0 … L`.
    pub fn new(
        label_probs: Vec<f64>,
        emission: Matrix,
        channels: Vec<Matrix>,
        embeddings: Vec<Matrix>,
        seed: u64,
    ) -> Result<Self> {
        let c = label_probs.len();
        if !(2..=MAX_ALPHABET).contains(&c) {
            return Err(contract(format!("label alphabet of size {c}; need 2..={MAX_ALPHABET}")));
        }
        if label_probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(contract("label probabilities must be non-negative"));
        }
        let s: f64 = label_probs.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(contract(format!("label probabilities sum to {s}, not 1")));
        }
        check_stochastic("emission", &emission)?;
        if emission.rows() != c {
            return Err(shape(format!("emission has {} rows for {c} labels", emission.rows())));
        }
        let mut width = emission.cols();
        for (i, ch) in channels.iter().enumerate() {
            check_stochastic(&format!("channel of layer {}", i + 1), ch)?;
            if ch.rows() != width {
                return Err(shape(format!(
                    "channel of layer {} has {} rows, previous alphabet has {width}",
                    i + 1,
                    ch.rows()
                )));
            }
            width = ch.cols();
        }
        if embeddings.len() != channels.len() + 1 {
            return Err(shape(format!(
                "{} embeddings for {} stages",
                embeddings.len(),
                channels.len() + 1
            )));
        }
        for (i, e) in embeddings.iter().enumerate() {
            let alphabet = if i == 0 {
                emission.cols()
            } else {
                channels[i - 1].cols()
            };
            if e.rows() != alphabet || e.cols() == 0 {
                return Err(shape(format!(
                    "embedding of stage {i} is {}x{}, alphabet has {alphabet} symbols",
                    e.rows(),
                    e.cols()
                )));
            }
        }
        Ok(Self {
            label_probs,
            emission,
            channels,
            embeddings,
            seed,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.label_probs.len()
    }

    /// `L`; stages are numbered `0 … L`.
    pub fn num_layers(&self) -> usize {
        self.channels.len()
    }

    pub fn label_probs(&self) -> &[f64] {
        &self.label_probs
    }

    pub fn emission(&self) -> &Matrix {
        &self.emission
    }

    pub fn channels(&self) -> &[Matrix] {
        &self.channels
    }

    pub fn embeddings(&self) -> &[Matrix] {
        &self.embeddings
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alphabet(&self, stage: usize) -> usize {
        self.embeddings[stage].rows()
    }

    pub fn label_entropy(&self) -> f64 {
        entropy_of(&self.label_probs)
    }

    /// 0.05 × the largest absolute embedding coordinate.
    pub fn default_noise_sigma(&self) -> f64 {
        0.05 * self.embeddings.iter().map(Matrix::max_abs).fold(0.0, f64::max)
    }

    /// Exact joint of `(Y, H^i)`; `i = 0` gives `(Y, X)`.
    pub fn joint(&self, layer: usize) -> Result<JointDistribution> {
        if layer > self.num_layers() {
            return Err(contract(format!(
                "layer {layer} outside pipeline with {} layers",
                self.num_layers()
            )));
        }
        let mut table = self.emission.clone();
        for (r, &p) in self.label_probs.iter().enumerate() {
            table.row_mut(r).iter_mut().for_each(|v| *v *= p);
        }
        for ch in &self.channels[..layer] {
            table = table.matmul(ch)?;
        }
        JointDistribution::new(table)
    }

    /// Random chain with Dirichlet-like rows. `alphabets[0]` is `|X|`,
    /// followed by one size per layer.
    pub fn random_chain(num_classes: usize, alphabets: &[usize], embed_dim: usize, seed: u64) -> Result<Self> {
        if alphabets.is_empty() || embed_dim == 0 {
            return Err(contract(
                "random chain needs an input alphabet and a positive embedding width",
            ));
        }
        let mut rng = Rng::new(seed);
        let label_probs = random_simplex(num_classes, &mut rng);
        let random_table = |rows: usize, cols: usize, rng: &mut Rng| -> Result<Matrix> {
            let data: Vec<f64> = (0..rows).flat_map(|_| random_simplex(cols, rng)).collect();
            Matrix::from_vec(rows, cols, data)
        };
        let emission = random_table(num_classes, alphabets[0], &mut rng)?;
        let channels = alphabets
            .windows(2)
            .map(|w| random_table(w[0], w[1], &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let embeddings = alphabets
            .iter()
            .map(|&a| {
                let mut e = Matrix::zeros(a, embed_dim);
                e.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal());
                e
            })
            .collect();
        Self::new(label_probs, emission, channels, embeddings, seed)
    }

    /// Draws `n` full paths `(y, x, h¹, …, h^L)` and embeds every stage.
    /// Noise of stage `i` comes from its own stream, so stage `i` of this
    /// sample equals [`sample_dataset`] at stage `i` for the same seed.
    pub fn sample_chain(&self, n: usize, noise_sigma: f64, seed: u64) -> Result<SampledChain> {
        if n == 0 {
            return Err(contract("sample size must be at least 1"));
        }
        if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
            return Err(contract(format!(
                "noise sigma must be finite and non-negative, got {noise_sigma}"
            )));
        }
        let mut rng = Rng::new(seed);
        let stages = self.num_layers() + 1;
        let mut labels = Vec::with_capacity(n);
        let mut symbols: Vec<Vec<usize>> = vec![Vec::with_capacity(n); stages];
        for _ in 0..n {
            let y = rng.categorical(&self.label_probs);
            let mut s = rng.categorical(self.emission.row(y));
            labels.push(y);
            symbols[0].push(s);
            for (i, ch) in self.channels.iter().enumerate() {
                s = rng.categorical(ch.row(s));
                symbols[i + 1].push(s);
            }
        }
        let features = symbols
            .iter()
            .enumerate()
            .map(|(i, syms)| {
                let emb = &self.embeddings[i];
                let mut noise_rng = rng.fork(i as u64 + 1);
                let mut m = Matrix::zeros(n, emb.cols());
                for (r, &s) in syms.iter().enumerate() {
                    for (dst, &e) in m.row_mut(r).iter_mut().zip(emb.row(s)) {
                        *dst = e + noise_sigma * noise_rng.normal();
                    }
                }
                m
            })
            .collect();
        Ok(SampledChain {
            labels,
            symbols,
            features,
        })
    }
}

/// Stage-by-stage sample of a pipeline; every stage shares `labels`.
#[derive(Clone, Debug)]
pub struct SampledChain {
    pub labels: Vec<usize>,
    pub symbols: Vec<Vec<usize>>,
    pub features: Vec<Matrix>,
}

fn random_simplex(k: usize, rng: &mut Rng) -> Vec<f64> {
    // squared exponentials sharpen the rows so chains keep some information
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            let e = -math::ln(1.0 - rng.uniform());
            e * e + 1e-3
        })
        .collect();
    let s: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / s).collect();
    // put the rounding residue on the largest entry
    let resid = 1.0 - p.iter().sum::<f64>();
    let imax = p
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > p[best] { i } else { best });
    p[imax] += resid;
    p
}

/// Exact `I(Y; H^i)` for `i = 0 … L` and the monotonicity verdict.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DpiAudit {
    pub label_entropy: f64,
    pub mi: Vec<f64>,
    /// Stages `i` where `I(Y;H^i) > I(Y;H^{i-1}) + 1e-12`.
    pub violations: Vec<usize>,
    pub monotone: bool,
    /// False when the input already loses label information,
    /// `I(Y;X) < H(Y)`; "fraction of H(Y) retrieved" readings then
    /// understate what is recoverable.
    pub input_retains_label: bool,
}

pub fn dpi_audit(spec: &PipelineSpec) -> DpiAudit {
    let mi: Vec<f64> = (0..=spec.num_layers())
        .map(|i| exact_mi(&spec.joint(i).expect("stage index in range")))
        .collect();
    let violations: Vec<usize> = (1..mi.len()).filter(|&i| mi[i] > mi[i - 1] + 1e-12).collect();
    let h_y = spec.label_entropy();
    DpiAudit {
        label_entropy: h_y,
        input_retains_label: mi[0] >= h_y - 1e-12,
        monotone: violations.is_empty(),
        violations,
        mi,
    }
}

/// Features and labels of stage `layer`, drawn as in
/// [`PipelineSpec::sample_chain`].
pub fn sample_dataset(
    spec: &PipelineSpec,
    layer: usize,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    if layer > spec.num_layers() {
        return Err(contract(format!("layer {layer} outside pipeline")));
    }
    let mut chain = spec.sample_chain(n, noise_sigma, seed)?;
    Ok((chain.features.swap_remove(layer), chain.labels))
}

/// Samples stage 0 with noise, then computes every later stage by running
/// the network, so layer `i+1` features are exactly `f^{i+1}` of layer `i`.
pub fn sample_through_network(
    spec: &PipelineSpec,
    network: &ToyNetwork,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Vec<Matrix>, Vec<usize>)> {
    if network.depth() != spec.num_layers() {
        return Err(shape(format!(
            "network depth {} differs from pipeline depth {}",
            network.depth(),
            spec.num_layers()
        )));
    }
    let (x, labels) = sample_dataset(spec, 0, n, noise_sigma, seed)?;
    let mut layers = vec![x];
    for l in network.layers() {
        let next = l.forward(layers.last().expect("non-empty"))?;
        layers.push(next);
    }
    Ok((layers, labels))
}

/// Fixed construction whose linear separability peaks in the middle while
/// exact MI never increases.
#[derive(Clone, Debug, PartialEq)]
pub struct PeakPipeline {
    pub spec: PipelineSpec,
    pub network: ToyNetwork,
}

/// Version tag of the frozen constants in [`build_peak_pipeline`].
pub const PEAK_PIPELINE_VERSION: u32 = 1;

/// The four stages are:
///
/// 0. `X ∈ {(1,1), (−1,−1)}` for class 0 and `{(1,−1), (−1,1)}` for
///    class 1 (XOR corners, not linearly separable);
/// 1. `tanh(x)` per coordinate: still XOR;
/// 2. four tanh units `tanh(±2(h₁ + h₂) − 1.5)`, `tanh(±2(h₁ − h₂) − 1.5)`;
///    classes become linearly separable;
/// 3. one unit `tanh(g₁ − g₂ + g₃ − g₄)`, whose sign is the sign of
///    `x₁` for both classes, so the label is lost.
///
/// Exact `I(Y; H^i)` is `[ln 2, ln 2, ln 2, 0]`.
pub fn build_peak_pipeline() -> PeakPipeline {
    const SHARPNESS: f64 = 2.0;
    const OFFSET: f64 = 1.5;

    let corners = Matrix::from_rows(&[[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]]).expect("static");
    let layer1 = DenseLayer::new(Matrix::identity(2), Matrix::zeros(1, 2), Activation::Tanh).expect("static");
    let layer2 = DenseLayer::new(
        Matrix::from_rows(&[
            [SHARPNESS, SHARPNESS],
            [-SHARPNESS, -SHARPNESS],
            [SHARPNESS, -SHARPNESS],
            [-SHARPNESS, SHARPNESS],
        ])
        .expect("static"),
        Matrix::from_rows(&[[-OFFSET; 4]]).expect("static"),
        Activation::Tanh,
    )
    .expect("static");
    let layer3 = DenseLayer::new(
        Matrix::from_rows(&[[1.0, -1.0, 1.0, -1.0]]).expect("static"),
        Matrix::zeros(1, 1),
        Activation::Tanh,
    )
    .expect("static");
    let network = ToyNetwork::from_layers(vec![layer1, layer2, layer3]).expect("static");

    let stage1 = network.forward_prefix(&corners, 1).expect("static");
    let stage2 = network.forward_prefix(&corners, 2).expect("static");
    let stage3_all = network.forward(&corners).expect("static");
    // corners 0 and 2 share the positive output, 1 and 3 the negative one
    let stage3 = stage3_all.select_rows(&[0, 1]);

    let identity4 = Matrix::identity(4);
    let collapse = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).expect("static");
    let emission = Matrix::from_rows(&[[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]]).expect("static");
    let spec = PipelineSpec::new(
        vec![0.5, 0.5],
        emission,
        vec![identity4.clone(), identity4, collapse],
        vec![corners, stage1, stage2, stage3],
        u64::from(PEAK_PIPELINE_VERSION),
    )
    .expect("static");
    PeakPipeline { spec, network }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarginDatasetSpec {
    pub n_per_class: usize,
    pub dim: usize,
    /// Separator direction; not normalised.
    pub w: Vec<f64>,
    pub b: f64,
    /// Functional margin of `(w, b)`.
    pub d: f64,
    /// Points sit at functional distance in `[spread, 2·spread)` beyond
    /// their side of the band.
    pub spread: f64,
    pub seed: u64,
}

impl MarginDatasetSpec {
    pub const DEFAULT_SPREAD: f64 = 0.05;

    /// Random Gaussian `w` and `b` drawn from `seed`.
    pub fn random(n_per_class: usize, dim: usize, d: f64, seed: u64) -> Self {
        let mut rng = Rng::new(seed).fork(0x6d61_7267);
        let w = (0..dim).map(|_| rng.normal()).collect();
        let b = rng.normal();
        Self {
            n_per_class,
            dim,
            w,
            b,
            d,
            spread: Self::DEFAULT_SPREAD,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MarginDataset {
    /// Class 0 rows first, then class 1.
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub w: Vec<f64>,
    pub b: f64,
    pub d: f64,
    /// `d / ‖w‖`.
    pub geometric_margin: f64,
}

/// Balanced binary data with `w·x + b > 0` on class 0 and `w·x + b < −d`
/// on class 1. Point placement does not depend on `d`, so datasets that
/// differ only in `d` share their geometry.
pub fn generate_margin_dataset(spec: &MarginDatasetSpec) -> Result<MarginDataset> {
    if !(spec.d >= 0.0) || !spec.d.is_finite() {
        return Err(contract(format!(
            "margin must be finite and non-negative, got {}",
            spec.d
        )));
    }
    if !(spec.spread > 0.0) || !spec.spread.is_finite() {
        return Err(contract("placement spread must be positive"));
    }
    if spec.dim == 0 || spec.w.len() != spec.dim || spec.n_per_class == 0 {
        return Err(contract("margin dataset needs dim ≥ 1, n ≥ 1 and |w| = dim"));
    }
    let w_norm2 = dot(&spec.w, &spec.w);
    if !(w_norm2 > 0.0) || !spec.b.is_finite() {
        return Err(contract("separator w must be non-zero and b finite"));
    }
    let mut rng = Rng::new(spec.seed);
    let n = spec.n_per_class;
    let mut features = Matrix::zeros(2 * n, spec.dim);
    let mut labels = Vec::with_capacity(2 * n);
    for class in 0..2 {
        for k in 0..n {
            let row = features.row_mut(class * n + k);
            row.iter_mut().for_each(|v| *v = rng.normal());
            let offset = spec.spread * (1.0 + rng.uniform());
            let target = if class == 0 { offset } else { -spec.d - offset };
            let along = dot(row, &spec.w) / w_norm2;
            let shift = (target - spec.b) / w_norm2;
            for (x, &wi) in row.iter_mut().zip(&spec.w) {
                *x += (shift - along) * wi;
            }
            labels.push(class);
        }
    }
    for (r, &y) in labels.iter().enumerate() {
        let f = dot(features.row(r), &spec.w) + spec.b;
        let ok = if y == 0 { f > 0.0 } else { f < -spec.d };
        if !ok {
            return Err(Error::Contract(format!(
                "generated row {r} violates the margin constraint (f = {f})"
            )));
        }
    }
    Ok(MarginDataset {
        features,
        labels,
        w: spec.w.clone(),
        b: spec.b,
        d: spec.d,
        geometric_margin: spec.d / math::sqrt(w_norm2),
    })
}

/// `I(X; Y) = H(Y) = ln 2` for any balanced dataset whose classes never
/// share a feature vector; each row is treated as its own symbol.
pub fn empirical_mi_distinct_rows(labels: &[usize], num_classes: usize) -> Result<f64> {
    let rows: Vec<usize> = (0..labels.len()).collect();
    Ok(exact_mi(&JointDistribution::from_pairs(
        &rows,
        labels,
        labels.len(),
        num_classes,
    )?))
}
