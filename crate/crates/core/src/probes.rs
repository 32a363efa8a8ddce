//! Score functions `T(y, h) = onehot(y) · g(h)`.
//!
//! A probe maps a batch of representations to `C` logits; logit `y` is the
//! score of label `y`. Three families are available:
//!
//! - **linear**: `g = FC`,
//! - **mlp**: one rectifier hidden layer (default width 1000), then `FC`,
//! - **suffix**: a trainable copy of layers `i+1 … L` of a [`ToyNetwork`]
//!   followed by `FC` (fine-tuning the rest of the network as the probe).
//!
//! Parameters are stored as a flat list `[W₁, b₁, W₂, b₂, …]`, weights
//! `out × in` and biases `1 × out`, which is the layout consumed by
//! [`AdamState`](crate::numerics::AdamState). Gradients are derived by hand.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{contract, shape, Error, Result};
use crate::estimators::Objective;
use crate::numerics::{glorot_uniform, log_softmax_into, log_sum_exp_unchecked, math, Differentiable, Matrix, Rng};

pub const DEFAULT_MLP_HIDDEN: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => math::tanh(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative at pre-activation `z` with output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Affine map followed by an elementwise nonlinearity.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseLayer {
    /// `out × in`.
    pub weight: Matrix,
    /// `1 × out`.
    pub bias: Matrix,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Matrix, activation: Activation) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weight.rows() {
            return Err(shape(format!(
                "bias {:?} for weight {:?}",
                bias.shape(),
                weight.shape()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(dense_forward(x, &self.weight, &self.bias, self.activation)?.1)
    }
}

/// Frozen base network `f^{1…L}`; layer `i` maps `dims[i-1] → dims[i]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyNetwork {
    layers: Vec<DenseLayer>,
}

impl ToyNetwork {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(contract("a network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(shape(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    i + 1,
                    pair[0].output_dim(),
                    i + 2,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// `depth` identity layers of width `dim` with identity activation.
    pub fn identity(dim: usize, depth: usize) -> Result<Self> {
        let layers = (0..depth)
            .map(|_| DenseLayer::new(Matrix::identity(dim), Matrix::zeros(1, dim), Activation::Identity))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// `[d₀, d₁, …, d_L]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].input_dim()];
        dims.extend(self.layers.iter().map(DenseLayer::output_dim));
        dims
    }

    /// Applies layers `start+1 … end`, i.e. `f^{start+1…end}`.
    pub fn forward_range(&self, x: &Matrix, start: usize, end: usize) -> Result<Matrix> {
        if start > end || end > self.depth() {
            return Err(contract(format!(
                "layer range {start}..{end} outside network of depth {}",
                self.depth()
            )));
        }
        let mut h = x.clone();
        for layer in &self.layers[start..end] {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// `f^{1…i}(x)`; `i = 0` returns the input unchanged.
    pub fn forward_prefix(&self, x: &Matrix, i: usize) -> Result<Matrix> {
        self.forward_range(x, 0, i)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.forward_range(x, 0, self.depth())
    }
}

/// Random tanh network with Glorot-uniform weights and zero biases.
pub fn build_toy_network(dims: &[usize], seed: u64) -> Result<ToyNetwork> {
    if dims.len() < 2 {
        return Err(contract("a network needs at least an input and an output width"));
    }
    if dims.contains(&0) {
        return Err(contract(format!("zero-width layer in {dims:?}")));
    }
    let mut rng = Rng::new(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            DenseLayer::new(
                glorot_uniform(w[1], w[0], &mut rng),
                Matrix::zeros(1, w[1]),
                Activation::Tanh,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ToyNetwork::from_layers(layers)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProbeKind {
    Linear,
    Mlp,
    Suffix,
}

impl ProbeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeKind::Linear => "linear",
            ProbeKind::Mlp => "mlp",
            ProbeKind::Suffix => "suffix",
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ProbeKind::Linear),
            "mlp" => Ok(ProbeKind::Mlp),
            "suffix" | "finetune" | "fine-tune" => Ok(ProbeKind::Suffix),
            other => Err(contract(format!("unknown probe kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeSpec {
    pub kind: ProbeKind,
    pub input_dim: usize,
    pub num_classes: usize,
    pub mlp_hidden: usize,
    /// Layer `i` whose output the suffix probe reads; suffix only.
    pub suffix_start_layer: Option<usize>,
    pub seed: u64,
}

impl ProbeSpec {
    pub fn linear(input_dim: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            kind: ProbeKind::Linear,
            input_dim,
            num_classes,
            mlp_hidden: DEFAULT_MLP_HIDDEN,
            suffix_start_layer: None,
            seed,
        }
    }

    pub fn mlp(input_dim: usize, num_classes: usize, hidden: usize, seed: u64) -> Self {
        Self {
            kind: ProbeKind::Mlp,
            mlp_hidden: hidden,
            ..Self::linear(input_dim, num_classes, seed)
        }
    }

    /// Suffix probe reading the output of layer `layer` of `network`.
    pub fn suffix(network: &ToyNetwork, layer: usize, num_classes: usize, seed: u64) -> Self {
        let input_dim = network.dims().get(layer).copied().unwrap_or(0);
        Self {
            kind: ProbeKind::Suffix,
            suffix_start_layer: Some(layer),
            ..Self::linear(input_dim, num_classes, seed)
        }
    }

    /// Spec of `kind` for features of layer `layer`.
    pub fn for_layer(kind: ProbeKind, layer: usize, input_dim: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            kind,
            suffix_start_layer: (kind == ProbeKind::Suffix).then_some(layer),
            ..Self::linear(input_dim, num_classes, seed)
        }
    }
}

/// Loss minimised by a probe update. MINE and InfoNCE are maximised
/// objectives, so their losses are the negated estimates.
#[derive(Clone, Copy, Debug)]
pub enum Loss<'a> {
    CrossEntropy,
    /// `marginal_labels[i]` is paired with row `i` to sample the product
    /// of marginals (typically a shuffle of the batch labels).
    Mine {
        marginal_labels: &'a [usize],
    },
    InfoNce,
}

impl Loss<'_> {
    pub fn objective(&self) -> Objective {
        match self {
            Loss::CrossEntropy => Objective::CrossEntropy,
            Loss::Mine { .. } => Objective::Mine,
            Loss::InfoNce => Objective::InfoNce,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    pub loss: f64,
    pub grads: Vec<Matrix>,
}

#[derive(Clone, Debug)]
pub struct ProbeState {
    pub spec: ProbeSpec,
    pub params: Vec<Matrix>,
    activations: Vec<Activation>,
    base: Option<Arc<ToyNetwork>>,
}

impl ProbeState {
    /// Freshly initialised probe. Suffix probes require `base`; their
    /// trainable layers start from the base network's own weights.
    pub fn new(spec: ProbeSpec, base: Option<Arc<ToyNetwork>>) -> Result<Self> {
        if spec.num_classes < 2 {
            return Err(contract(format!("need at least 2 classes, got {}", spec.num_classes)));
        }
        if spec.input_dim == 0 {
            return Err(contract("probe input dimension must be positive"));
        }
        let mut rng = Rng::new(spec.seed);
        let c = spec.num_classes;
        let (params, activations) = match spec.kind {
            ProbeKind::Linear => (
                vec![glorot_uniform(c, spec.input_dim, &mut rng), Matrix::zeros(1, c)],
                vec![Activation::Identity],
            ),
            ProbeKind::Mlp => {
                let hidden = spec.mlp_hidden;
                if hidden == 0 {
                    return Err(contract("MLP hidden width must be positive"));
                }
                (
                    vec![
                        glorot_uniform(hidden, spec.input_dim, &mut rng),
                        Matrix::zeros(1, hidden),
                        glorot_uniform(c, hidden, &mut rng),
                        Matrix::zeros(1, c),
                    ],
                    vec![Activation::Relu, Activation::Identity],
                )
            }
            ProbeKind::Suffix => {
                let net = base.as_ref().ok_or_else(|| {
                    contract("suffix probes need the base network; none is attached to these features")
                })?;
                let layer = spec
                    .suffix_start_layer
                    .ok_or_else(|| contract("suffix probe without a start layer"))?;
                if layer > net.depth() {
                    return Err(contract(format!(
                        "suffix start layer {layer} beyond network depth {}",
                        net.depth()
                    )));
                }
                let dims = net.dims();
                if dims[layer] != spec.input_dim {
                    return Err(shape(format!(
                        "layer {layer} has width {}, probe expects {}",
                        dims[layer], spec.input_dim
                    )));
                }
                let mut params = Vec::new();
                let mut acts = Vec::new();
                for l in &net.layers()[layer..] {
                    params.push(l.weight.clone());
                    params.push(l.bias.clone());
                    acts.push(l.activation);
                }
                params.push(glorot_uniform(c, dims[net.depth()], &mut rng));
                params.push(Matrix::zeros(1, c));
                acts.push(Activation::Identity);
                (params, acts)
            }
        };
        let base = if spec.kind == ProbeKind::Suffix { base } else { None };
        Ok(Self {
            spec,
            params,
            activations,
            base,
        })
    }

    /// Linear probe with explicit `C × d` weight and length-`C` bias.
    pub fn linear_with(weight: Matrix, bias: &[f64]) -> Result<Self> {
        let spec = ProbeSpec::linear(weight.cols(), weight.rows(), 0);
        let mut state = Self::new(spec, None)?;
        let bias = Matrix::from_vec(1, bias.len(), bias.to_vec())?;
        if bias.cols() != weight.rows() {
            return Err(shape("bias length differs from the number of classes"));
        }
        state.params = vec![weight, bias];
        Ok(state)
    }

    /// MLP of width `hidden ≥ 2d` computing exactly the same logits as
    /// `linear`, via pass-through units `relu(x) − relu(−x) = x`.
    pub fn mlp_from_linear(linear: &ProbeState, hidden: usize) -> Result<Self> {
        if linear.spec.kind != ProbeKind::Linear {
            return Err(contract("expected a linear probe"));
        }
        let d = linear.spec.input_dim;
        let c = linear.spec.num_classes;
        if hidden < 2 * d {
            return Err(contract(format!("hidden width {hidden} < 2 × input dim {d}")));
        }
        let (w, b) = (&linear.params[0], &linear.params[1]);
        let mut w1 = Matrix::zeros(hidden, d);
        let mut w2 = Matrix::zeros(c, hidden);
        for k in 0..d {
            w1.set(2 * k, k, 1.0);
            w1.set(2 * k + 1, k, -1.0);
            for class in 0..c {
                w2.set(class, 2 * k, w.get(class, k));
                w2.set(class, 2 * k + 1, -w.get(class, k));
            }
        }
        let spec = ProbeSpec::mlp(d, c, hidden, linear.spec.seed);
        Ok(Self {
            spec,
            params: vec![w1, Matrix::zeros(1, hidden), w2, b.clone()],
            activations: vec![Activation::Relu, Activation::Identity],
            base: None,
        })
    }

    pub fn base_network(&self) -> Option<&Arc<ToyNetwork>> {
        self.base.as_ref()
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Matrix::len).sum()
    }

    /// Replaces the parameters, checking shapes and finiteness.
    pub fn set_params(&mut self, params: Vec<Matrix>) -> Result<()> {
        check_param_shapes(&self.params, &params)?;
        if !params.iter().all(Matrix::is_finite) {
            return Err(Error::NonFinite("probe parameters"));
        }
        self.params = params;
        Ok(())
    }

    fn check_input(&self, h: &Matrix) -> Result<()> {
        if h.cols() != self.spec.input_dim {
            return Err(shape(format!(
                "probe expects {} input features, got {}",
                self.spec.input_dim,
                h.cols()
            )));
        }
        Ok(())
    }

    pub fn logits(&self, h: &Matrix) -> Result<Matrix> {
        self.logits_with(&self.params, h)
    }

    fn logits_with(&self, params: &[Matrix], h: &Matrix) -> Result<Matrix> {
        self.check_input(h)?;
        let mut x = h.clone();
        for (l, act) in self.activations.iter().enumerate() {
            x = dense_forward(&x, &params[2 * l], &params[2 * l + 1], *act)?.1;
        }
        Ok(x)
    }

    /// `T(y, h)` for a single representation.
    pub fn score(&self, y: usize, h: &[f64]) -> Result<f64> {
        let m = Matrix::from_vec(1, h.len(), h.to_vec())?;
        let logits = self.logits(&m)?;
        if y >= logits.cols() {
            return Err(contract(format!("label {y} outside {} classes", logits.cols())));
        }
        Ok(logits.get(0, y))
    }

    /// Smallest `|pre-activation|` over all rectifier units on `h`; `None`
    /// when the probe has no rectifiers. Finite-difference checks are
    /// only meaningful away from the kink at zero.
    pub fn min_rectifier_margin(&self, h: &Matrix) -> Result<Option<f64>> {
        self.check_input(h)?;
        let mut x = h.clone();
        let mut margin: Option<f64> = None;
        for (l, act) in self.activations.iter().enumerate() {
            let (z, a) = dense_forward(&x, &self.params[2 * l], &self.params[2 * l + 1], *act)?;
            if *act == Activation::Relu {
                let m = z.as_slice().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                margin = Some(margin.map_or(m, |old: f64| old.min(m)));
            }
            x = a;
        }
        Ok(margin)
    }

    pub fn loss(&self, h: &Matrix, labels: &[usize], loss: Loss<'_>) -> Result<f64> {
        self.loss_with(&self.params, h, labels, loss)
    }

    fn loss_with(&self, params: &[Matrix], h: &Matrix, labels: &[usize], loss: Loss<'_>) -> Result<f64> {
        let logits = self.logits_with(params, h)?;
        Ok(loss_and_logit_grad(&logits, labels, loss)?.0)
    }

    pub fn backward(&self, h: &Matrix, labels: &[usize], loss: Loss<'_>) -> Result<Gradients> {
        self.backward_with(&self.params, h, labels, loss)
    }

    fn backward_with(&self, params: &[Matrix], h: &Matrix, labels: &[usize], loss: Loss<'_>) -> Result<Gradients> {
        self.check_input(h)?;
        let depth = self.activations.len();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        let mut x = h.clone();
        for (l, act) in self.activations.iter().enumerate() {
            let (z, a) = dense_forward(&x, &params[2 * l], &params[2 * l + 1], *act)?;
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        let (value, mut upstream) = loss_and_logit_grad(&x, labels, loss)?;

        let mut grads: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        let mut output = x;
        for l in (0..depth).rev() {
            let act = self.activations[l];
            // upstream becomes dL/dz
            for ((g, &z), &a) in upstream
                .as_mut_slice()
                .iter_mut()
                .zip(pre[l].as_slice())
                .zip(output.as_slice())
            {
                *g *= act.derivative(z, a);
            }
            let input = &inputs[l];
            let w = &params[2 * l];
            let (dw, rest) = grads[2 * l..].split_at_mut(1);
            let dw = &mut dw[0];
            let db = &mut rest[0];
            for (r, dz) in upstream.row_iter().enumerate() {
                let xr = input.row(r);
                for (o, &g) in dz.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    db.as_mut_slice()[o] += g;
                    for (dst, &xv) in dw.row_mut(o).iter_mut().zip(xr) {
                        *dst += g * xv;
                    }
                }
            }
            if l > 0 {
                let downstream = upstream.matmul(w)?;
                output = inputs[l].clone();
                upstream = downstream;
            }
        }
        Ok(Gradients { loss: value, grads })
    }
}

fn check_param_shapes(expected: &[Matrix], got: &[Matrix]) -> Result<()> {
    if expected.len() != got.len() || expected.iter().zip(got).any(|(a, b)| a.shape() != b.shape()) {
        return Err(shape("parameter set does not match the probe architecture"));
    }
    Ok(())
}

/// Returns `(z, act(z))` for `z = x Wᵀ + b`.
fn dense_forward(x: &Matrix, w: &Matrix, b: &Matrix, act: Activation) -> Result<(Matrix, Matrix)> {
    let mut z = x.matmul_transposed(w)?;
    z.add_row(b.as_slice())?;
    let a = if act == Activation::Identity {
        z.clone()
    } else {
        z.map(|v| act.apply(v))
    };
    Ok((z, a))
}

/// Loss value and its gradient with respect to the logits.
pub fn loss_and_logit_grad(logits: &Matrix, labels: &[usize], loss: Loss<'_>) -> Result<(f64, Matrix)> {
    let (b, c) = logits.shape();
    if labels.len() != b {
        return Err(shape(format!("{b} logit rows for {} labels", labels.len())));
    }
    if b == 0 {
        return Err(contract("loss on an empty batch"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(contract(format!("label {bad} outside {c} classes")));
    }
    if !logits.is_finite() {
        return Err(Error::NonFinite("logits"));
    }
    let inv_b = 1.0 / b as f64;
    let mut grad = Matrix::zeros(b, c);
    let mut logp = vec![0.0; c];
    match loss {
        Loss::CrossEntropy => {
            let mut nll = 0.0;
            for (i, (row, &y)) in logits.row_iter().zip(labels).enumerate() {
                log_softmax_into(row, &mut logp);
                nll -= logp[y];
                let g = grad.row_mut(i);
                for (gv, &lp) in g.iter_mut().zip(&logp) {
                    *gv = math::exp(lp) * inv_b;
                }
                g[y] -= inv_b;
            }
            Ok((nll * inv_b, grad))
        }
        Loss::Mine { marginal_labels } => {
            if marginal_labels.len() != b {
                return Err(shape("MINE marginal labels must match the batch"));
            }
            if let Some(&bad) = marginal_labels.iter().find(|&&y| y >= c) {
                return Err(contract(format!("marginal label {bad} outside {c} classes")));
            }
            let joint: f64 = logits.row_iter().zip(labels).map(|(r, &y)| r[y]).sum::<f64>() * inv_b;
            let marg: Vec<f64> = logits.row_iter().zip(marginal_labels).map(|(r, &y)| r[y]).collect();
            let lse = log_sum_exp_unchecked(&marg);
            let value = joint - lse + math::ln(b as f64);
            for i in 0..b {
                let g = grad.row_mut(i);
                g[labels[i]] -= inv_b;
                g[marginal_labels[i]] += math::exp(marg[i] - lse);
            }
            Ok((-value, grad))
        }
        Loss::InfoNce => {
            // s_ij = logits[i][y_j]; the softmax over j groups by class.
            let mut counts = vec![0usize; c];
            for &y in labels {
                counts[y] += 1;
            }
            let log_counts: Vec<Option<f64>> = counts.iter().map(|&n| (n > 0).then(|| math::ln(n as f64))).collect();
            let log_b = math::ln(b as f64);
            let mut total = 0.0;
            let mut shifted = Vec::with_capacity(c);
            for (i, (row, &y)) in logits.row_iter().zip(labels).enumerate() {
                shifted.clear();
                shifted.extend(row.iter().zip(&log_counts).filter_map(|(&t, lc)| lc.map(|lc| t + lc)));
                let lse = log_sum_exp_unchecked(&shifted);
                total += row[y] - lse + log_b;
                let g = grad.row_mut(i);
                for (k, gv) in g.iter_mut().enumerate() {
                    if let Some(lc) = log_counts[k] {
                        *gv = math::exp(row[k] + lc - lse) * inv_b;
                    }
                }
                g[y] -= inv_b;
            }
            Ok((-total * inv_b, grad))
        }
    }
}

/// Free-function form of [`ProbeState::logits`].
pub fn probe_logits(state: &ProbeState, h: &Matrix) -> Result<Matrix> {
    state.logits(h)
}

/// Free-function form of [`ProbeState::backward`].
pub fn probe_backward(state: &ProbeState, h: &Matrix, labels: &[usize], loss: Loss<'_>) -> Result<Gradients> {
    state.backward(h, labels, loss)
}

/// A probe's loss on a fixed batch as a function of its parameters.
pub struct ProbeObjective<'a> {
    pub state: &'a ProbeState,
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub loss: Loss<'a>,
}

impl Differentiable for ProbeObjective<'_> {
    fn value(&mut self, params: &[Matrix]) -> Result<f64> {
        check_param_shapes(&self.state.params, params)?;
        self.state.loss_with(params, self.features, self.labels, self.loss)
    }

    fn gradient(&mut self, params: &[Matrix]) -> Result<Vec<Matrix>> {
        check_param_shapes(&self.state.params, params)?;
        Ok(self
            .state
            .backward_with(params, self.features, self.labels, self.loss)?
            .grads)
    }
}
