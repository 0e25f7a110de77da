//! Fully-connected ReLU networks: specification, initialization, forward
//! evaluation, activation patterns and symbolic affine propagation.
//!
//! A network with hidden sizes `[n1, …, nr]` has `r` ReLU layers followed
//! by one linear output layer producing raw class logits. Weights are stored
//! row-major as `out × in` matrices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectified linear unit.
#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Derivative of [`relu`]; zero at the kink.
#[inline]
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl NetSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        NetSpec {
            input_dim,
            hidden,
            output_dim,
        }
    }

    /// Two inputs, `classes` outputs: the shape of every 2D experiment.
    pub fn planar(hidden: &[usize], classes: usize) -> Self {
        NetSpec::new(2, hidden.to_vec(), classes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be >= 1".into()));
        }
        if self.output_dim == 0 {
            return Err(Error::InvalidSpec("output_dim must be >= 1".into()));
        }
        if let Some(i) = self.hidden.iter().position(|&n| n == 0) {
            return Err(Error::InvalidSpec(format!("hidden layer {i} has zero width")));
        }
        Ok(())
    }

    /// Total number of hidden ReLU neurons.
    pub fn neuron_count(&self) -> usize {
        self.hidden.iter().sum()
    }

    /// `(fan_out, fan_in)` of every affine layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input_dim;
        for &n in &self.hidden {
            shapes.push((n, fan_in));
            fan_in = n;
        }
        shapes.push((self.output_dim, fan_in));
        shapes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Weights ~ N(0, 2/fan_in), biases zero.
    HeNormal,
    /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    UniformFanin,
}

/// Initialization variant plus the seed of its ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    pub seed: u64,
}

impl InitScheme {
    pub fn he_normal(seed: u64) -> Self {
        InitScheme {
            kind: InitKind::HeNormal,
            seed,
        }
    }

    pub fn uniform_fanin(seed: u64) -> Self {
        InitScheme {
            kind: InitKind::UniformFanin,
            seed,
        }
    }
}

/// One affine layer, `weights` row-major `rows × cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.cols..(row + 1) * self.cols]
    }

    /// `W x + b`
    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.bias
                .iter()
                .enumerate()
                .map(|(r, b)| b + dot(self.row(r), x)),
        );
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weights and biases of a network. `layers` holds the hidden layers in
/// order followed by the linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub spec: NetSpec,
    pub layers: Vec<Layer>,
}

impl NetworkParams {
    pub fn zeros(spec: &NetSpec) -> Self {
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(r, c)| Layer::zeros(r, c))
            .collect();
        NetworkParams {
            spec: spec.clone(),
            layers,
        }
    }

    /// Build from explicit layers, checking that shapes chain with `spec`.
    pub fn from_layers(spec: NetSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::InvalidSpec(format!(
                "expected {} layers, got {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (i, ((r, c), l)) in shapes.iter().zip(&layers).enumerate() {
            if l.rows != *r || l.cols != *c || l.weights.len() != r * c || l.bias.len() != *r {
                return Err(Error::InvalidSpec(format!(
                    "layer {i} shape mismatch: expected {r}x{c}"
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("layer {i} has non-finite entries")));
            }
        }
        Ok(NetworkParams { spec, layers })
    }

    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn output_layer(&self) -> &Layer {
        self.layers.last().expect("network has an output layer")
    }

    pub fn neuron_count(&self) -> usize {
        self.spec.neuron_count()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Class logits at `x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in self.hidden_layers() {
            layer.apply(&cur, &mut next);
            next.iter_mut().for_each(|v| *v = relu(*v));
            std::mem::swap(&mut cur, &mut next);
        }
        self.output_layer().apply(&cur, &mut next);
        Ok(next)
    }

    /// Pre-activations of every hidden layer plus the logits.
    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let mut cur = x.to_vec();
        for layer in self.hidden_layers() {
            let mut z = Vec::new();
            layer.apply(&cur, &mut z);
            cur = z.iter().map(|&v| relu(v)).collect();
            pre.push(z);
        }
        let mut logits = Vec::new();
        self.output_layer().apply(&cur, &mut logits);
        Ok(ForwardTrace { pre, logits })
    }

    pub fn activation_pattern(&self, x: &[f64]) -> Result<ActivationPattern> {
        let trace = self.forward_trace(x)?;
        Ok(ActivationPattern::from_bits(
            trace.pre.iter().flatten().map(|&z| z > 0.0).collect(),
        ))
    }

    /// Affine functions (in input coordinates) of every hidden neuron's
    /// pre-activation and of every logit, with ReLUs frozen to `pattern`.
    pub fn propagate_affine(&self, pattern: &ActivationPattern) -> Result<AffinePropagation> {
        if pattern.len() != self.neuron_count() {
            return Err(Error::DimensionMismatch {
                expected: self.neuron_count(),
                actual: pattern.len(),
            });
        }
        let mut post = AffineFunction::identity_map(self.spec.input_dim);
        let mut neurons = Vec::with_capacity(self.spec.hidden.len());
        let mut offset = 0;
        for layer in self.hidden_layers() {
            let pre = compose_layer(layer, &post);
            post = pre
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    if pattern.get(offset + i) {
                        f.clone()
                    } else {
                        AffineFunction::zero(self.spec.input_dim)
                    }
                })
                .collect();
            offset += layer.rows;
            neurons.push(pre);
        }
        let logits = compose_layer(self.output_layer(), &post);
        Ok(AffinePropagation { neurons, logits })
    }
}

/// Result of [`NetworkParams::forward_trace`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pre: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

/// Result of [`NetworkParams::propagate_affine`].
#[derive(Debug, Clone)]
pub struct AffinePropagation {
    /// Per hidden layer, the pre-activation affine function of each neuron.
    pub neurons: Vec<Vec<AffineFunction>>,
    pub logits: Vec<AffineFunction>,
}

/// `W · post + b` where `post` are affine functions of the input.
pub fn compose_layer(layer: &Layer, post: &[AffineFunction]) -> Vec<AffineFunction> {
    debug_assert_eq!(layer.cols, post.len());
    let dim = post.first().map_or(0, |f| f.coeffs.len());
    (0..layer.rows)
        .map(|r| {
            let mut out = AffineFunction::constant(dim, layer.bias[r]);
            for (w, f) in layer.row(r).iter().zip(post) {
                if *w == 0.0 {
                    continue;
                }
                for (o, a) in out.coeffs.iter_mut().zip(&f.coeffs) {
                    *o += w * a;
                }
                out.offset += w * f.offset;
            }
            out
        })
        .collect()
}

/// One bit per hidden neuron, layer-major; `true` means pre-activation > 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActivationPattern {
    bits: Vec<bool>,
}

impl ActivationPattern {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        ActivationPattern { bits }
    }

    pub fn all(value: bool, len: usize) -> Self {
        ActivationPattern {
            bits: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_active(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// `"0110…"`, layer-major.
    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self::from_bits)
    }
}

/// `x ↦ coeffs · x + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFunction {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl AffineFunction {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Self {
        AffineFunction { coeffs, offset }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        AffineFunction {
            coeffs: vec![0.0; dim],
            offset: value,
        }
    }

    /// The coordinate projections `x ↦ x_j`.
    pub fn identity_map(dim: usize) -> Vec<AffineFunction> {
        (0..dim)
            .map(|j| {
                let mut coeffs = vec![0.0; dim];
                coeffs[j] = 1.0;
                AffineFunction::new(coeffs, 0.0)
            })
            .collect()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) + self.offset
    }

    pub fn sub(&self, other: &AffineFunction) -> AffineFunction {
        AffineFunction {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
            offset: self.offset - other.offset,
        }
    }

    pub fn gradient_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Draw fresh parameters for `spec`. Draws are taken layer by layer,
/// weights row-major before biases, from a ChaCha8 stream seeded with
/// `scheme.seed`.
pub fn init_network(spec: &NetSpec, scheme: InitScheme) -> Result<NetworkParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scheme.seed);
    let mut params = NetworkParams::zeros(spec);
    for layer in &mut params.layers {
        let fan_in = layer.cols as f64;
        match scheme.kind {
            InitKind::HeNormal => {
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("finite std");
                layer.weights.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
            }
            InitKind::UniformFanin => {
                let bound = 1.0 / fan_in.sqrt();
                let uniform = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
                layer.weights.iter_mut().for_each(|w| *w = uniform.sample(&mut rng));
                layer.bias.iter_mut().for_each(|b| *b = uniform.sample(&mut rng));
            }
        }
    }
    Ok(params)
}
