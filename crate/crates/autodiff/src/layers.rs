use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::AdError;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply_var(self, x: Var<'_>) -> Var<'_> {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.relu(),
            Activation::Identity => x,
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => crate::tensor::tanh(v),
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

/// Fixed affine map from tanh's `(-1, 1)` onto `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericalLimit {
    lo: f64,
    hi: f64,
}

impl NumericalLimit {
    pub fn new(lo: f64, hi: f64) -> Result<Self, AdError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(AdError::InvalidParam(format!(
                "numerical limit needs finite lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(NumericalLimit { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    fn scale_shift(&self) -> (f64, f64) {
        (0.5 * (self.hi - self.lo), 0.5 * (self.hi + self.lo))
    }

    // tanh saturates to exactly +-1 in f64, so the open interval is enforced
    // by clamping to the nearest representable interior values.
    fn interior(&self) -> (f64, f64) {
        (self.lo.next_up(), self.hi.next_down())
    }

    pub fn apply(&self, t: f64) -> f64 {
        let (s, c) = self.scale_shift();
        let (lo, hi) = self.interior();
        (s * t + c).clamp(lo, hi)
    }

    fn apply_var<'t>(&self, t: Var<'t>) -> Var<'t> {
        let (s, c) = self.scale_shift();
        let (lo, hi) = self.interior();
        t.affine(s, c).clamp(lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

/// Architecture of an [`Mlp`]: what a checkpoint needs to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub limit: Option<NumericalLimit>,
}

impl MlpSpec {
    /// Three tanh layers of 128, 32 and 1 units followed by a numerical limit.
    pub fn tanh_128_32_1(input_dim: usize, limit: NumericalLimit) -> Self {
        Self::tanh_stack(input_dim, &[128, 32], limit)
    }

    /// Tanh hidden layers of the given widths and a single limited tanh output.
    pub fn tanh_stack(input_dim: usize, hidden: &[usize], limit: NumericalLimit) -> Self {
        let mut layers: Vec<LayerSpec> = hidden
            .iter()
            .map(|&width| LayerSpec {
                width,
                activation: Activation::Tanh,
            })
            .collect();
        layers.push(LayerSpec {
            width: 1,
            activation: Activation::Tanh,
        });
        MlpSpec {
            input_dim,
            layers,
            limit: Some(limit),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.width)
    }

    /// `(rows, cols)` of every parameter tensor in declaration order.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        let mut fan_in = self.input_dim;
        let mut shapes = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            shapes.push((l.width, fan_in));
            shapes.push((1, l.width));
            fan_in = l.width;
        }
        shapes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`
    pub weights: Tensor,
    /// `1 x out`
    pub biases: Tensor,
    pub activation: Activation,
}

/// Stack of dense layers with an optional output limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// All weights and biases zero.
    pub fn zeros(spec: MlpSpec) -> Self {
        let shapes = spec.param_shapes();
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| DenseLayer {
                weights: Tensor::zeros(shapes[2 * i].0, shapes[2 * i].1),
                biases: Tensor::zeros(1, l.width),
                activation: l.activation,
            })
            .collect();
        Mlp { spec, layers }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut mlp = Self::zeros(spec);
        for layer in &mut mlp.layers {
            let (fan_out, fan_in) = layer.weights.shape();
            let bound = glorot_bound(fan_in, fan_out);
            for w in layer.weights.data_mut() {
                *w = rng.gen_range(-bound..bound);
            }
        }
        mlp
    }

    /// Rebuilds from parameter tensors in declaration order.
    pub fn from_params(spec: MlpSpec, params: Vec<Tensor>) -> Result<Self, AdError> {
        let shapes = spec.param_shapes();
        if params.len() != shapes.len() {
            return Err(AdError::Shape(format!(
                "expected {} parameter tensors, got {}",
                shapes.len(),
                params.len()
            )));
        }
        for (p, s) in params.iter().zip(&shapes) {
            if p.shape() != *s {
                return Err(AdError::Shape(format!(
                    "parameter {:?} where {:?} was expected",
                    p.shape(),
                    s
                )));
            }
        }
        let mut it = params.into_iter();
        let layers = spec
            .layers
            .iter()
            .map(|l| DenseLayer {
                weights: it.next().expect("checked length"),
                biases: it.next().expect("checked length"),
                activation: l.activation,
            })
            .collect();
        Ok(Mlp { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.biases])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.biases])
            .collect()
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.spec.param_shapes()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Registers the parameters on `tape` as leaves.
    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundMlp<'t> {
        BoundMlp {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    (
                        tape.leaf(l.weights.clone()),
                        tape.leaf(l.biases.clone()),
                        l.activation,
                    )
                })
                .collect(),
            limit: self.spec.limit,
        }
    }

    /// Records a forward pass of a batch (`n x input_dim`).
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        input: &Tensor,
    ) -> Result<(Var<'t>, BoundMlp<'t>), AdError> {
        self.check_input(input)?;
        let bound = self.bind(tape);
        let x = tape.leaf(input.clone());
        Ok((bound.forward(x), bound))
    }

    /// Forward pass without a tape.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor, AdError> {
        self.check_input(input)?;
        let mut h = input.clone();
        for l in &self.layers {
            let act = l.activation;
            h = h.matmul(&l.weights, false, true).add_row(&l.biases).map(|v| act.apply(v));
        }
        if let Some(limit) = self.spec.limit {
            h = h.map(|t| limit.apply(t));
        }
        Ok(h)
    }

    fn check_input(&self, input: &Tensor) -> Result<(), AdError> {
        if input.cols() != self.spec.input_dim {
            return Err(AdError::Shape(format!(
                "network expects {} input features, got {}",
                self.spec.input_dim,
                input.cols()
            )));
        }
        Ok(())
    }
}

/// Glorot-uniform half-width `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// An [`Mlp`] whose parameters live on a tape.
pub struct BoundMlp<'t> {
    layers: Vec<(Var<'t>, Var<'t>, Activation)>,
    limit: Option<NumericalLimit>,
}

impl<'t> BoundMlp<'t> {
    pub fn forward(&self, x: Var<'t>) -> Var<'t> {
        let mut h = x;
        for &(w, b, act) in &self.layers {
            h = act.apply_var(h.matmul_t(w, false, true).add_row(b));
        }
        match self.limit {
            Some(limit) => limit.apply_var(h),
            None => h,
        }
    }

    /// Parameter leaves in declaration order.
    pub fn params(&self) -> Vec<Var<'t>> {
        self.layers.iter().flat_map(|&(w, b, _)| [w, b]).collect()
    }
}
