//! Unrolled generator: transmitter module `H`, sub-generators `G_alpha`
//! and `G_n`, and their composition per signal model.

mod generator;
mod nonlinear;
mod prior;
mod subgen;

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use radiogan_autodiff::{NumericalLimit, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sim::SignalModel;

pub use generator::{GenForward, GenInput, LatentDraw, UnrolledGenerator};
pub use nonlinear::{LabelSelector, NonlinearTransform};
pub use prior::PurePrior;
pub use subgen::SubGenerator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "H")]
    H,
    #[serde(rename = "G_alpha")]
    GAlpha,
    #[serde(rename = "G_n")]
    GN,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::H, Component::GAlpha, Component::GN];

    pub fn name(self) -> &'static str {
        match self {
            Component::H => "H",
            Component::GAlpha => "G_alpha",
            Component::GN => "G_n",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| CoreError::format(format!("unknown component '{name}'")))
    }

    /// Components present in the generator for `model`.
    pub fn for_model(model: SignalModel) -> Vec<Component> {
        let mut out = Vec::with_capacity(3);
        if model.has_transmitter() {
            out.push(Component::H);
        }
        if model.has_fading() {
            out.push(Component::GAlpha);
        }
        out.push(Component::GN);
        out
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// All parameters zero: under limits symmetric about zero `H` is the
    /// identity and sub-generators emit 0.
    /// Hidden layers cannot leave zero under gradient descent, so this is
    /// for structural checks only.
    Zero,
    Glorot,
    /// Glorot hidden layers and an output layer that emits exactly zero
    /// offset: `H` starts as the identity, sub-generators at 0, and all
    /// layers still receive gradient.
    GlorotZeroOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub kind: SignalModel,
    /// Number of `H` branches; more than one selects by device label.
    pub num_devices: usize,
    pub amplitude_limit: (f64, f64),
    pub phase_limit: (f64, f64),
    pub h_hidden: Vec<usize>,
    pub sub_hidden: Vec<usize>,
    /// Latent dimension of each marginal MLP; a sub-generator takes twice this.
    pub latent_half: usize,
    pub sub_limit: (f64, f64),
    pub init: InitMode,
}

impl GeneratorConfig {
    pub fn new(kind: SignalModel) -> Self {
        GeneratorConfig {
            kind,
            num_devices: 1,
            amplitude_limit: (-0.5, 0.5),
            phase_limit: (-FRAC_PI_2, FRAC_PI_2),
            h_hidden: vec![128, 32],
            sub_hidden: vec![128, 32],
            latent_half: 8,
            sub_limit: (-2.0, 2.0),
            init: InitMode::Glorot,
        }
    }

    pub fn latent_dim(&self) -> usize {
        2 * self.latent_half
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 || self.latent_half == 0 {
            return Err(CoreError::config("device count and latent size must be positive"));
        }
        for (lo, hi) in [self.amplitude_limit, self.phase_limit, self.sub_limit] {
            if self.init == InitMode::GlorotZeroOutput && !(lo < 0.0 && hi > 0.0) {
                return Err(CoreError::config("zero-output init needs 0 inside every limit"));
            }
        }
        if self.amplitude_limit.0 < -1.0 {
            return Err(CoreError::config(
                "amplitude offset below -1 would allow negative output amplitude",
            ));
        }
        for (lo, hi) in [self.amplitude_limit, self.phase_limit, self.sub_limit] {
            NumericalLimit::new(lo, hi)?;
        }
        Ok(())
    }
}

/// A batch of complex values on a tape as separate `n x 1` parts.
#[derive(Clone, Copy)]
pub struct CVar<'t> {
    pub re: Var<'t>,
    pub im: Var<'t>,
}

impl<'t> CVar<'t> {
    pub fn constant(tape: &'t Tape, values: &[Complex64]) -> Self {
        let (re, im) = split_parts(values);
        CVar {
            re: tape.leaf(Tensor::column(&re)),
            im: tape.leaf(Tensor::column(&im)),
        }
    }

    pub fn add(self, other: CVar<'t>) -> CVar<'t> {
        CVar {
            re: self.re + other.re,
            im: self.im + other.im,
        }
    }

    pub fn mul(self, other: CVar<'t>) -> CVar<'t> {
        CVar {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    pub fn norm_sqr(self) -> Var<'t> {
        self.re.square() + self.im.square()
    }

    /// `n x 2` matrix of (I, Q) rows.
    pub fn stacked(self) -> Var<'t> {
        self.re.tape().concat_cols(&[self.re, self.im])
    }

    pub fn values(&self) -> Vec<Complex64> {
        let (re, im) = (self.re.value(), self.im.value());
        re.data()
            .iter()
            .zip(im.data())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }
}

pub(crate) fn split_parts(values: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    values.iter().map(|c| (c.re, c.im)).unzip()
}

/// `n x 2` (I, Q) matrix.
pub fn iq_matrix(values: &[Complex64]) -> Tensor {
    let data = values.iter().flat_map(|c| [c.re, c.im]).collect();
    Tensor::from_vec(values.len(), 2, data).expect("two columns per point")
}
