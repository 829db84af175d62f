use radiogan_autodiff::{Activation, BoundMlp, LayerSpec, Mlp, MlpSpec, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Added under the square root of the gradient norm.
pub const NORM_EPS: f64 = 1e-12;

/// ReLU critic over one received point, optionally conditioned on a
/// one-hot device label appended to its input.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub mlp: Mlp,
    pub num_labels: usize,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(num_labels: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut layers: Vec<LayerSpec> = hidden
            .iter()
            .map(|&width| LayerSpec {
                width,
                activation: Activation::Relu,
            })
            .collect();
        layers.push(LayerSpec {
            width: 1,
            activation: Activation::Identity,
        });
        let spec = MlpSpec {
            input_dim: 2 + num_labels,
            layers,
            limit: None,
        };
        Discriminator {
            mlp: Mlp::glorot(spec, rng),
            num_labels,
        }
    }

    /// One-hot rows for `labels`, or `None` for an unconditioned critic.
    pub fn condition(&self, labels: Option<&[usize]>, n: usize) -> Result<Option<Tensor>> {
        if self.num_labels == 0 {
            return Ok(None);
        }
        let labels = labels.ok_or_else(|| CoreError::config("conditioned critic needs labels"))?;
        if labels.len() != n {
            return Err(CoreError::config("one label per point required"));
        }
        let mut t = Tensor::zeros(n, self.num_labels);
        for (i, &y) in labels.iter().enumerate() {
            if y >= self.num_labels {
                return Err(CoreError::config(format!("label {y} outside {} classes", self.num_labels)));
            }
            t.set(i, y, 1.0);
        }
        Ok(Some(t))
    }
}

/// How the critic's score is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `D / |grad D|`. Unbounded: a ReLU critic can flatten itself around
    /// the data and drive the score to `D / sqrt(eps)`.
    Gradient,
    /// `D / (|grad D| + |D|)`, confined to `(-1, 1)`.
    #[default]
    GradientAndValue,
}

/// `D(x) / sqrt(|grad_x D(x)|^2 + eps)` per row of `x` (`n x 2`). The
/// input gradient is recorded, so the result is differentiable in the
/// critic's parameters through both numerator and denominator.
pub fn normalized_d<'t>(tape: &'t Tape, critic: &BoundMlp<'t>, x: Var<'t>, cond: Option<&Tensor>) -> Result<Var<'t>> {
    normalized_score(tape, critic, x, cond, Normalization::Gradient)
}

/// [`normalized_d`] with a selectable normalization.
pub fn normalized_score<'t>(
    tape: &'t Tape,
    critic: &BoundMlp<'t>,
    x: Var<'t>,
    cond: Option<&Tensor>,
    mode: Normalization,
) -> Result<Var<'t>> {
    let input = match cond {
        Some(c) => tape.concat_cols(&[x, tape.leaf(c.clone())]),
        None => x,
    };
    let d = critic.forward(input);
    let g = tape.input_gradient(d.sum(), x)?;
    let norm = g.square().sum_cols().add_scalar(NORM_EPS).sqrt();
    Ok(match mode {
        Normalization::Gradient => d.div(norm),
        Normalization::GradientAndValue => d.div(norm + d.abs()),
    })
}

/// `mean(D^(fake)) - mean(D^(real))`.
pub fn d_loss<'t>(
    tape: &'t Tape,
    critic: &BoundMlp<'t>,
    real: Var<'t>,
    fake: Var<'t>,
    real_cond: Option<&Tensor>,
    fake_cond: Option<&Tensor>,
    mode: Normalization,
) -> Result<Var<'t>> {
    if real.shape() != fake.shape() {
        return Err(CoreError::config(format!(
            "real batch {:?} and fake batch {:?} differ",
            real.shape(),
            fake.shape()
        )));
    }
    let f = normalized_score(tape, critic, fake, fake_cond, mode)?.mean();
    let r = normalized_score(tape, critic, real, real_cond, mode)?.mean();
    Ok(f - r)
}

/// `-mean(D^(fake))`.
pub fn g_loss<'t>(
    tape: &'t Tape,
    critic: &BoundMlp<'t>,
    fake: Var<'t>,
    cond: Option<&Tensor>,
    mode: Normalization,
) -> Result<Var<'t>> {
    Ok(-normalized_score(tape, critic, fake, cond, mode)?.mean())
}

/// `|mean(power) - c|` for per-point powers `|component|^2` (`n x 1`).
pub fn constraint_loss<'t>(power: Var<'t>, c: f64) -> Result<Var<'t>> {
    if power.value().is_empty() {
        return Err(CoreError::config("constraint batch is empty"));
    }
    if !(c > 0.0) {
        return Err(CoreError::config(format!("constraint target {c} must be positive")));
    }
    Ok(power.mean().add_scalar(-c).abs())
}
