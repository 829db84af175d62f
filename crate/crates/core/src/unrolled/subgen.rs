use num_complex::Complex64;
use radiogan_autodiff::{Mlp, MlpSpec, NumericalLimit, Tape, Tensor, Var};
use rand::Rng;

use super::nonlinear::init_mlp;
use super::{CVar, GeneratorConfig};
use crate::error::{CoreError, Result};

/// One MLP applied to both halves of the latent vector: the first half
/// gives the real part, the second the imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGenerator {
    pub mlp: Mlp,
}

impl SubGenerator {
    pub fn new<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Result<Self> {
        let (lo, hi) = cfg.sub_limit;
        let spec = MlpSpec::tanh_stack(cfg.latent_half, &cfg.sub_hidden, NumericalLimit::new(lo, hi)?);
        Ok(SubGenerator {
            mlp: init_mlp(spec, cfg.init, rng),
        })
    }

    pub fn latent_dim(&self) -> usize {
        2 * self.mlp.input_dim()
    }

    fn halves(&self, z: &Tensor) -> Result<(Tensor, Tensor)> {
        let half = self.mlp.input_dim();
        if z.cols() != 2 * half {
            return Err(CoreError::config(format!(
                "sub-generator expects {} latent values per draw, got {}",
                2 * half,
                z.cols()
            )));
        }
        Ok((z.slice_cols(0, half), z.slice_cols(half, half)))
    }

    /// `z` is `n x latent_dim`.
    pub fn apply_batch(&self, z: &Tensor) -> Result<Vec<Complex64>> {
        let (a, b) = self.halves(z)?;
        let re = self.mlp.predict(&a)?;
        let im = self.mlp.predict(&b)?;
        Ok(re
            .data()
            .iter()
            .zip(im.data())
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect())
    }

    pub fn apply(&self, z: &[f64]) -> Result<Complex64> {
        let z = Tensor::row(z);
        Ok(self.apply_batch(&z)?[0])
    }

    pub fn forward<'t>(&self, tape: &'t Tape, z: &Tensor) -> Result<(CVar<'t>, Vec<Var<'t>>)> {
        let (a, b) = self.halves(z)?;
        let bound = self.mlp.bind(tape);
        let out = CVar {
            re: bound.forward(tape.leaf(a)),
            im: bound.forward(tape.leaf(b)),
        };
        Ok((out, bound.params()))
    }
}
