use num_complex::Complex64;
use radiogan_autodiff::{Mlp, MlpSpec, NumericalLimit, Tape, Tensor, Var};
use rand::Rng;

use super::{iq_matrix, split_parts, CVar, GeneratorConfig, InitMode};
use crate::error::{CoreError, Result};

pub(crate) fn init_mlp<R: Rng + ?Sized>(spec: MlpSpec, mode: InitMode, rng: &mut R) -> Mlp {
    match mode {
        InitMode::Zero => Mlp::zeros(spec),
        InitMode::Glorot => Mlp::glorot(spec, rng),
        InitMode::GlorotZeroOutput => {
            // Output weights zero, bias solving limit(tanh(b)) = 0.
            let bias = spec.limit.map_or(0.0, |l| {
                let (lo, hi) = (l.lo(), l.hi());
                (-(hi + lo) / (hi - lo)).atanh()
            });
            let mut mlp = Mlp::glorot(spec, rng);
            let mut params = mlp.params_mut();
            let n = params.len();
            params[n - 2].data_mut().fill(0.0);
            params[n - 1].data_mut().fill(bias);
            mlp
        }
    }
}

/// `H(s) = |s| (1 + da) e^{j (arg s + dphi)}` with `da`, `dphi` from two MLPs
/// fed the (I, Q) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearTransform {
    pub amplitude: Mlp,
    pub phase: Mlp,
}

impl NonlinearTransform {
    pub fn new<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Result<Self> {
        let (alo, ahi) = cfg.amplitude_limit;
        let (plo, phi) = cfg.phase_limit;
        let amp = MlpSpec::tanh_stack(2, &cfg.h_hidden, NumericalLimit::new(alo, ahi)?);
        let phase = MlpSpec::tanh_stack(2, &cfg.h_hidden, NumericalLimit::new(plo, phi)?);
        Ok(NonlinearTransform {
            amplitude: init_mlp(amp, cfg.init, rng),
            phase: init_mlp(phase, cfg.init, rng),
        })
    }

    /// Amplitude and phase offsets for each point.
    pub fn offsets(&self, s: &[Complex64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = iq_matrix(s);
        Ok((
            self.amplitude.predict(&x)?.into_vec(),
            self.phase.predict(&x)?.into_vec(),
        ))
    }

    pub fn apply_batch(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        let (da, dp) = self.offsets(s)?;
        Ok(s.iter()
            .zip(da.iter().zip(&dp))
            .map(|(&s, (&da, &dp))| s * (1.0 + da) * Complex64::from_polar(1.0, dp))
            .collect())
    }

    pub fn apply(&self, s: Complex64) -> Complex64 {
        self.apply_batch(&[s]).expect("two input features")[0]
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.amplitude.params();
        p.extend(self.phase.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.amplitude.params_mut();
        p.extend(self.phase.params_mut());
        p
    }

    /// Records `H` on a batch, returning the output and the parameter leaves.
    pub fn forward<'t>(&self, tape: &'t Tape, s: &[Complex64]) -> (CVar<'t>, Vec<Var<'t>>) {
        let amp = self.amplitude.bind(tape);
        let phase = self.phase.bind(tape);
        let x = tape.leaf(iq_matrix(s));
        let gain = amp.forward(x).add_scalar(1.0);
        let dp = phase.forward(x);
        let (c, sn) = (dp.cos(), dp.sin());
        let (re, im) = split_parts(s);
        let re = tape.leaf(Tensor::column(&re));
        let im = tape.leaf(Tensor::column(&im));
        let out = CVar {
            re: gain * (re * c - im * sn),
            im: gain * (im * c + re * sn),
        };
        let mut params = amp.params();
        params.extend(phase.params());
        (out, params)
    }
}

/// One `H` branch per device; the label picks the branch.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSelector {
    pub branches: Vec<NonlinearTransform>,
}

impl LabelSelector {
    pub fn new<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Result<Self> {
        let branches = (0..cfg.num_devices)
            .map(|_| NonlinearTransform::new(cfg, rng))
            .collect::<Result<_>>()?;
        Ok(LabelSelector { branches })
    }

    pub fn num_devices(&self) -> usize {
        self.branches.len()
    }

    fn check_labels(&self, n: usize, labels: Option<&[usize]>) -> Result<()> {
        match labels {
            None if self.branches.len() == 1 => Ok(()),
            None => Err(CoreError::config("multi-device H needs a label per point")),
            Some(l) if l.len() != n => Err(CoreError::config("one label per point required")),
            Some(l) => match l.iter().find(|&&y| y >= self.branches.len()) {
                Some(y) => Err(CoreError::config(format!(
                    "label {y} outside {} branches",
                    self.branches.len()
                ))),
                None => Ok(()),
            },
        }
    }

    pub fn apply_batch(&self, s: &[Complex64], labels: Option<&[usize]>) -> Result<Vec<Complex64>> {
        self.check_labels(s.len(), labels)?;
        let Some(labels) = labels else {
            return self.branches[0].apply_batch(s);
        };
        let mut out = vec![Complex64::new(0.0, 0.0); s.len()];
        for (b, branch) in self.branches.iter().enumerate() {
            let idx: Vec<usize> = (0..s.len()).filter(|&i| labels[i] == b).collect();
            if idx.is_empty() {
                continue;
            }
            let pts: Vec<Complex64> = idx.iter().map(|&i| s[i]).collect();
            for (&i, v) in idx.iter().zip(branch.apply_batch(&pts)?) {
                out[i] = v;
            }
        }
        Ok(out)
    }

    /// Selection by a one-hot vector.
    pub fn apply_one_hot(&self, s: Complex64, y: &[f64]) -> Result<Complex64> {
        if y.len() != self.branches.len() {
            return Err(CoreError::config("one-hot length must equal the device count"));
        }
        let ones: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1.0).collect();
        if ones.len() != 1 || y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(CoreError::config("label is not one-hot"));
        }
        Ok(self.branches[ones[0]].apply(s))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.branches.iter().flat_map(NonlinearTransform::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.branches.iter_mut().flat_map(NonlinearTransform::params_mut).collect()
    }

    /// Every branch runs on the whole batch and is masked by its label
    /// indicator, so unselected branches receive exactly zero gradient.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        s: &[Complex64],
        labels: Option<&[usize]>,
    ) -> Result<(CVar<'t>, Vec<Var<'t>>)> {
        self.check_labels(s.len(), labels)?;
        let Some(labels) = labels else {
            return Ok(self.branches[0].forward(tape, s));
        };
        let mut params = Vec::new();
        let mut acc: Option<CVar<'t>> = None;
        for (b, branch) in self.branches.iter().enumerate() {
            let (out, p) = branch.forward(tape, s);
            params.extend(p);
            let mask: Vec<f64> = labels.iter().map(|&y| if y == b { 1.0 } else { 0.0 }).collect();
            let mask = tape.leaf(Tensor::column(&mask));
            let masked = CVar {
                re: out.re * mask,
                im: out.im * mask,
            };
            acc = Some(match acc {
                Some(a) => a.add(masked),
                None => masked,
            });
        }
        Ok((acc.expect("at least one branch"), params))
    }
}
