use num_complex::Complex64;
use radiogan_autodiff::{Checkpoint, Section, Tape, Tensor, Var};
use rand::Rng;

use super::nonlinear::{LabelSelector, NonlinearTransform};
use super::prior::PurePrior;
use super::subgen::SubGenerator;
use super::{CVar, Component, GeneratorConfig};
use crate::error::{CoreError, Result};
use crate::rng::normal;
use crate::sim::SignalModel;

/// One generator input: latent vectors, a pure-signal point and an
/// optional device label.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDraw {
    pub z_alpha: Vec<f64>,
    pub z_n: Vec<f64>,
    pub s: Complex64,
    pub label: Option<usize>,
}

/// A batch of generator inputs; `z_*` are `n x latent_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenInput {
    pub s: Vec<Complex64>,
    pub z_alpha: Tensor,
    pub z_n: Tensor,
    pub labels: Option<Vec<usize>>,
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| normal(rng)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized data")
}

impl GenInput {
    /// Draws `s` from the prior, both latent batches, then labels (uniform
    /// over devices when there is more than one), in that order.
    pub fn draw<R: Rng + ?Sized>(cfg: &GeneratorConfig, prior: &PurePrior, m: usize, rng: &mut R) -> Self {
        let s = prior.sample(rng, m);
        let z_alpha = gaussian_matrix(rng, m, cfg.latent_dim());
        let z_n = gaussian_matrix(rng, m, cfg.latent_dim());
        let labels = (cfg.num_devices > 1).then(|| (0..m).map(|_| rng.gen_range(0..cfg.num_devices)).collect());
        GenInput { s, z_alpha, z_n, labels }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn from_draws(draws: &[LatentDraw]) -> Result<Self> {
        let first = draws.first().ok_or_else(|| CoreError::config("no draws"))?;
        let (da, dn) = (first.z_alpha.len(), first.z_n.len());
        let mut za = Vec::with_capacity(draws.len() * da);
        let mut zn = Vec::with_capacity(draws.len() * dn);
        for d in draws {
            if d.z_alpha.len() != da || d.z_n.len() != dn || d.label.is_some() != first.label.is_some() {
                return Err(CoreError::config("draws disagree in shape"));
            }
            za.extend_from_slice(&d.z_alpha);
            zn.extend_from_slice(&d.z_n);
        }
        Ok(GenInput {
            s: draws.iter().map(|d| d.s).collect(),
            z_alpha: Tensor::from_vec(draws.len(), da, za)?,
            z_n: Tensor::from_vec(draws.len(), dn, zn)?,
            labels: first.label.map(|_| draws.iter().map(|d| d.label.unwrap_or(0)).collect()),
        })
    }
}

/// A recorded generator pass.
pub struct GenForward<'t> {
    pub out: CVar<'t>,
    pub h: Option<CVar<'t>>,
    pub alpha: Option<CVar<'t>>,
    pub noise: CVar<'t>,
    pub params: Vec<(Component, Vec<Var<'t>>)>,
}

impl<'t> GenForward<'t> {
    pub fn params_of(&self, components: &[Component]) -> Vec<Var<'t>> {
        self.params
            .iter()
            .filter(|(c, _)| components.contains(c))
            .flat_map(|(_, p)| p.iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnrolledGenerator {
    pub config: GeneratorConfig,
    pub h: Option<LabelSelector>,
    pub g_alpha: Option<SubGenerator>,
    pub g_n: SubGenerator,
}

impl UnrolledGenerator {
    /// Initializes `H`, then `G_alpha`, then `G_n` from `rng`.
    pub fn new<R: Rng + ?Sized>(config: GeneratorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let h = if config.kind.has_transmitter() {
            Some(LabelSelector::new(&config, rng)?)
        } else {
            None
        };
        let g_alpha = if config.kind.has_fading() {
            Some(SubGenerator::new(&config, rng)?)
        } else {
            None
        };
        let g_n = SubGenerator::new(&config, rng)?;
        Ok(UnrolledGenerator {
            config,
            h,
            g_alpha,
            g_n,
        })
    }

    pub fn kind(&self) -> SignalModel {
        self.config.kind
    }

    pub fn components(&self) -> Vec<Component> {
        Component::for_model(self.config.kind)
    }

    fn missing(c: Component) -> CoreError {
        CoreError::config(format!("generator has no {c} component"))
    }

    pub fn params(&self, c: Component) -> Result<Vec<&Tensor>> {
        Ok(match c {
            Component::H => self.h.as_ref().ok_or_else(|| Self::missing(c))?.params(),
            Component::GAlpha => self.g_alpha.as_ref().ok_or_else(|| Self::missing(c))?.mlp.params(),
            Component::GN => self.g_n.mlp.params(),
        })
    }

    pub fn params_mut(&mut self, c: Component) -> Result<Vec<&mut Tensor>> {
        Ok(match c {
            Component::H => self.h.as_mut().ok_or_else(|| Self::missing(c))?.params_mut(),
            Component::GAlpha => self.g_alpha.as_mut().ok_or_else(|| Self::missing(c))?.mlp.params_mut(),
            Component::GN => self.g_n.mlp.params_mut(),
        })
    }

    pub fn params_of_mut(&mut self, components: &[Component]) -> Result<Vec<&mut Tensor>> {
        for &c in components {
            if !self.components().contains(&c) {
                return Err(Self::missing(c));
            }
        }
        let mut out = Vec::new();
        if components.contains(&Component::H) {
            out.extend(self.h.as_mut().expect("checked").params_mut());
        }
        if components.contains(&Component::GAlpha) {
            out.extend(self.g_alpha.as_mut().expect("checked").mlp.params_mut());
        }
        if components.contains(&Component::GN) {
            out.extend(self.g_n.mlp.params_mut());
        }
        Ok(out)
    }

    pub fn param_shapes(&self, components: &[Component]) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for c in Component::ALL {
            if components.contains(&c) {
                out.extend(self.params(c)?.iter().map(|t| t.shape()));
            }
        }
        Ok(out)
    }

    fn check_input(&self, input: &GenInput) -> Result<()> {
        let n = input.len();
        if input.z_n.rows() != n || (self.g_alpha.is_some() && input.z_alpha.rows() != n) {
            return Err(CoreError::config("latent batch size differs from pure-signal batch"));
        }
        Ok(())
    }

    /// Untaped batch evaluation.
    pub fn generate(&self, input: &GenInput) -> Result<Vec<Complex64>> {
        self.check_input(input)?;
        let mut base = match &self.h {
            Some(h) => h.apply_batch(&input.s, input.labels.as_deref())?,
            None => input.s.clone(),
        };
        if let Some(g) = &self.g_alpha {
            for (b, a) in base.iter_mut().zip(g.apply_batch(&input.z_alpha)?) {
                *b *= a;
            }
        }
        for (b, n) in base.iter_mut().zip(self.g_n.apply_batch(&input.z_n)?) {
            *b += n;
        }
        Ok(base)
    }

    pub fn apply(&self, draw: &LatentDraw) -> Result<Complex64> {
        Ok(self.generate(&GenInput::from_draws(std::slice::from_ref(draw))?)?[0])
    }

    /// Records the composed generator; every component's parameters are
    /// bound as leaves, and callers pick which ones to differentiate.
    pub fn forward<'t>(&self, tape: &'t Tape, input: &GenInput) -> Result<GenForward<'t>> {
        self.check_input(input)?;
        let mut params = Vec::with_capacity(3);
        let h = match &self.h {
            Some(h) => {
                let (out, p) = h.forward(tape, &input.s, input.labels.as_deref())?;
                params.push((Component::H, p));
                Some(out)
            }
            None => None,
        };
        let alpha = match &self.g_alpha {
            Some(g) => {
                let (out, p) = g.forward(tape, &input.z_alpha)?;
                params.push((Component::GAlpha, p));
                Some(out)
            }
            None => None,
        };
        let (noise, p) = self.g_n.forward(tape, &input.z_n)?;
        params.push((Component::GN, p));
        let base = h.unwrap_or_else(|| CVar::constant(tape, &input.s));
        let base = match alpha {
            Some(a) => a.mul(base),
            None => base,
        };
        Ok(GenForward {
            out: base.add(noise),
            h,
            alpha,
            noise,
            params,
        })
    }

    /// Records one component alone: `H(s)`, `G_alpha(z_alpha)` or `G_n(z_n)`.
    pub fn component_forward<'t>(
        &self,
        tape: &'t Tape,
        c: Component,
        input: &GenInput,
    ) -> Result<(CVar<'t>, Vec<Var<'t>>)> {
        match c {
            Component::H => self
                .h
                .as_ref()
                .ok_or_else(|| Self::missing(c))?
                .forward(tape, &input.s, input.labels.as_deref()),
            Component::GAlpha => self
                .g_alpha
                .as_ref()
                .ok_or_else(|| Self::missing(c))?
                .forward(tape, &input.z_alpha),
            Component::GN => self.g_n.forward(tape, &input.z_n),
        }
    }

    /// Untaped output of one component.
    pub fn component_output(&self, c: Component, input: &GenInput) -> Result<Vec<Complex64>> {
        match c {
            Component::H => self
                .h
                .as_ref()
                .ok_or_else(|| Self::missing(c))?
                .apply_batch(&input.s, input.labels.as_deref()),
            Component::GAlpha => self
                .g_alpha
                .as_ref()
                .ok_or_else(|| Self::missing(c))?
                .apply_batch(&input.z_alpha),
            Component::GN => self.g_n.apply_batch(&input.z_n),
        }
    }

    /// Copies component `c` from `other`, which must share its architecture.
    pub fn transplant(&mut self, other: &UnrolledGenerator, c: Component) -> Result<()> {
        let mismatch = || CoreError::config(format!("cannot transplant {c}: architectures differ"));
        match c {
            Component::H => {
                let src = other.h.as_ref().ok_or_else(|| Self::missing(c))?;
                let dst = self.h.as_mut().ok_or_else(|| Self::missing(c))?;
                if dst.params().iter().map(|t| t.shape()).ne(src.params().iter().map(|t| t.shape())) {
                    return Err(mismatch());
                }
                *dst = src.clone();
            }
            Component::GAlpha => {
                let src = other.g_alpha.as_ref().ok_or_else(|| Self::missing(c))?;
                let dst = self.g_alpha.as_mut().ok_or_else(|| Self::missing(c))?;
                if dst.mlp.spec() != src.mlp.spec() {
                    return Err(mismatch());
                }
                *dst = src.clone();
            }
            Component::GN => {
                if self.g_n.mlp.spec() != other.g_n.mlp.spec() {
                    return Err(mismatch());
                }
                self.g_n = other.g_n.clone();
            }
        }
        Ok(())
    }

    pub fn section(&self, c: Component) -> Result<Section> {
        let section = Section::new(c.name());
        Ok(match c {
            Component::H => {
                let h = self.h.as_ref().ok_or_else(|| Self::missing(c))?;
                h.branches.iter().enumerate().fold(section, |s, (b, t)| {
                    s.with(format!("amplitude/{b}"), t.amplitude.clone())
                        .with(format!("phase/{b}"), t.phase.clone())
                })
            }
            Component::GAlpha => section.with(
                "shared",
                self.g_alpha.as_ref().ok_or_else(|| Self::missing(c))?.mlp.clone(),
            ),
            Component::GN => section.with("shared", self.g_n.mlp.clone()),
        })
    }

    pub fn to_checkpoint(&self, epoch: u64, seed: u64) -> Checkpoint {
        let mut ck = Checkpoint::new("unrolled-generator", epoch, seed);
        ck.attributes.insert(
            "generator".into(),
            serde_json::to_value(&self.config).expect("config is plain data"),
        );
        ck.sections = self
            .components()
            .into_iter()
            .map(|c| self.section(c).expect("component present"))
            .collect();
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.module != "unrolled-generator" {
            return Err(CoreError::format(format!("checkpoint holds '{}', not a generator", ck.module)));
        }
        let config: GeneratorConfig = ck
            .attributes
            .get("generator")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| CoreError::format(format!("generator config: {e}")))?
            .ok_or_else(|| CoreError::format("checkpoint lacks a generator config"))?;
        config.validate()?;
        let expected: Vec<&str> = Component::for_model(config.kind).iter().map(|c| c.name()).collect();
        let found: Vec<&str> = ck.sections.iter().map(|s| s.name.as_str()).collect();
        if expected != found {
            return Err(CoreError::format(format!(
                "sections {found:?} do not match a {} generator ({expected:?})",
                config.kind
            )));
        }
        let net = |section: &str, name: &str| {
            ck.section(section)
                .and_then(|s| s.network(name))
                .cloned()
                .ok_or_else(|| CoreError::format(format!("missing network {section}/{name}")))
        };
        let h = match ck.section(Component::H.name()) {
            Some(_) => Some(LabelSelector {
                branches: (0..config.num_devices)
                    .map(|b| {
                        Ok(NonlinearTransform {
                            amplitude: net("H", &format!("amplitude/{b}"))?,
                            phase: net("H", &format!("phase/{b}"))?,
                        })
                    })
                    .collect::<Result<_>>()?,
            }),
            None => None,
        };
        let g_alpha = match ck.section(Component::GAlpha.name()) {
            Some(_) => Some(SubGenerator {
                mlp: net("G_alpha", "shared")?,
            }),
            None => None,
        };
        Ok(UnrolledGenerator {
            config,
            h,
            g_alpha,
            g_n: SubGenerator {
                mlp: net("G_n", "shared")?,
            },
        })
    }
}
