use std::fmt;
use std::str::FromStr;

use radiogan_autodiff::AdamConfig;
use serde::{Deserialize, Serialize};

use super::disc::Normalization;
use crate::error::{CoreError, Result};
use crate::unrolled::{Component, GeneratorConfig};

/// Which component an energy constraint pins, and to what mean power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    None,
    TransmitPower,
    NoisePower,
    ChannelGain,
}

impl ConstraintKind {
    pub fn component(self) -> Option<Component> {
        match self {
            ConstraintKind::None => None,
            ConstraintKind::TransmitPower => Some(Component::H),
            ConstraintKind::NoisePower => Some(Component::GN),
            ConstraintKind::ChannelGain => Some(Component::GAlpha),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::None => "none",
            ConstraintKind::TransmitPower => "transmit-power",
            ConstraintKind::NoisePower => "noise-power",
            ConstraintKind::ChannelGain => "channel-gain",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstraintKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        [
            ConstraintKind::None,
            ConstraintKind::TransmitPower,
            ConstraintKind::NoisePower,
            ConstraintKind::ChannelGain,
        ]
        .into_iter()
        .find(|k| k.name() == norm)
        .ok_or_else(|| CoreError::config(format!("unknown constraint '{s}'")))
    }
}

/// The per-epoch quantity minimized over the selection window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionMetric {
    /// `|P_n_hat - target|` from `G_n`.
    NoisePower { target: f64 },
    /// `|mean |G(z|s)|^2 - target|`, with the target usually the dataset's
    /// mean received power.
    ReceivedPower { target: f64 },
    /// The final epoch.
    LastEpoch,
}

impl SelectionMetric {
    fn validate(&self) -> Result<()> {
        match *self {
            SelectionMetric::NoisePower { target } | SelectionMetric::ReceivedPower { target }
                if !(target > 0.0 && target.is_finite()) =>
            {
                Err(CoreError::config(format!("selection target {target} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u64,
    pub d_steps: usize,
    pub constraint_steps: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    pub constraint: ConstraintKind,
    pub constraint_target: f64,
    /// Trailing fraction of epochs eligible for selection.
    pub selection_window: f64,
    pub selection: SelectionMetric,
    pub seed: u64,
    pub disc_hidden: Vec<usize>,
    pub normalization: Normalization,
    /// Latent draws behind each per-epoch power estimate. The draws are
    /// fixed for the whole run so epoch-to-epoch differences reflect the
    /// generator, not resampling.
    pub estimate_draws: usize,
    /// Waveforms regenerated for the pure-signal pool.
    pub prior_waveforms: usize,
    /// Components never updated; their parameters stay bit-identical.
    pub frozen: Vec<Component>,
    pub generator: GeneratorConfig,
}

impl TrainConfig {
    pub fn new(generator: GeneratorConfig, noise_target: f64) -> Self {
        TrainConfig {
            epochs: 10_000,
            d_steps: 5,
            constraint_steps: 3,
            batch: 1024,
            adam: AdamConfig::default(),
            constraint: ConstraintKind::None,
            constraint_target: 1.0,
            selection_window: 0.2,
            selection: SelectionMetric::NoisePower { target: noise_target },
            seed: 0,
            disc_hidden: vec![64, 64],
            normalization: Normalization::default(),
            estimate_draws: 4096,
            prior_waveforms: 256,
            frozen: Vec::new(),
            generator,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_steps == 0 || self.batch == 0 {
            return Err(CoreError::config("discriminator steps and batch size must be at least 1"));
        }
        if self.constraint != ConstraintKind::None {
            // Zero constraint steps is allowed: it is the ablation that
            // reduces to the unconstrained loop.
            if !(self.constraint_target > 0.0 && self.constraint_target.is_finite()) {
                return Err(CoreError::config(format!(
                    "constraint target {} must be positive",
                    self.constraint_target
                )));
            }
        }
        if !(self.selection_window > 0.0 && self.selection_window <= 1.0) {
            return Err(CoreError::config("selection window must be in (0, 1]"));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.adam;
        if !(lr > 0.0 && lr.is_finite()) || !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
            return Err(CoreError::config("invalid Adam settings"));
        }
        if self.disc_hidden.iter().any(|&w| w == 0) {
            return Err(CoreError::config("discriminator layers must be non-empty"));
        }
        if self.estimate_draws == 0 || self.prior_waveforms == 0 {
            return Err(CoreError::config("estimate draws and prior waveforms must be positive"));
        }
        self.selection.validate()?;
        self.generator.validate()?;
        let present = Component::for_model(self.generator.kind);
        if let Some(c) = self.constraint.component() {
            if !present.contains(&c) {
                return Err(CoreError::config(format!(
                    "constraint {} needs {c}, which a {} generator lacks",
                    self.constraint, self.generator.kind
                )));
            }
            if self.frozen.contains(&c) {
                return Err(CoreError::config(format!("constrained component {c} is frozen")));
            }
        }
        if present.iter().all(|c| self.frozen.contains(c)) {
            return Err(CoreError::config("every generator component is frozen"));
        }
        Ok(())
    }

    /// First 1-based epoch eligible for selection.
    pub fn window_start(&self) -> u64 {
        let start = ((1.0 - self.selection_window) * self.epochs as f64).ceil() as u64;
        start.max(1)
    }
}
