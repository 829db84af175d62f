use std::path::Path;

use num_complex::Complex64;
use radiogan_autodiff::Checkpoint;
use serde::{Deserialize, Serialize};

use super::curves::{amplitude_grid, compare_curves, learned_curves, sspa_curves, waveform_overlay, CurveErrors};
use super::density::{density_histogram_1d, density_spectrum_2d};
use super::ks::{ks_test, rayleigh_cdf, KsResult};
use crate::error::{CoreError, Result};
use crate::rng::{purpose, stream};
use crate::sim::{synthesize_pure, DatasetConfig, FadingMode, SignalModel};
use crate::unrolled::{Component, GenInput, PurePrior, UnrolledGenerator};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// The density spectrum covers `[-region, region)` on both axes.
    pub density_region: f64,
    pub bins: usize,
    pub draws: usize,
    pub seed: u64,
    pub fading_hist_bins: usize,
    pub fading_hist_max: f64,
    pub curve_step: f64,
    pub curve_max: f64,
    pub probes: usize,
    /// Amplitude range for the curve error bounds.
    pub compare_range: (f64, f64),
    pub prior_waveforms: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            density_region: 2.0,
            bins: 64,
            draws: 1_000_000,
            seed: 0,
            fading_hist_bins: 100,
            fading_hist_max: 3.0,
            curve_step: 0.01,
            curve_max: 1.5,
            probes: 64,
            compare_range: (0.1, 1.3),
            prior_waveforms: 64,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(CoreError::config("evaluation needs at least one draw"));
        }
        if self.bins == 0 || self.fading_hist_bins == 0 || self.probes == 0 || self.prior_waveforms == 0 {
            return Err(CoreError::config("bin, probe and waveform counts must be positive"));
        }
        if !(self.density_region > 0.0 && self.fading_hist_max > 0.0 && self.curve_step > 0.0 && self.curve_max > 0.0) {
            return Err(CoreError::config("evaluation ranges must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSection {
    pub power: f64,
    pub reference_power: f64,
    pub relative_error: f64,
    pub density_inside: u64,
    pub density_overflow: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingSection {
    pub gain: f64,
    pub reference_gain: f64,
    pub relative_error: f64,
    /// `|alpha|` against Rayleigh with the configured gain.
    pub ks: KsResult,
    pub histogram_bins: usize,
    pub histogram_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterSection {
    pub device: u16,
    /// Power of `H(s)` over pure-signal draws.
    pub transmit_power: f64,
    pub reference_transmit_power: f64,
    /// Errors on `compare_range`.
    pub errors: CurveErrors,
    /// Amplitude-curve RMSE over the whole grid `[0, curve_max]`.
    pub curve_rmse: f64,
    pub waveform_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub kind: SignalModel,
    pub epoch: u64,
    pub config: EvalConfig,
    pub received_power: f64,
    pub noise: NoiseSection,
    pub fading: Option<FadingSection>,
    pub transmitter: Option<Vec<TransmitterSection>>,
}

/// A report and its sibling CSV files, by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub files: Vec<(String, String)>,
}

impl EvalOutput {
    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report is plain data") + "\n"
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report_json())?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Evaluates every component of a generator checkpoint against the
/// ground truth in the dataset configuration it was trained for.
pub fn build_eval_report(ck: &Checkpoint, dataset: &DatasetConfig, cfg: &EvalConfig) -> Result<EvalOutput> {
    cfg.validate()?;
    dataset.validate()?;
    let generator = UnrolledGenerator::from_checkpoint(ck)?;
    let kind = generator.kind();
    let devices = dataset.device_coefficients()?;
    if kind.has_transmitter() && generator.config.num_devices != devices.len() {
        return Err(CoreError::config(format!(
            "checkpoint has {} transmitter branches, the dataset {} devices",
            generator.config.num_devices,
            devices.len()
        )));
    }
    if kind.has_transmitter() && !dataset.model.has_transmitter() {
        return Err(CoreError::config("a transmitter checkpoint needs a dataset with devices"));
    }
    if kind.has_fading() && !matches!(dataset.channel.fading, FadingMode::BlockRayleigh { .. }) {
        return Err(CoreError::config("a fading checkpoint needs a block Rayleigh dataset"));
    }

    let power = dataset.channel.avg_transmit_power;
    let prior = PurePrior::regenerate(&dataset.pure, power, cfg.prior_waveforms, cfg.seed)?;
    let input = GenInput::draw(&generator.config, &prior, cfg.draws, &mut stream(cfg.seed, purpose::EVAL));
    let mut files = Vec::new();

    let noise = generator.component_output(Component::GN, &input)?;
    let noise_power = mean_power(&noise);
    let reference = dataset.noise_power();
    let spectrum = density_spectrum_2d(&noise, -cfg.density_region, cfg.density_region, cfg.bins)?;
    files.push(("noise_density.csv".to_string(), spectrum.to_csv()));
    let noise_section = NoiseSection {
        power: noise_power,
        reference_power: reference,
        relative_error: (noise_power - reference).abs() / reference,
        density_inside: spectrum.inside(),
        density_overflow: spectrum.overflow,
    };

    let fading = match generator.g_alpha {
        Some(_) => {
            let reference_gain = dataset.channel.fading.mean_gain();
            let alpha = generator.component_output(Component::GAlpha, &input)?;
            let mags: Vec<f64> = alpha.iter().map(|a| a.norm()).collect();
            let gain = mean_power(&alpha);
            let hist = density_histogram_1d(&mags, 0.0, cfg.fading_hist_max, cfg.fading_hist_bins)?;
            files.push(("fading_histogram.csv".to_string(), hist.to_csv()));
            Some(FadingSection {
                gain,
                reference_gain,
                relative_error: (gain - reference_gain).abs() / reference_gain,
                ks: ks_test(&mags, rayleigh_cdf((reference_gain / 2.0).sqrt()))?,
                histogram_bins: cfg.fading_hist_bins,
                histogram_max: cfg.fading_hist_max,
            })
        }
        None => None,
    };

    let transmitter = match &generator.h {
        Some(h) => {
            // A fixed channel is indistinguishable from part of the
            // transmitter, so it joins the ground truth.
            let gain = match dataset.channel.fading {
                FadingMode::Fixed { re, im } if !kind.has_fading() => Some(Complex64::new(re, im)),
                _ => None,
            };
            let grid = amplitude_grid(cfg.curve_max, cfg.curve_step);
            let mut holdout = stream(cfg.seed, purpose::HOLDOUT);
            let waveform = synthesize_pure(&dataset.pure, power, &mut holdout)?;
            let mut sections = Vec::with_capacity(devices.len());
            for (b, (id, coeffs)) in devices.iter().enumerate() {
                let branch = &h.branches[b];
                let learned = learned_curves(branch, &grid, cfg.probes, 0.0)?;
                let truth = sspa_curves(coeffs, &grid, gain)?;
                let errors = compare_curves(&learned, &truth, cfg.compare_range.0, cfg.compare_range.1)?;
                let whole = compare_curves(&learned, &truth, 0.0, cfg.curve_max)?;
                let over = waveform_overlay(branch, coeffs, gain, &waveform)?;
                let pure = prior.points();
                let g = gain.map_or(1.0, |g| g.norm_sqr());
                sections.push(TransmitterSection {
                    device: *id,
                    transmit_power: mean_power(&branch.apply_batch(pure)?),
                    reference_transmit_power: g * pure.iter().map(|&s| coeffs.apply(s).norm_sqr()).sum::<f64>()
                        / pure.len() as f64,
                    errors,
                    curve_rmse: whole.amplitude_rmse,
                    waveform_rmse: over.rmse,
                });
                files.push((format!("curves_learned_{id}.csv"), learned.to_csv()));
                files.push((format!("curves_truth_{id}.csv"), truth.to_csv()));
                files.push((format!("overlay_{id}.csv"), over.to_csv()));
            }
            Some(sections)
        }
        None => None,
    };

    Ok(EvalOutput {
        report: EvalReport {
            schema: REPORT_SCHEMA,
            kind,
            epoch: ck.epoch,
            config: cfg.clone(),
            received_power: mean_power(&generator.generate(&input)?),
            noise: noise_section,
            fading,
            transmitter,
        },
        files,
    })
}

fn mean_power(values: &[Complex64]) -> f64 {
    values.iter().map(|c| c.norm_sqr()).sum::<f64>() / values.len() as f64
}
