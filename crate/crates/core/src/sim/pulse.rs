use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::modulation::ModulationScheme;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureSignalConfig {
    pub scheme: ModulationScheme,
    pub oversampling_ratio: usize,
    pub rolloff: f64,
    pub filter_span_symbols: usize,
    pub sample_len: usize,
}

impl Default for PureSignalConfig {
    fn default() -> Self {
        PureSignalConfig {
            scheme: ModulationScheme::Qpsk,
            oversampling_ratio: 8,
            rolloff: 0.35,
            filter_span_symbols: 8,
            sample_len: 1024,
        }
    }
}

impl PureSignalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.oversampling_ratio == 0 || self.sample_len == 0 {
            return Err(CoreError::config("oversampling ratio and sample length must be positive"));
        }
        if self.sample_len % self.oversampling_ratio != 0 {
            return Err(CoreError::config(format!(
                "sample length {} is not a multiple of the oversampling ratio {}",
                self.sample_len, self.oversampling_ratio
            )));
        }
        check_filter(self.rolloff, self.filter_span_symbols)
    }

    /// Symbols consumed per waveform once filter transients are trimmed.
    pub fn symbols_needed(&self) -> usize {
        self.sample_len / self.oversampling_ratio + self.filter_span_symbols
    }
}

fn check_filter(rolloff: f64, span: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(CoreError::config(format!("rolloff {rolloff} outside [0, 1]")));
    }
    if span < 2 || span % 2 != 0 {
        return Err(CoreError::config(format!("filter span {span} must be even and at least 2")));
    }
    Ok(())
}

/// Continuous RRC impulse response at `t` symbol periods, unnormalized.
pub fn rrc_response(rolloff: f64, t: f64) -> f64 {
    let b = rolloff;
    if t == 0.0 {
        return 1.0 - b + 4.0 * b / PI;
    }
    if b > 0.0 && ((4.0 * b * t).abs() - 1.0).abs() < 1e-10 {
        let q = PI / (4.0 * b);
        return b / 2f64.sqrt() * ((1.0 + 2.0 / PI) * q.sin() + (1.0 - 2.0 / PI) * q.cos());
    }
    let num = (PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos();
    let den = PI * t * (1.0 - (4.0 * b * t).powi(2));
    num / den
}

/// `span * osr + 1` unit-energy RRC taps centred on the middle tap.
pub fn rrc_taps(rolloff: f64, oversampling_ratio: usize, span_symbols: usize) -> Result<Vec<f64>> {
    check_filter(rolloff, span_symbols)?;
    if oversampling_ratio == 0 {
        return Err(CoreError::config("oversampling ratio must be positive"));
    }
    let n = span_symbols * oversampling_ratio + 1;
    let half = (n / 2) as i64;
    let mut taps: Vec<f64> = (0..n as i64)
        .map(|k| rrc_response(rolloff, (k - half) as f64 / oversampling_ratio as f64))
        .collect();
    // Mirror so the symmetry is exact rather than up to rounding.
    for k in 0..n / 2 {
        taps[n - 1 - k] = taps[k];
    }
    let energy = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= energy);
    Ok(taps)
}

/// Upsamples, filters and trims to exactly `sample_len` steady-state
/// points, then rescales to mean power `avg_power`.
pub fn pulse_shape(symbols: &[Complex64], cfg: &PureSignalConfig, avg_power: f64) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let need = cfg.symbols_needed();
    if symbols.len() < need {
        return Err(CoreError::config(format!(
            "{} symbols given, {need} needed for {} points",
            symbols.len(),
            cfg.sample_len
        )));
    }
    let osr = cfg.oversampling_ratio;
    let taps = rrc_taps(cfg.rolloff, osr, cfg.filter_span_symbols)?;
    let start = cfg.filter_span_symbols * osr;
    let mut out = Vec::with_capacity(cfg.sample_len);
    for n in start..start + cfg.sample_len {
        // Only taps aligned with a symbol instant contribute.
        let mut acc = Complex64::new(0.0, 0.0);
        let mut k = n % osr;
        while k < taps.len() {
            acc += symbols[(n - k) / osr] * taps[k];
            k += osr;
        }
        out.push(acc);
    }
    let power = out.iter().map(|c| c.norm_sqr()).sum::<f64>() / out.len() as f64;
    if power > 0.0 {
        let scale = (avg_power / power).sqrt();
        out.iter_mut().for_each(|c| *c *= scale);
    }
    Ok(out)
}
