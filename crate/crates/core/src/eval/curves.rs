use std::f64::consts::PI;
use std::fmt::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sim::SspaCoefficients;
use crate::unrolled::NonlinearTransform;

/// Amplitude-transfer and phase-shift curves over an amplitude grid.
/// Spreads are the standard deviation across probe phases (zero for
/// closed-form curves).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpmCurves {
    pub r: Vec<f64>,
    pub amam: Vec<f64>,
    pub ampm: Vec<f64>,
    pub amam_spread: Vec<f64>,
    pub ampm_spread: Vec<f64>,
}

pub fn amplitude_grid(r_max: f64, step: f64) -> Vec<f64> {
    let n = (r_max / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    match grid.iter().find(|r| !(**r >= 0.0)) {
        Some(r) => Err(CoreError::config(format!("amplitude grid value {r} is negative"))),
        None => Ok(()),
    }
}

/// Closed-form curves of an amplifier, optionally followed by a fixed
/// complex gain.
pub fn sspa_curves(coeffs: &SspaCoefficients, grid: &[f64], gain: Option<Complex64>) -> Result<AmpmCurves> {
    check_grid(grid)?;
    let g = gain.unwrap_or(Complex64::new(1.0, 0.0));
    let amam = grid.iter().map(|&r| Ok(coeffs.amam(r)? * g.norm())).collect::<Result<_>>()?;
    let ampm = grid.iter().map(|&r| Ok(coeffs.ampm(r)? + g.arg())).collect::<Result<_>>()?;
    Ok(AmpmCurves {
        r: grid.to_vec(),
        amam,
        ampm,
        amam_spread: vec![0.0; grid.len()],
        ampm_spread: vec![0.0; grid.len()],
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Probes `H(r e^{j phi})` at `probes` evenly spaced phases starting at
/// `phase_offset`, averaging output amplitude and phase shift.
pub fn learned_curves(h: &NonlinearTransform, grid: &[f64], probes: usize, phase_offset: f64) -> Result<AmpmCurves> {
    check_grid(grid)?;
    if probes == 0 {
        return Err(CoreError::config("at least one probe phase is required"));
    }
    let phases: Vec<f64> = (0..probes).map(|k| phase_offset + 2.0 * PI * k as f64 / probes as f64).collect();
    let pts: Vec<Complex64> = grid
        .iter()
        .flat_map(|&r| phases.iter().map(move |&p| Complex64::from_polar(r, p)))
        .collect();
    // H(s) = s (1 + da) e^{j dphi}: the output phase shift is dphi itself,
    // which also stays defined at r = 0.
    let (da, dp) = h.offsets(&pts)?;
    let mut c = AmpmCurves {
        r: grid.to_vec(),
        amam: Vec::with_capacity(grid.len()),
        ampm: Vec::with_capacity(grid.len()),
        amam_spread: Vec::with_capacity(grid.len()),
        ampm_spread: Vec::with_capacity(grid.len()),
    };
    for (k, &r) in grid.iter().enumerate() {
        let span = k * probes..(k + 1) * probes;
        let amps: Vec<f64> = da[span.clone()].iter().map(|d| r * (1.0 + d)).collect();
        let (am, asd) = mean_sd(&amps);
        let (pm, psd) = mean_sd(&dp[span]);
        c.amam.push(am);
        c.amam_spread.push(asd);
        c.ampm.push(pm);
        c.ampm_spread.push(psd);
    }
    Ok(c)
}

impl AmpmCurves {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,amam,ampm\n");
        for k in 0..self.r.len() {
            writeln!(out, "{},{:e},{:e}", self.r[k], self.amam[k], self.ampm[k]).expect("string write");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveErrors {
    pub r_min: f64,
    pub r_max: f64,
    /// `max |A_learned - A_true| / A_true`.
    pub max_rel_amplitude_error: f64,
    /// `max |Phi_learned - Phi_true|`, radians, wrapped to (-pi, pi].
    pub max_phase_error: f64,
    pub amplitude_rmse: f64,
    pub phase_rmse: f64,
}

fn wrap(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Errors over the grid points with `r_min <= r <= r_max`.
pub fn compare_curves(learned: &AmpmCurves, truth: &AmpmCurves, r_min: f64, r_max: f64) -> Result<CurveErrors> {
    if learned.r != truth.r {
        return Err(CoreError::config("curves use different amplitude grids"));
    }
    let idx: Vec<usize> = (0..truth.r.len())
        .filter(|&k| truth.r[k] >= r_min - 1e-12 && truth.r[k] <= r_max + 1e-12)
        .collect();
    if idx.is_empty() {
        return Err(CoreError::config("no grid points in the comparison range"));
    }
    let n = idx.len() as f64;
    let mut e = CurveErrors {
        r_min,
        r_max,
        max_rel_amplitude_error: 0.0,
        max_phase_error: 0.0,
        amplitude_rmse: 0.0,
        phase_rmse: 0.0,
    };
    for &k in &idx {
        let da = learned.amam[k] - truth.amam[k];
        let dp = wrap(learned.ampm[k] - truth.ampm[k]);
        e.max_rel_amplitude_error = e.max_rel_amplitude_error.max(da.abs() / truth.amam[k].abs());
        e.max_phase_error = e.max_phase_error.max(dp.abs());
        e.amplitude_rmse += da * da / n;
        e.phase_rmse += dp * dp / n;
    }
    e.amplitude_rmse = e.amplitude_rmse.sqrt();
    e.phase_rmse = e.phase_rmse.sqrt();
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformOverlay {
    pub i_expected: Vec<f64>,
    pub i_learned: Vec<f64>,
    pub q_expected: Vec<f64>,
    pub q_learned: Vec<f64>,
    /// Root mean square over all I and Q differences.
    pub rmse: f64,
}

/// Expected traces pass `pure` through the amplifier and an optional
/// fixed gain; learned traces apply `h` point by point.
pub fn waveform_overlay(
    h: &NonlinearTransform,
    coeffs: &SspaCoefficients,
    gain: Option<Complex64>,
    pure: &[Complex64],
) -> Result<WaveformOverlay> {
    let g = gain.unwrap_or(Complex64::new(1.0, 0.0));
    let expected: Vec<Complex64> = pure.iter().map(|&s| g * coeffs.apply(s)).collect();
    let learned = h.apply_batch(pure)?;
    overlay(&expected, &learned)
}

pub fn overlay(expected: &[Complex64], learned: &[Complex64]) -> Result<WaveformOverlay> {
    if expected.len() != learned.len() {
        return Err(CoreError::config("traces differ in length"));
    }
    let sq: f64 = expected.iter().zip(learned).map(|(e, l)| (e - l).norm_sqr()).sum();
    let rmse = if expected.is_empty() {
        0.0
    } else {
        (sq / (2 * expected.len()) as f64).sqrt()
    };
    Ok(WaveformOverlay {
        i_expected: expected.iter().map(|c| c.re).collect(),
        i_learned: learned.iter().map(|c| c.re).collect(),
        q_expected: expected.iter().map(|c| c.im).collect(),
        q_learned: learned.iter().map(|c| c.im).collect(),
        rmse,
    })
}

impl WaveformOverlay {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,i_expected,i_learned,q_expected,q_learned\n");
        for t in 0..self.i_expected.len() {
            writeln!(
                out,
                "{t},{:e},{:e},{:e},{:e}",
                self.i_expected[t], self.i_learned[t], self.q_expected[t], self.q_learned[t]
            )
            .expect("string write");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing() {
        let g = amplitude_grid(1.5, 0.05);
        assert_eq!(g.len(), 31);
        assert!((g[30] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn reference_amplifier_curve() {
        let c = sspa_curves(&SspaCoefficients::reference(), &[0.0, 1.0], None).unwrap();
        assert_eq!((c.amam[0], c.ampm[0]), (0.0, 0.0));
        assert!((c.amam[1] - 1.0063646625232894).abs() < 1e-15);
        assert!((c.ampm[1] - 0.3896478509858988).abs() < 1e-15);
        assert!(sspa_curves(&SspaCoefficients::reference(), &[-1.0], None).is_err());
    }

    #[test]
    fn wrap_range() {
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap(-PI), PI);
        assert_eq!(wrap(0.25), 0.25);
    }

    #[test]
    fn identical_overlay_has_zero_rmse() {
        let w: Vec<Complex64> = (0..8).map(|k| Complex64::new(k as f64, -1.0)).collect();
        let o = overlay(&w, &w).unwrap();
        assert_eq!(o.rmse, 0.0);
        assert_eq!(o.i_expected.len(), 8);
        let shifted: Vec<Complex64> = w.iter().map(|c| c + Complex64::new(0.1, 0.1)).collect();
        assert!((overlay(&w, &shifted).unwrap().rmse - 0.1).abs() < 1e-12);
    }
}
