use std::fmt::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

fn bin_of(v: f64, lo: f64, width: f64, bins: usize) -> Option<usize> {
    let k = ((v - lo) / width).floor();
    (k >= 0.0 && k < bins as f64).then_some(k as usize)
}

/// Normalized 2-D histogram over `[lo, hi)^2`; `counts[i * bins + j]`
/// holds in-phase bin `i`, quadrature bin `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpectrum2D {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
}

pub fn density_spectrum_2d(points: &[Complex64], lo: f64, hi: f64, bins: usize) -> Result<DensitySpectrum2D> {
    if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(CoreError::config(format!("degenerate density region [{lo}, {hi}) with {bins} bins")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins * bins];
    let mut overflow = 0;
    for p in points {
        match (bin_of(p.re, lo, width, bins), bin_of(p.im, lo, width, bins)) {
            (Some(i), Some(j)) => counts[i * bins + j] += 1,
            _ => overflow += 1,
        }
    }
    Ok(DensitySpectrum2D {
        lo,
        hi,
        bins,
        counts,
        overflow,
        total: points.len() as u64,
    })
}

impl DensitySpectrum2D {
    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    /// Density in cell `(i, j)`: count / (total * area).
    pub fn density(&self, i: usize, j: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts[i * self.bins + j] as f64 / (self.total as f64 * self.cell_width().powi(2))
    }

    pub fn inside(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin centers along either axis.
    pub fn centers(&self) -> Vec<f64> {
        let w = self.cell_width();
        (0..self.bins).map(|k| self.lo + (k as f64 + 0.5) * w).collect()
    }

    /// Row-major densities.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.bins * self.bins)
            .map(|k| self.density(k / self.bins, k % self.bins))
            .collect()
    }

    /// One row per in-phase bin, one column per quadrature bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.bins {
            let row: Vec<String> = (0..self.bins).map(|j| format!("{:e}", self.density(i, j))).collect();
            writeln!(out, "{}", row.join(",")).expect("string write");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram1D {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
}

pub fn density_histogram_1d(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram1D> {
    if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(CoreError::config(format!("degenerate histogram range [{lo}, {hi}) with {bins} bins")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut overflow = 0;
    for &v in values {
        match bin_of(v, lo, width, bins) {
            Some(k) => counts[k] += 1,
            None => overflow += 1,
        }
    }
    Ok(Histogram1D {
        lo,
        hi,
        bins,
        counts,
        overflow,
        total: values.len() as u64,
    })
}

impl Histogram1D {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|k| self.lo + (k as f64 + 0.5) * self.bin_width())
            .collect()
    }

    pub fn density(&self) -> Vec<f64> {
        let norm = self.total.max(1) as f64 * self.bin_width();
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,density\n");
        for (c, d) in self.centers().iter().zip(self.density()) {
            writeln!(out, "{c},{d:e}").expect("string write");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_at_origin() {
        let pts = vec![Complex64::new(0.0, 0.0); 10];
        let d = density_spectrum_2d(&pts, -2.0, 2.0, 64).unwrap();
        assert_eq!(d.counts[32 * 64 + 32], 10);
        assert_eq!(d.inside(), 10);
        let mass: f64 = d.grid().iter().sum::<f64>() * d.cell_width().powi(2);
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_overflow() {
        let d = density_spectrum_2d(&[], -2.0, 2.0, 64).unwrap();
        assert!(d.grid().iter().all(|&v| v == 0.0));
        assert_eq!(d.overflow, 0);
        let pts = [Complex64::new(2.0, 0.0), Complex64::new(-2.0, 1.0), Complex64::new(0.0, f64::NAN)];
        let d = density_spectrum_2d(&pts, -2.0, 2.0, 64).unwrap();
        assert_eq!(d.overflow, 2);
        assert_eq!(d.inside() + d.overflow, d.total);
        assert!(density_spectrum_2d(&pts, 1.0, 1.0, 4).is_err());
        assert!(density_spectrum_2d(&pts, -1.0, 1.0, 0).is_err());
    }

    #[test]
    fn constant_histogram() {
        let h = density_histogram_1d(&[0.7; 25], 0.0, 3.0, 100).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[23], 25);
        let mass: f64 = h.density().iter().sum::<f64>() * h.bin_width();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(h.to_csv().starts_with("bin_center,density\n"));
        assert!(density_histogram_1d(&[1.0], 2.0, 1.0, 10).is_err());
    }
}
