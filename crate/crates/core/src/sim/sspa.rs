//! Eight-coefficient solid-state power amplifier model.
//!
//! `A(r) = (a1 r^a2 + a3 r^(a2+1)) / (1 + a4 r^(a2+1))` for amplitude and the
//! same form with `b` for the phase shift in radians.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SspaCoefficients {
    pub alpha: [f64; 4],
    pub beta: [f64; 4],
}

fn rational(c: &[f64; 4], r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let p = r.powf(c[1]);
    let p1 = p * r;
    (c[0] * p + c[2] * p1) / (1.0 + c[3] * p1)
}

fn check_amplitude(r: f64) -> Result<()> {
    if r >= 0.0 {
        Ok(())
    } else {
        Err(CoreError::config(format!("amplitude {r} must be non-negative")))
    }
}

impl SspaCoefficients {
    pub fn new(alpha: [f64; 4], beta: [f64; 4]) -> Result<Self> {
        let c = SspaCoefficients { alpha, beta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.iter().chain(&self.beta).all(|v| v.is_finite()) {
            return Err(CoreError::config("amplifier coefficients must be finite"));
        }
        if self.alpha[3] <= 0.0 || self.beta[3] <= 0.0 {
            return Err(CoreError::config("amplifier denominators need a4 > 0 and b4 > 0"));
        }
        if self.alpha[1] <= 0.0 || self.beta[1] <= 0.0 {
            return Err(CoreError::config("amplifier exponents must be positive"));
        }
        Ok(())
    }

    /// Measured amplifier used as the reference curve.
    pub fn reference() -> Self {
        SspaCoefficients {
            alpha: [7.851, 1.5388, -0.4511, 6.3531],
            beta: [4.6388, 2.0949, -0.0325, 10.8217],
        }
    }

    pub fn amam(&self, r: f64) -> Result<f64> {
        check_amplitude(r)?;
        Ok(rational(&self.alpha, r))
    }

    pub fn ampm(&self, r: f64) -> Result<f64> {
        check_amplitude(r)?;
        Ok(rational(&self.beta, r))
    }

    /// `a e^{j phi} -> A(a) e^{j (phi + Phi(a))}`.
    pub fn apply(&self, s: Complex64) -> Complex64 {
        let a = s.norm();
        if a == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let unit = s / a;
        unit * Complex64::from_polar(rational(&self.alpha, a), rational(&self.beta, a))
    }
}

pub fn apply_sspa(coeffs: &SspaCoefficients, waveform: &[Complex64]) -> Vec<Complex64> {
    waveform.iter().map(|&s| coeffs.apply(s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTable {
    pub devices: Vec<(u16, SspaCoefficients)>,
}

impl DeviceTable {
    /// The ten simulated transmitters.
    pub fn standard() -> Self {
        const A4: f64 = 9.5297;
        const B4: f64 = 16.2325;
        let rows: [([f64; 3], [f64; 3]); 10] = [
            ([10.2598, 1.9926, -0.2782], [6.0838, 1.3190, -0.0375]),
            ([10.7344, 2.0668, -0.5015], [6.3304, 1.3058, -0.0348]),
            ([11.6849, 2.0193, -0.6689], [6.7758, 2.0689, -0.0280]),
            ([10.2963, 1.7932, -0.2929], [6.1256, 1.4660, -0.0297]),
            ([11.3625, 2.0100, -0.4304], [6.6729, 2.2441, -0.0168]),
            ([11.4996, 2.0766, -0.5835], [6.7440, 2.9490, -0.0454]),
            ([10.5223, 1.7999, -0.5658], [6.4241, 1.4531, -0.0425]),
            ([10.4870, 1.8997, -0.4515], [6.4135, 1.4193, -0.0305]),
            ([11.3525, 2.2360, -0.2442], [6.9513, 2.1135, -0.0366]),
            ([10.0237, 1.9307, -0.4582], [6.0633, 2.4454, -0.0363]),
        ];
        DeviceTable {
            devices: rows
                .iter()
                .enumerate()
                .map(|(id, (a, b))| {
                    (
                        id as u16,
                        SspaCoefficients {
                            alpha: [a[0], a[1], a[2], A4],
                            beta: [b[0], b[1], b[2], B4],
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn get(&self, id: u16) -> Result<&SspaCoefficients> {
        self.devices
            .iter()
            .find(|(d, _)| *d == id)
            .map(|(_, c)| c)
            .ok_or_else(|| CoreError::config(format!("unknown device {id}")))
    }

    pub fn ids(&self) -> Vec<u16> {
        self.devices.iter().map(|(d, _)| *d).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_at_unit_amplitude() {
        let c = SspaCoefficients::reference();
        let a = (7.851 - 0.4511) / (1.0 + 6.3531);
        let p = (4.6388 - 0.0325) / (1.0 + 10.8217);
        assert!((c.amam(1.0).unwrap() - a).abs() < 1e-15);
        assert!((c.ampm(1.0).unwrap() - p).abs() < 1e-15);
        assert!((a - 1.0063646625232894).abs() < 1e-15);
        assert!((p - 0.3896478509858988).abs() < 1e-15);
    }

    #[test]
    fn table_row_zero_at_half() {
        let table = DeviceTable::standard();
        let c = table.get(0).unwrap();
        assert!((c.amam(0.5).unwrap() - 1.1573940955827338).abs() < 1e-13);
    }

    #[test]
    fn zero_and_negative_amplitude() {
        for (_, c) in DeviceTable::standard().devices {
            assert_eq!(c.amam(0.0).unwrap(), 0.0);
            assert_eq!(c.ampm(0.0).unwrap(), 0.0);
            assert!(c.amam(-0.1).is_err());
            assert!(c.ampm(f64::NAN).is_err());
        }
    }

    #[test]
    fn reference_phase_rises_then_falls() {
        // Single interior peak near r = 0.587.
        let c = SspaCoefficients::reference();
        let v: Vec<f64> = (0..=1000).map(|i| c.ampm(i as f64 / 1000.0).unwrap()).collect();
        let peak = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert!((580..=595).contains(&peak), "peak at {peak}");
        assert!(v[..=peak].windows(2).all(|w| w[1] > w[0]));
        assert!(v[peak..].windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn apply_rotates_and_scales() {
        let c = SspaCoefficients::reference();
        let out = c.apply(Complex64::new(0.0, 1.0));
        assert!((out.norm() - 1.0063646625232894).abs() < 1e-12);
        let expect = std::f64::consts::FRAC_PI_2 + 0.3896478509858988;
        assert!((out.arg() - expect).abs() < 1e-12);
        assert_eq!(c.apply(Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn table_has_ten_unique_valid_devices() {
        let t = DeviceTable::standard();
        assert_eq!(t.ids(), (0..10).collect::<Vec<u16>>());
        for (_, c) in &t.devices {
            c.validate().unwrap();
            for i in 0..=400 {
                assert!(c.amam(i as f64 / 100.0).unwrap().is_finite());
            }
        }
        assert!(t.get(10).is_err());
    }

    #[test]
    fn invalid_denominator_rejected() {
        assert!(SspaCoefficients::new([1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 1.0]).is_err());
    }
}
