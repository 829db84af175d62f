use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationScheme {
    #[serde(rename = "bpsk")]
    Bpsk,
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "8psk")]
    Psk8,
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "32qam")]
    Qam32,
    #[serde(rename = "64qam")]
    Qam64,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 6] = [
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Psk8,
        ModulationScheme::Qam16,
        ModulationScheme::Qam32,
        ModulationScheme::Qam64,
    ];

    pub fn order(self) -> usize {
        match self {
            ModulationScheme::Bpsk => 2,
            ModulationScheme::Qpsk => 4,
            ModulationScheme::Psk8 => 8,
            ModulationScheme::Qam16 => 16,
            ModulationScheme::Qam32 => 32,
            ModulationScheme::Qam64 => 64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationScheme::Bpsk => "bpsk",
            ModulationScheme::Qpsk => "qpsk",
            ModulationScheme::Psk8 => "8psk",
            ModulationScheme::Qam16 => "16qam",
            ModulationScheme::Qam32 => "32qam",
            ModulationScheme::Qam64 => "64qam",
        }
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModulationScheme::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CoreError::config(format!("unknown modulation '{s}'")))
    }
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Points indexed by bit label, scaled to unit mean power.
///
/// PSK labels follow a Gray code around the circle, square QAM uses Gray
/// PAM per axis, and 32QAM is the 6x6 grid without its corners.
pub fn constellation(scheme: ModulationScheme) -> Vec<Complex64> {
    let m = scheme.order();
    let raw: Vec<Complex64> = match scheme {
        ModulationScheme::Bpsk | ModulationScheme::Psk8 | ModulationScheme::Qpsk => {
            let offset = if scheme == ModulationScheme::Qpsk { PI / 4.0 } else { 0.0 };
            let mut pts = vec![Complex64::new(0.0, 0.0); m];
            for pos in 0..m {
                pts[gray(pos)] = Complex64::from_polar(1.0, offset + 2.0 * PI * pos as f64 / m as f64);
            }
            pts
        }
        ModulationScheme::Qam16 | ModulationScheme::Qam64 => {
            let side = (m as f64).sqrt() as usize;
            let bits = side.trailing_zeros();
            let level = |pos: usize| (2 * pos) as f64 - (side - 1) as f64;
            let mut pts = vec![Complex64::new(0.0, 0.0); m];
            for i in 0..side {
                for q in 0..side {
                    let label = (gray(i) << bits) | gray(q);
                    pts[label] = Complex64::new(level(i), level(q));
                }
            }
            pts
        }
        ModulationScheme::Qam32 => {
            let levels = [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0];
            let mut pts = Vec::with_capacity(32);
            for &i in &levels {
                for &q in &levels {
                    if f64::abs(i) == 5.0 && f64::abs(q) == 5.0 {
                        continue;
                    }
                    pts.push(Complex64::new(i, q));
                }
            }
            pts
        }
    };
    let power = raw.iter().map(|c| c.norm_sqr()).sum::<f64>() / m as f64;
    let scale = power.sqrt().recip();
    raw.into_iter().map(|c| c * scale).collect()
}
