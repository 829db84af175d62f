use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::complex_normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingMode {
    None,
    BlockRayleigh { avg_gain: f64 },
    Fixed { re: f64, im: f64 },
}

impl FadingMode {
    pub fn is_none(&self) -> bool {
        matches!(self, FadingMode::None)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FadingMode::BlockRayleigh { avg_gain } if !(avg_gain > 0.0 && avg_gain.is_finite()) => {
                Err(CoreError::config(format!("Rayleigh average gain {avg_gain} must be positive")))
            }
            FadingMode::Fixed { re, im } if !(re.is_finite() && im.is_finite()) => {
                Err(CoreError::config("fixed fading coefficient must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// `E|alpha|^2` under this mode.
    pub fn mean_gain(&self) -> f64 {
        match *self {
            FadingMode::None => 1.0,
            FadingMode::BlockRayleigh { avg_gain } => avg_gain,
            FadingMode::Fixed { re, im } => re * re + im * im,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Complex64> {
        match *self {
            FadingMode::None => None,
            FadingMode::BlockRayleigh { avg_gain } => Some(draw_fading(rng, avg_gain)),
            FadingMode::Fixed { re, im } => Some(Complex64::new(re, im)),
        }
    }
}

impl fmt::Display for FadingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FadingMode::None => write!(f, "none"),
            FadingMode::BlockRayleigh { avg_gain } => write!(f, "rayleigh:{avg_gain}"),
            FadingMode::Fixed { re, im } => write!(f, "fixed:{re},{im}"),
        }
    }
}

impl FromStr for FadingMode {
    type Err = CoreError;

    /// `none`, `rayleigh:<gain>` or `fixed:<re>,<im>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CoreError::config(format!("fading '{s}' is not none, rayleigh:<gain> or fixed:<re>,<im>"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let mode = match s.split_once(':') {
            None if s.eq_ignore_ascii_case("none") => FadingMode::None,
            Some((k, v)) if k.eq_ignore_ascii_case("rayleigh") => FadingMode::BlockRayleigh { avg_gain: num(v)? },
            Some((k, v)) if k.eq_ignore_ascii_case("fixed") => {
                let (re, im) = v.split_once(',').ok_or_else(bad)?;
                FadingMode::Fixed { re: num(re)?, im: num(im)? }
            }
            _ => return Err(bad()),
        };
        mode.validate()?;
        Ok(mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub fading: FadingMode,
    pub snr_db: f64,
    pub avg_transmit_power: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            fading: FadingMode::None,
            snr_db: 18.0,
            avg_transmit_power: 1.0,
        }
    }
}

impl ChannelConfig {
    pub fn noise_power(&self) -> f64 {
        noise_power(self.avg_transmit_power, self.snr_db)
    }

    pub fn validate(&self) -> Result<()> {
        self.fading.validate()?;
        if !(self.avg_transmit_power > 0.0 && self.avg_transmit_power.is_finite()) {
            return Err(CoreError::config("average transmit power must be positive"));
        }
        let p = self.noise_power();
        if !(p > 0.0 && p.is_finite()) {
            return Err(CoreError::config(format!("SNR {} dB gives noise power {p}", self.snr_db)));
        }
        Ok(())
    }
}

/// `P * 10^(-snr/10)`.
pub fn noise_power(avg_transmit_power: f64, snr_db: f64) -> f64 {
    avg_transmit_power * 10f64.powf(-snr_db / 10.0)
}

/// `g_I + j g_Q` with independent components of variance `avg_gain / 2`.
pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R, avg_gain: f64) -> Complex64 {
    complex_normal(rng, avg_gain)
}

pub fn draw_awgn<R: Rng + ?Sized>(rng: &mut R, noise_power: f64, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| complex_normal(rng, noise_power)).collect()
}
