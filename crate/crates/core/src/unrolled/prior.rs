use num_complex::Complex64;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::rng::{purpose, stream};
use crate::sim::{synthesize_pure, PureSignalConfig};

/// Pool of pure-signal points regenerated from the known signal
/// parameters; never taken from received data.
#[derive(Debug, Clone, PartialEq)]
pub struct PurePrior {
    points: Vec<Complex64>,
}

impl PurePrior {
    pub fn from_points(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(CoreError::config("pure-signal pool is empty"));
        }
        Ok(PurePrior { points })
    }

    pub fn regenerate(pure: &PureSignalConfig, avg_power: f64, waveforms: usize, seed: u64) -> Result<Self> {
        let mut points = Vec::with_capacity(waveforms * pure.sample_len);
        for i in 0..waveforms {
            let mut rng = stream(seed, purpose::PRIOR + i as u64);
            points.extend(synthesize_pure(pure, avg_power, &mut rng)?);
        }
        Self::from_points(points)
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// `m` draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Vec<Complex64> {
        (0..m).map(|_| self.points[rng.gen_range(0..self.points.len())]).collect()
    }
}
