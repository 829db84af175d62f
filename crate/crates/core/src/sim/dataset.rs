use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::channel::{draw_awgn, ChannelConfig, FadingMode};
use super::modulation::constellation;
use super::pulse::{pulse_shape, PureSignalConfig};
use super::sspa::{DeviceTable, SspaCoefficients};
use crate::error::{CoreError, Result};
use crate::rng::stream;

/// Which impairments a received signal carries: fading `a` and/or
/// transmitter nonlinearity `h`, always with additive noise `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalModel {
    N,
    An,
    Hn,
    Han,
}

impl SignalModel {
    pub const ALL: [SignalModel; 4] = [SignalModel::N, SignalModel::An, SignalModel::Hn, SignalModel::Han];

    pub fn has_transmitter(self) -> bool {
        matches!(self, SignalModel::Hn | SignalModel::Han)
    }

    pub fn has_fading(self) -> bool {
        matches!(self, SignalModel::An | SignalModel::Han)
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalModel::N => "n",
            SignalModel::An => "an",
            SignalModel::Hn => "hn",
            SignalModel::Han => "han",
        }
    }
}

impl fmt::Display for SignalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignalModel {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        SignalModel::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CoreError::config(format!("unknown signal model '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioSample {
    pub points: Vec<Complex64>,
    pub pure_points: Vec<Complex64>,
    pub label: Option<u16>,
    pub fading_used: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub model: SignalModel,
    pub pure: PureSignalConfig,
    pub channel: ChannelConfig,
    /// Transmitter ids from the standard device table; empty unless the
    /// model includes a transmitter.
    pub devices: Vec<u16>,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn new(model: SignalModel, channel: ChannelConfig, devices: Vec<u16>, samples_per_class: usize, seed: u64) -> Self {
        DatasetConfig {
            model,
            pure: PureSignalConfig::default(),
            channel,
            devices,
            samples_per_class,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pure.validate()?;
        self.channel.validate()?;
        validate_model(self.model, &self.channel.fading, !self.devices.is_empty())?;
        let table = DeviceTable::standard();
        for (i, d) in self.devices.iter().enumerate() {
            table.get(*d)?;
            if self.devices[..i].contains(d) {
                return Err(CoreError::config(format!("device {d} listed twice")));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.devices.len().max(1)
    }

    pub fn num_samples(&self) -> usize {
        self.num_classes() * self.samples_per_class
    }

    pub fn noise_power(&self) -> f64 {
        self.channel.noise_power()
    }

    pub fn device_coefficients(&self) -> Result<Vec<(u16, SspaCoefficients)>> {
        let table = DeviceTable::standard();
        self.devices.iter().map(|&d| Ok((d, *table.get(d)?))).collect()
    }
}

fn validate_model(model: SignalModel, fading: &FadingMode, has_device: bool) -> Result<()> {
    if model.has_transmitter() != has_device {
        return Err(CoreError::config(if has_device {
            format!("model {model} has no transmitter, devices are not allowed")
        } else {
            format!("model {model} needs at least one device")
        }));
    }
    if model.has_fading() == fading.is_none() {
        return Err(CoreError::config(if fading.is_none() {
            format!("model {model} needs a fading mode")
        } else {
            format!("model {model} has no fading, got {fading}")
        }));
    }
    Ok(())
}

/// Random symbols, pulse shaped to the configured transmit power.
pub fn synthesize_pure<R: Rng + ?Sized>(pure: &PureSignalConfig, avg_power: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    let points = constellation(pure.scheme);
    let symbols: Vec<Complex64> = (0..pure.symbols_needed())
        .map(|_| points[rng.gen_range(0..points.len())])
        .collect();
    pulse_shape(&symbols, pure, avg_power)
}

/// `x = alpha * h(s) + n`, with `alpha` and `h` present per `model`.
pub fn synthesize_sample<R: Rng + ?Sized>(
    model: SignalModel,
    pure: &PureSignalConfig,
    channel: &ChannelConfig,
    device: Option<(u16, &SspaCoefficients)>,
    rng: &mut R,
) -> Result<RadioSample> {
    channel.validate()?;
    validate_model(model, &channel.fading, device.is_some())?;
    let pure_points = synthesize_pure(pure, channel.avg_transmit_power, rng)?;
    let fading_used = channel.fading.draw(rng);
    let noise = draw_awgn(rng, channel.noise_power(), pure.sample_len);
    let points = pure_points
        .iter()
        .zip(&noise)
        .map(|(&s, &n)| {
            let h = device.map_or(s, |(_, c)| c.apply(s));
            fading_used.map_or(h, |a| a * h) + n
        })
        .collect();
    Ok(RadioSample {
        points,
        pure_points,
        label: device.map(|(d, _)| d),
        fading_used,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub samples: Vec<RadioSample>,
}

/// Sample `i` (class-major order) draws from stream `i` of the seed, so
/// samples can be produced in any order or in parallel.
pub fn build_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let devices = config.device_coefficients()?;
    let mut samples = Vec::with_capacity(config.num_samples());
    for i in 0..config.num_samples() {
        let device = devices.get(i / config.samples_per_class.max(1)).map(|(d, c)| (*d, c));
        let mut rng = stream(config.seed, i as u64);
        samples.push(synthesize_sample(
            config.model,
            &config.pure,
            &config.channel,
            device,
            &mut rng,
        )?);
    }
    Ok(Dataset {
        config: config.clone(),
        samples,
    })
}

fn mean_power<'a>(points: impl Iterator<Item = &'a Complex64>) -> f64 {
    let (sum, n) = points.fold((0.0, 0usize), |(s, n), c| (s + c.norm_sqr(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl Dataset {
    pub fn received_power(&self) -> f64 {
        mean_power(self.samples.iter().flat_map(|s| &s.points))
    }

    pub fn pure_power(&self) -> f64 {
        mean_power(self.samples.iter().flat_map(|s| &s.pure_points))
    }

    /// Mean `|h(s)|^2` after each sample's own amplifier.
    pub fn transmit_power(&self) -> Result<f64> {
        let table = DeviceTable::standard();
        let mut sum = 0.0;
        let mut n = 0usize;
        for s in &self.samples {
            let coeffs = s.label.map(|d| table.get(d)).transpose()?;
            for &p in &s.pure_points {
                sum += coeffs.map_or(p, |c| c.apply(p)).norm_sqr();
                n += 1;
            }
        }
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }
}

/// Aligned `(received, pure, label)` triples pooled across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPointBatch {
    pub received: Vec<Complex64>,
    pub pure: Vec<Complex64>,
    pub labels: Vec<Option<u16>>,
}

pub fn split_into_points(dataset: &Dataset) -> SamplingPointBatch {
    let n: usize = dataset.samples.iter().map(|s| s.points.len()).sum();
    let mut out = SamplingPointBatch {
        received: Vec::with_capacity(n),
        pure: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
    };
    for s in &dataset.samples {
        out.received.extend_from_slice(&s.points);
        out.pure.extend_from_slice(&s.pure_points);
        out.labels.extend(std::iter::repeat(s.label).take(s.points.len()));
    }
    out
}

impl SamplingPointBatch {
    pub fn len(&self) -> usize {
        self.received.len()
    }

    pub fn is_empty(&self) -> bool {
        self.received.is_empty()
    }

    /// One shuffled pass: `len / batch` full batches, remainder dropped.
    pub fn epoch_batches<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        order.chunks_exact(batch.max(1)).map(<[usize]>::to_vec).collect()
    }
}

/// Endless shuffled batches; reshuffles after every full pass.
#[derive(Debug, Clone)]
pub struct BatchCursor {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
}

impl BatchCursor {
    pub fn new(len: usize, batch: usize) -> Result<Self> {
        if batch == 0 || batch > len {
            return Err(CoreError::config(format!("batch {batch} does not fit {len} points")));
        }
        Ok(BatchCursor {
            order: (0..len).collect(),
            pos: len,
            batch,
        })
    }

    pub fn next_batch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        if self.pos + self.batch > self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let b = &self.order[self.pos..self.pos + self.batch];
        self.pos += self.batch;
        b
    }
}
