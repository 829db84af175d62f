//! `RGDS` dataset files.
//!
//! ```text
//! b"RGDS" | version: u8 = 1 | meta_len: u32 LE | meta: UTF-8 JSON
//! | per sample, f32 LE: sample_len (I, Q) received points,
//!   sample_len (I, Q) pure points, fading (I, Q) or (0, 0),
//!   then label: u16 LE, 0xFFFF when absent
//! ```

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetConfig, RadioSample};
use crate::error::{CoreError, Result};

pub const MAGIC: &[u8; 4] = b"RGDS";
pub const VERSION: u8 = 1;
const NO_LABEL: u16 = 0xFFFF;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(flatten)]
    pub config: DatasetConfig,
    pub num_samples: usize,
    pub noise_power: f64,
    pub received_power: f64,
    pub transmit_power: f64,
}

impl DatasetMeta {
    pub fn describe(dataset: &Dataset) -> Result<Self> {
        Ok(DatasetMeta {
            config: dataset.config.clone(),
            num_samples: dataset.samples.len(),
            noise_power: dataset.config.noise_power(),
            received_power: dataset.received_power(),
            transmit_power: dataset.transmit_power()?,
        })
    }
}

fn push_points(out: &mut Vec<u8>, points: &[Complex64]) {
    for p in points {
        out.extend_from_slice(&(p.re as f32).to_le_bytes());
        out.extend_from_slice(&(p.im as f32).to_le_bytes());
    }
}

pub fn to_bytes(dataset: &Dataset) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&DatasetMeta::describe(dataset)?).expect("metadata is plain data");
    let len = dataset.config.pure.sample_len;
    let mut out = Vec::with_capacity(9 + meta.len() + dataset.samples.len() * (16 * len + 10));
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for s in &dataset.samples {
        if s.points.len() != len || s.pure_points.len() != len {
            return Err(CoreError::format("sample length disagrees with configuration"));
        }
        push_points(&mut out, &s.points);
        push_points(&mut out, &s.pure_points);
        push_points(&mut out, &[s.fading_used.unwrap_or_default()]);
        out.extend_from_slice(&s.label.unwrap_or(NO_LABEL).to_le_bytes());
    }
    Ok(out)
}

/// Splits the header off, returning the metadata and payload.
pub fn parse_header(bytes: &[u8]) -> Result<(DatasetMeta, &[u8])> {
    if bytes.len() < 9 || &bytes[..4] != MAGIC {
        return Err(CoreError::format("missing RGDS magic"));
    }
    if bytes[4] != VERSION {
        return Err(CoreError::format(format!("unsupported RGDS version {}", bytes[4])));
    }
    let meta_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let end = 9usize
        .checked_add(meta_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| CoreError::format("truncated metadata"))?;
    let meta: DatasetMeta =
        serde_json::from_slice(&bytes[9..end]).map_err(|e| CoreError::format(format!("metadata: {e}")))?;
    Ok((meta, &bytes[end..]))
}

pub fn from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let (meta, payload) = parse_header(bytes)?;
    let len = meta.config.pure.sample_len;
    let per_sample = 8 * (2 * len + 1) + 2;
    let expected = meta
        .num_samples
        .checked_mul(per_sample)
        .ok_or_else(|| CoreError::format("sample count overflows"))?;
    if payload.len() != expected {
        return Err(CoreError::format(format!(
            "payload holds {} bytes, metadata implies {expected}",
            payload.len()
        )));
    }
    let fading_present = !meta.config.channel.fading.is_none();
    let point = |b: &[u8]| {
        let re = f32::from_le_bytes(b[..4].try_into().expect("4 bytes"));
        let im = f32::from_le_bytes(b[4..8].try_into().expect("4 bytes"));
        Complex64::new(re as f64, im as f64)
    };
    let samples = payload
        .chunks_exact(per_sample)
        .map(|chunk| {
            let pts: Vec<Complex64> = chunk[..8 * (2 * len + 1)].chunks_exact(8).map(point).collect();
            let label = u16::from_le_bytes(chunk[per_sample - 2..].try_into().expect("2 bytes"));
            RadioSample {
                points: pts[..len].to_vec(),
                pure_points: pts[len..2 * len].to_vec(),
                label: (label != NO_LABEL).then_some(label),
                fading_used: fading_present.then_some(pts[2 * len]),
            }
        })
        .collect();
    Ok(Dataset {
        config: meta.config,
        samples,
    })
}

pub fn write(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::File::create(path)?.write_all(&to_bytes(dataset)?)?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

/// Reads only the header of a dataset file.
pub fn read_meta(path: impl AsRef<Path>) -> Result<DatasetMeta> {
    let mut f = std::fs::File::open(path)?;
    let mut head = [0u8; 9];
    f.read_exact(&mut head)?;
    let meta_len = u32::from_le_bytes(head[5..9].try_into().expect("4 bytes")) as usize;
    let mut bytes = head.to_vec();
    bytes.resize(9 + meta_len, 0);
    f.read_exact(&mut bytes[9..])
        .map_err(|_| CoreError::format("truncated metadata"))?;
    parse_header(&bytes).map(|(m, _)| m)
}
