//! `RGCK` parameter files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"RGCK" | version: u8 | meta_len: u32 | meta: UTF-8 JSON (meta_len bytes)
//! | f64 parameter arrays, section by section, network by network,
//!   weights then biases per layer
//! ```
//!
//! The metadata lists each section's networks with their architecture and
//! parameter shapes, so a reader can size the payload before touching it.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::AdError;
use crate::layers::{Mlp, MlpSpec};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"RGCK";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub name: String,
    pub spec: MlpSpec,
    pub shapes: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionMeta {
    pub name: String,
    pub networks: Vec<NetworkMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub module: String,
    pub epoch: u64,
    pub seed: u64,
    pub optimizer_state: bool,
    /// Free-form, ordered description of how the sections compose.
    pub attributes: BTreeMap<String, serde_json::Value>,
    pub sections: Vec<SectionMeta>,
}

/// A named group of networks, e.g. one generator component.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub networks: Vec<(String, Mlp)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            networks: Vec::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, mlp: Mlp) -> Self {
        self.networks.push((name.into(), mlp));
        self
    }

    pub fn network(&self, name: &str) -> Option<&Mlp> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    fn meta(&self) -> SectionMeta {
        SectionMeta {
            name: self.name.clone(),
            networks: self
                .networks
                .iter()
                .map(|(n, m)| NetworkMeta {
                    name: n.clone(),
                    spec: m.spec().clone(),
                    shapes: m.param_shapes(),
                })
                .collect(),
        }
    }

    /// The section's slice of the payload.
    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (_, mlp) in &self.networks {
            for p in mlp.params() {
                out.extend(p.to_le_bytes());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub module: String,
    pub epoch: u64,
    pub seed: u64,
    pub attributes: BTreeMap<String, serde_json::Value>,
    pub sections: Vec<Section>,
}

impl Checkpoint {
    pub fn new(module: impl Into<String>, epoch: u64, seed: u64) -> Self {
        Checkpoint {
            module: module.into(),
            epoch,
            seed,
            attributes: BTreeMap::new(),
            sections: Vec::new(),
        }
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            module: self.module.clone(),
            epoch: self.epoch,
            seed: self.seed,
            optimizer_state: false,
            attributes: self.attributes.clone(),
            sections: self.sections.iter().map(Section::meta).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta()).expect("metadata is plain data");
        let mut out = Vec::with_capacity(9 + meta.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        for s in &self.sections {
            out.extend(s.payload());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AdError> {
        let bad = |m: &str| AdError::Format(m.to_string());
        if bytes.len() < 9 || &bytes[..4] != MAGIC {
            return Err(bad("missing RGCK magic"));
        }
        if bytes[4] != VERSION {
            return Err(AdError::Format(format!("unsupported version {}", bytes[4])));
        }
        let meta_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
        let meta_end = 9usize
            .checked_add(meta_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated metadata"))?;
        let meta: CheckpointMeta = serde_json::from_slice(&bytes[9..meta_end])
            .map_err(|e| AdError::Format(format!("metadata: {e}")))?;
        if meta.optimizer_state {
            return Err(bad("optimizer state payloads are not supported"));
        }

        let mut floats = bytes[meta_end..].chunks_exact(8);
        if !floats.remainder().is_empty() {
            return Err(bad("payload is not a whole number of f64 values"));
        }
        let mut sections = Vec::with_capacity(meta.sections.len());
        for sm in &meta.sections {
            let mut section = Section::new(sm.name.clone());
            for nm in &sm.networks {
                if nm.shapes != nm.spec.param_shapes() {
                    return Err(AdError::Format(format!(
                        "network {}/{}: shapes disagree with architecture",
                        sm.name, nm.name
                    )));
                }
                let mut params = Vec::with_capacity(nm.shapes.len());
                for &(r, c) in &nm.shapes {
                    let mut data = Vec::with_capacity(r * c);
                    for _ in 0..r * c {
                        let chunk = floats.next().ok_or_else(|| bad("truncated payload"))?;
                        data.push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
                    }
                    params.push(Tensor::from_vec(r, c, data)?);
                }
                section = section.with(nm.name.clone(), Mlp::from_params(nm.spec.clone(), params)?);
            }
            sections.push(section);
        }
        if floats.next().is_some() {
            return Err(bad("trailing payload bytes"));
        }
        Ok(Checkpoint {
            module: meta.module,
            epoch: meta.epoch,
            seed: meta.seed,
            attributes: meta.attributes,
            sections,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AdError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AdError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::NumericalLimit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = MlpSpec::tanh_stack(2, &[4], NumericalLimit::new(-0.5, 0.5).unwrap());
        let mut ck = Checkpoint::new("generator", 12, 99);
        ck.attributes
            .insert("kind".into(), serde_json::Value::String("hn".into()));
        ck.sections.push(
            Section::new("H")
                .with("amplitude", Mlp::glorot(spec.clone(), &mut rng))
                .with("phase", Mlp::glorot(spec, &mut rng)),
        );
        ck
    }

    #[test]
    fn bytes_round_trip() {
        let ck = sample();
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"RGCK");
        assert_eq!(bytes[4], 1);
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(Checkpoint::from_bytes(&wrong).is_err());
        let mut version = bytes;
        version[4] = 9;
        assert!(Checkpoint::from_bytes(&version).is_err());
    }
}
