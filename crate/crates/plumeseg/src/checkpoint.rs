//! Model checkpoints: `"CKP1"`, little-endian `u32` manifest length, JSON
//! manifest, then parameter, Adam `m` and Adam `v` blocks as little-endian
//! `f32` in manifest order.

use std::path::{Path, PathBuf};

use plumeseg_core::nn::{ModelState, Tensor, UNet, UNetConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read_file, write_file, AppError, Result};

pub const MAGIC: &[u8; 4] = b"CKP1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub in_channels: usize,
    pub depth: usize,
    pub base_filters: usize,
    pub prelu_init: f64,
}

impl From<UNetConfig> for NetConfig {
    fn from(c: UNetConfig) -> Self {
        Self {
            in_channels: c.in_channels,
            depth: c.depth,
            base_filters: c.base_filters,
            prelu_init: c.prelu_init,
        }
    }
}

impl From<&NetConfig> for UNetConfig {
    fn from(c: &NetConfig) -> Self {
        UNetConfig {
            in_channels: c.in_channels,
            depth: c.depth,
            base_filters: c.base_filters,
            prelu_init: c.prelu_init,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    config: NetConfig,
    names: Vec<String>,
    shapes: Vec<[usize; 4]>,
    step: u64,
    /// Last completed epoch (0-based).
    epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: UNetConfig,
    pub state: ModelState,
    pub epoch: usize,
}

pub fn encode_checkpoint(config: &UNetConfig, state: &ModelState, epoch: usize) -> Result<Vec<u8>> {
    state.validate()?;
    let manifest = Manifest {
        config: (*config).into(),
        names: state.names.clone(),
        shapes: state.params.iter().map(Tensor::shape).collect(),
        step: state.step,
        epoch,
    };
    let json = serde_json::to_vec(&manifest).expect("serializable");
    let mut out = Vec::with_capacity(8 + json.len() + 12 * state.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for group in [&state.params, &state.adam_m, &state.adam_v] {
        for t in group {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses a checkpoint and checks it against the network it describes.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(AppError::format("missing CKP1 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = bytes
        .get(8..8 + hlen)
        .ok_or_else(|| AppError::format("manifest length exceeds file size"))?;
    let m: Manifest = serde_json::from_slice(body).map_err(|e| AppError::format(format!("bad manifest: {e}")))?;
    if m.names.len() != m.shapes.len() {
        return Err(AppError::format("names and shapes differ in length"));
    }
    let config = UNetConfig::from(&m.config);
    let net = UNet::new(config)?;
    let specs = net.param_specs();
    if specs.len() != m.names.len()
        || specs.iter().zip(m.names.iter().zip(&m.shapes)).any(|(s, (n, sh))| s.name != *n || s.shape != *sh)
    {
        return Err(AppError::format("parameter layout does not match the configured network"));
    }
    let total: usize = m.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let data = &bytes[8 + hlen..];
    if data.len() != 12 * total {
        return Err(AppError::format(format!("{} data bytes, expected {}", data.len(), 12 * total)));
    }
    let mut floats = data.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")));
    let mut group = || -> Result<Vec<Tensor<f32>>> {
        m.shapes
            .iter()
            .map(|&s| Ok(Tensor::from_vec(s, floats.by_ref().take(s.iter().product()).collect())?))
            .collect()
    };
    let (params, adam_m, adam_v) = (group()?, group()?, group()?);
    let state = ModelState {
        names: m.names,
        params,
        adam_m,
        adam_v,
        step: m.step,
    };
    state.validate()?;
    Ok(Checkpoint { config, state, epoch: m.epoch })
}

pub fn write_checkpoint(path: &Path, config: &UNetConfig, state: &ModelState, epoch: usize) -> Result<()> {
    write_file(path, &encode_checkpoint(config, state, epoch)?)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?)
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("ckpt_epoch{epoch}.bin")
}

/// Highest-epoch `ckpt_epoch{N}.bin` in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<(usize, PathBuf)>> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(AppError::io(dir, e)),
    };
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in entries {
        let entry = entry.map_err(|e| AppError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let epoch = name
            .strip_prefix("ckpt_epoch")
            .and_then(|s| s.strip_suffix(".bin"))
            .and_then(|s| s.parse::<usize>().ok());
        if let Some(k) = epoch {
            if best.as_ref().is_none_or(|(b, _)| k > *b) {
                best = Some((k, entry.path()));
            }
        }
    }
    Ok(best)
}
