//! Binary containers: 8 magic bytes, a little-endian `u64` header length, a
//! UTF-8 JSON header, then a raw little-endian float payload.
//!
//! | format     | magic      | payload                                               |
//! |------------|------------|-------------------------------------------------------|
//! | VMAT       | `VMAT0001` | `N × D` values as `f32`, row-major                    |
//! | checkpoint | `HMVAE001` | parameter blocks then optimizer accumulators, as `f64` |

use std::path::Path;

use hmvae_core::data::{Standardization, SubjectMatrix, VolumeMask};
use hmvae_core::model::{Architecture, ModelParams, BLOCK_COUNT, BLOCK_NAMES};
use hmvae_core::optim::{Checkpoint, RmsState, TrainConfig, CHECKPOINT_FORMAT_VERSION};
use hmvae_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

const VMAT_PREFIX: &[u8; 4] = b"VMAT";
const VMAT_VERSION: &str = "0001";
const CHECKPOINT_PREFIX: &[u8; 5] = b"HMVAE";
const CHECKPOINT_VERSION: &str = "001";

fn magic(prefix: &[u8], version: &str) -> [u8; 8] {
    let mut m = [0u8; 8];
    m[..prefix.len()].copy_from_slice(prefix);
    m[prefix.len()..].copy_from_slice(version.as_bytes());
    m
}

fn encode_container(magic: [u8; 8], header: &impl Serialize, payload: &[u8]) -> Vec<u8> {
    let header = serde_json::to_vec(header).expect("headers serialize");
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(payload);
    out
}

/// Checks magic and version, returning the header bytes and the payload.
fn decode_container<'a>(
    bytes: &'a [u8],
    format: &'static str,
    prefix: &[u8],
    version: &'static str,
) -> Result<(&'a [u8], &'a [u8])> {
    let truncated = |expected: u64| Error::Truncated {
        format,
        expected,
        found: bytes.len() as u64,
    };
    if bytes.len() < 8 {
        if bytes.len() >= prefix.len() && &bytes[..prefix.len()] == prefix {
            return Err(truncated(16));
        }
        return Err(Error::BadMagic {
            format,
            found: bytes.to_vec(),
        });
    }
    if &bytes[..prefix.len()] != prefix {
        return Err(Error::BadMagic {
            format,
            found: bytes[..8].to_vec(),
        });
    }
    if &bytes[prefix.len()..8] != version.as_bytes() {
        return Err(Error::Version {
            format,
            found: String::from_utf8_lossy(&bytes[prefix.len()..8]).into_owned(),
            supported: version,
        });
    }
    if bytes.len() < 16 {
        return Err(truncated(16));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let header_end = 16u64.saturating_add(header_len);
    if (bytes.len() as u64) < header_end {
        return Err(truncated(header_end));
    }
    let header_end = header_end as usize;
    Ok((&bytes[16..header_end], &bytes[header_end..]))
}

fn check_payload_len(format: &'static str, payload: &[u8], header_end: usize, expected: usize) -> Result<()> {
    if payload.len() < expected {
        return Err(Error::Truncated {
            format,
            expected: (header_end + expected) as u64,
            found: (header_end + payload.len()) as u64,
        });
    }
    if payload.len() > expected {
        return Err(Error::TrailingBytes {
            format,
            extra: (payload.len() - expected) as u64,
        });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VmatHeader {
    n: usize,
    d: usize,
    subject_ids: Vec<String>,
    labels: Option<Vec<u8>>,
    mask: Option<VolumeMask>,
}

/// Serializes values at 32-bit precision.
pub fn encode_vmat(m: &SubjectMatrix) -> Result<Vec<u8>> {
    m.validate()?;
    let header = VmatHeader {
        n: m.n_subjects(),
        d: m.n_features(),
        subject_ids: m.subject_ids.clone(),
        labels: m.labels.clone(),
        mask: m.mask.clone(),
    };
    let mut payload = Vec::with_capacity(m.values.as_slice().len() * 4);
    for &v in m.values.as_slice() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(encode_container(magic(VMAT_PREFIX, VMAT_VERSION), &header, &payload))
}

pub fn decode_vmat(bytes: &[u8]) -> Result<SubjectMatrix> {
    const FORMAT: &str = "VMAT";
    let (header_bytes, payload) = decode_container(bytes, FORMAT, VMAT_PREFIX, VMAT_VERSION)?;
    let header: VmatHeader =
        serde_json::from_slice(header_bytes).map_err(|source| Error::Header { format: FORMAT, source })?;
    let count = header
        .n
        .checked_mul(header.d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Invalid(format!("VMAT header dimensions {} × {} overflow", header.n, header.d)))?;
    check_payload_len(FORMAT, payload, 16 + header_bytes.len(), count)?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    let values = Matrix::from_vec(header.n, header.d, values)?;
    Ok(SubjectMatrix::new(values, header.subject_ids, header.labels, header.mask)?)
}

pub fn vmat_save(m: &SubjectMatrix, path: &Path) -> Result<()> {
    fsutil::atomic_write(path, &encode_vmat(m)?)
}

pub fn vmat_load(path: &Path) -> Result<SubjectMatrix> {
    decode_vmat(&fsutil::read(path)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    format_version: u32,
    architecture: Architecture,
    /// `(name, rows, cols)` per parameter block, in payload order.
    blocks: Vec<(String, usize, usize)>,
    config: TrainConfig,
    data_stats: Standardization,
    elbo_trace: Vec<f64>,
    optimizer_steps: u64,
}

/// Header plus parameter blocks, then the RMSprop accumulators in the same order.
pub fn encode_checkpoint(c: &Checkpoint) -> Result<Vec<u8>> {
    c.params.validate()?;
    if c.optimizer.accumulators.architecture() != c.params.architecture() {
        return Err(Error::Invalid("optimizer state does not match the model shape".into()));
    }
    let shapes = c.params.block_shapes();
    let header = CheckpointHeader {
        format_version: c.format_version,
        architecture: c.params.architecture(),
        blocks: BLOCK_NAMES
            .iter()
            .zip(shapes)
            .map(|(name, (r, k))| (name.to_string(), r, k))
            .collect(),
        config: c.config.clone(),
        data_stats: c.data_stats.clone(),
        elbo_trace: c.elbo_trace.clone(),
        optimizer_steps: c.optimizer.step_count,
    };
    let mut payload = Vec::with_capacity(c.params.num_params() * 16);
    for block in c.params.blocks().into_iter().chain(c.optimizer.accumulators.blocks()) {
        for v in block {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(encode_container(magic(CHECKPOINT_PREFIX, CHECKPOINT_VERSION), &header, &payload))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    const FORMAT: &str = "checkpoint";
    let (header_bytes, payload) = decode_container(bytes, FORMAT, CHECKPOINT_PREFIX, CHECKPOINT_VERSION)?;
    let header: CheckpointHeader =
        serde_json::from_slice(header_bytes).map_err(|source| Error::Header { format: FORMAT, source })?;
    if header.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Version {
            format: FORMAT,
            found: header.format_version.to_string(),
            supported: CHECKPOINT_VERSION,
        });
    }
    let mut params = ModelParams::zeros(&header.architecture);
    let shapes = params.block_shapes();
    if header.blocks.len() != BLOCK_COUNT {
        return Err(Error::Invalid(format!(
            "checkpoint lists {} parameter blocks, expected {BLOCK_COUNT}",
            header.blocks.len()
        )));
    }
    for ((name, rows, cols), (expected_name, shape)) in header.blocks.iter().zip(BLOCK_NAMES.iter().zip(shapes)) {
        if name != expected_name || (*rows, *cols) != shape {
            return Err(Error::Invalid(format!(
                "checkpoint block {name} ({rows} × {cols}) does not match architecture ({expected_name} {} × {})",
                shape.0, shape.1
            )));
        }
    }
    let count = params.num_params();
    check_payload_len(FORMAT, payload, 16 + header_bytes.len(), count * 16)?;
    let mut words = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut accumulators = params.zeros_like();
    for block in params.blocks_mut().into_iter().chain(accumulators.blocks_mut()) {
        for v in block.iter_mut() {
            *v = words.next().expect("payload length checked");
        }
    }
    if header.data_stats.dim() != header.architecture.data_dim {
        return Err(Error::Invalid(format!(
            "checkpoint standardization covers {} features, model expects {}",
            header.data_stats.dim(),
            header.architecture.data_dim
        )));
    }
    Ok(Checkpoint {
        params,
        config: header.config,
        elbo_trace: header.elbo_trace,
        data_stats: header.data_stats,
        optimizer: RmsState {
            accumulators,
            step_count: header.optimizer_steps,
        },
        format_version: header.format_version,
    })
}

pub fn checkpoint_save(c: &Checkpoint, path: &Path) -> Result<()> {
    fsutil::atomic_write(path, &encode_checkpoint(c)?)
}

pub fn checkpoint_load(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fsutil::read(path)?)
}
