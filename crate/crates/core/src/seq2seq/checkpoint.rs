//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! "BANS"                      magic
//! u32                         format version
//! u32                         tensor count
//! per tensor:
//!   u32 name length, UTF-8 name, u32 rank, u64 per dim, f64 payload
//! u64                         step
//! f64                         learning rate
//! u32 count, f64 per entry    validation-loss history
//! u32 length, UTF-8 text      model config as `key = value` lines
//! u64                         CRC-64/XZ of every preceding byte
//! ```

use std::io::Write;
use std::path::Path;

use crc::{Crc, CRC_64_XZ};

use crate::nnkernel::{Matrix, Parameters};

use super::{ModelConfig, ModelParams};

pub const MAGIC: &[u8; 4] = b"BANS";
pub const FORMAT_VERSION: u32 = 1;

const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Model parameters plus the training state needed to resume.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub step: u64,
    pub config: ModelConfig,
    pub params: ModelParams,
    pub learning_rate: f64,
    /// Aggregate validation loss of every checkpoint so far.
    pub val_history: Vec<f64>,
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let out = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Malformed("string is not UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn new(step: u64, config: ModelConfig, params: ModelParams, learning_rate: f64, val_history: Vec<f64>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            step,
            config,
            params,
            learning_rate,
            val_history,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, self.format_version);
        let tensors = self.params.tensors();
        put_u32(&mut buf, tensors.len() as u32);
        for t in tensors {
            put_str(&mut buf, &t.name);
            put_u32(&mut buf, 2);
            put_u64(&mut buf, t.value.rows() as u64);
            put_u64(&mut buf, t.value.cols() as u64);
            for &v in t.value.as_slice() {
                put_f64(&mut buf, v);
            }
        }
        put_u64(&mut buf, self.step);
        put_f64(&mut buf, self.learning_rate);
        put_u32(&mut buf, self.val_history.len() as u32);
        for &v in &self.val_history {
            put_f64(&mut buf, v);
        }
        put_str(&mut buf, &self.config.to_kv_text());
        let sum = CHECKSUM.checksum(&buf);
        put_u64(&mut buf, sum);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let n_tensors = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_tensors.min(64));
        for _ in 0..n_tensors {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
            if rank != 2 {
                return Err(CheckpointError::Malformed(format!("tensor {name} has rank {rank}")));
            }
            let (rows, cols) = (dims[0] as usize, dims[1] as usize);
            let count = rows.checked_mul(cols).ok_or(CheckpointError::Truncated)?;
            let payload = r.take(count.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
            let data = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let value = Matrix::from_vec(rows, cols, data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
            tensors.push((name, value));
        }
        let step = r.u64()?;
        let learning_rate = r.f64()?;
        let n_hist = r.u32()? as usize;
        let val_history = (0..n_hist).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let config_text = r.string()?;
        let body_end = r.pos;
        let stored = r.u64()?;
        if r.pos != bytes.len() {
            return Err(CheckpointError::Malformed("trailing bytes after checksum".into()));
        }
        if CHECKSUM.checksum(&bytes[..body_end]) != stored {
            return Err(CheckpointError::ChecksumMismatch);
        }

        let config = ModelConfig::from_kv_text(&config_text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let mut params = ModelParams::zeros(&config);
        {
            let mut slots = params.tensors_mut();
            if slots.len() != tensors.len() {
                return Err(CheckpointError::Malformed(format!(
                    "{} tensors stored, model has {}",
                    tensors.len(),
                    slots.len()
                )));
            }
            for (name, value) in tensors {
                let slot = slots
                    .iter_mut()
                    .find(|t| t.name == name)
                    .ok_or_else(|| CheckpointError::Malformed(format!("unexpected tensor {name}")))?;
                if slot.value.shape() != value.shape() {
                    return Err(CheckpointError::Malformed(format!(
                        "tensor {name} has shape {:?}, config implies {:?}",
                        value.shape(),
                        slot.value.shape()
                    )));
                }
                slot.value = value;
            }
        }
        Ok(Self {
            format_version: version,
            step,
            config,
            params,
            learning_rate,
            val_history,
        })
    }

    /// Writes via a temporary file and a rename, so readers never see a
    /// partial checkpoint.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(".tmp");
        let tmp = path.with_file_name(tmp_name);
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        drop(f);
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
