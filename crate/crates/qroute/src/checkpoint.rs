//! Binary checkpoint container for GNN parameters.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 8 | magic `QRGNNCKP` |
//! | 4 | format version (`1`) |
//! | 4 | embedding dimension |
//! | 4 | hidden dimension |
//! | 1 | message direction (`0` backward, `1` forward) |
//! | 3 | reserved, zero |
//! | 4 | tensor count |
//!
//! followed by one record per tensor: `u16` name length, UTF-8 name, `u32`
//! rows, `u32` cols, then `rows * cols` IEEE-754 `f64` values, row-major.

use std::path::Path;

use qroute_core::gnn::{GnnConfig, GnnError, MessageDirection, ParameterSet};

pub const MAGIC: [u8; 8] = *b"QRGNNCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (this build reads version {VERSION})")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("unknown message direction code {0}")]
    BadDirection(u8),
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("checkpoint has embedding_dim {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("checkpoint has hidden_dim {found}, expected {expected}")]
    HiddenMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Tensor(#[from] GnnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(params: &ParameterSet) -> Vec<u8> {
    let c = params.config();
    let mut out = Vec::with_capacity(32 + params.len() * 8 + 64 * 20);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(c.embedding_dim as u32).to_le_bytes());
    out.extend_from_slice(&(c.hidden_dim as u32).to_le_bytes());
    out.push(match c.direction {
        MessageDirection::Backward => 0,
        MessageDirection::Forward => 1,
    });
    out.extend_from_slice(&[0; 3]);
    let tensors: Vec<_> = params.tensors().collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, rows, cols, values) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Truncated(what));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parse a checkpoint. With `expected`, the stored dimensions must match it.
pub fn decode(bytes: &[u8], expected: Option<&GnnConfig>) -> Result<ParameterSet, CheckpointError> {
    let mut r = Reader { bytes };
    if r.take(8, "magic").map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let embedding_dim = r.u32("embedding_dim")? as usize;
    let hidden_dim = r.u32("hidden_dim")? as usize;
    let direction = match r.take(4, "direction")?[0] {
        0 => MessageDirection::Backward,
        1 => MessageDirection::Forward,
        d => return Err(CheckpointError::BadDirection(d)),
    };
    let config = GnnConfig { embedding_dim, hidden_dim, direction };
    if let Some(e) = expected {
        if e.embedding_dim != embedding_dim {
            return Err(CheckpointError::DimensionMismatch { expected: e.embedding_dim, found: embedding_dim });
        }
        if e.hidden_dim != hidden_dim {
            return Err(CheckpointError::HiddenMismatch { expected: e.hidden_dim, found: hidden_dim });
        }
    }
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let len = r.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "tensor name")?).map_err(|_| CheckpointError::BadName)?;
        let rows = r.u32("tensor rows")? as usize;
        let cols = r.u32("tensor cols")? as usize;
        let n = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or(CheckpointError::Truncated("tensor data"))?;
        let data = r.take(n, "tensor data")?;
        let values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        tensors.push((name.to_owned(), rows, cols, values));
    }
    if !r.bytes.is_empty() {
        return Err(CheckpointError::TrailingBytes(r.bytes.len()));
    }
    Ok(ParameterSet::from_tensors(config, tensors)?)
}

pub fn save(path: &Path, params: &ParameterSet) -> Result<(), CheckpointError> {
    // Write-then-rename so a crash never leaves a half-written checkpoint.
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(params))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path, expected: Option<&GnnConfig>) -> Result<ParameterSet, CheckpointError> {
    decode(&std::fs::read(path)?, expected)
}
