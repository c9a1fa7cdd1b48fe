//! Checkpoint serialization.
//!
//! Layout: magic bytes `IPPO`, format version `u32`, then for each named
//! tensor: name length (`u32`) and bytes, rank (`u32`), dims (`u32` each),
//! little-endian IEEE-754 `f32` values; trailing CRC32 over everything
//! before it. All integers little-endian.
//!
//! The first tensor, `meta.arch`, records the architecture so checkpoints
//! are self-describing.

use super::networks::{ArchConfig, NetworkParameters};
use super::tensor::Tensor;
use std::fs;
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"IPPO";
const VERSION: u32 = 1;
const META_NAME: &str = "meta.arch";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes; not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint CRC mismatch")]
    Crc,
    #[error("truncated or malformed checkpoint: {0}")]
    Malformed(String),
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_tensor(buf: &mut Vec<u8>, name: &str, shape: &[usize], values: &[f64]) {
    push_u32(buf, name.len() as u32);
    buf.extend_from_slice(name.as_bytes());
    push_u32(buf, shape.len() as u32);
    for &d in shape {
        push_u32(buf, d as u32);
    }
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Serialize parameters to checkpoint bytes.
pub fn checkpoint_bytes(params: &NetworkParameters) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, VERSION);

    let a = params.arch();
    let meta = [
        a.depth_height as f64,
        a.depth_width as f64,
        a.conv_channels.0 as f64,
        a.conv_channels.1 as f64,
        a.latent_dim as f64,
        a.state_dim as f64,
        a.hidden_dim as f64,
        a.action_count as f64,
    ];
    push_tensor(&mut buf, META_NAME, &[meta.len()], &meta);

    for (name, tensor) in params.tensors() {
        push_tensor(&mut buf, name, tensor.shape(), tensor.data());
    }

    let crc = crc32fast::hash(&buf);
    push_u32(&mut buf, crc);
    buf
}

pub fn save_checkpoint(params: &NetworkParameters, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint_bytes(params))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Malformed(
                "unexpected end of data".into(),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Parse checkpoint bytes back into parameters.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<NetworkParameters, CheckpointError> {
    if bytes.len() < MAGIC.len() + 8 {
        return Err(CheckpointError::Malformed("file too short".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(CheckpointError::Crc);
    }

    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: VERSION,
        });
    }

    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    while r.remaining() > 0 {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let count: usize = shape.iter().product();
        let raw = r.take(count * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        tensors.push((name, Tensor::new(shape, data)));
    }

    let Some((first_name, meta)) = tensors.first() else {
        return Err(CheckpointError::Malformed("no tensors present".into()));
    };
    if first_name != META_NAME || meta.len() != 8 {
        return Err(CheckpointError::Malformed(format!(
            "first tensor must be `{META_NAME}` with 8 entries"
        )));
    }
    let m = meta.data();
    let arch = ArchConfig {
        depth_height: m[0] as usize,
        depth_width: m[1] as usize,
        conv_channels: (m[2] as usize, m[3] as usize),
        latent_dim: m[4] as usize,
        state_dim: m[5] as usize,
        hidden_dim: m[6] as usize,
        action_count: m[7] as usize,
    };

    NetworkParameters::from_tensors(arch, tensors.split_off(1))
        .map_err(|e| CheckpointError::Malformed(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParameters, CheckpointError> {
    parse_checkpoint(&fs::read(path)?)
}
