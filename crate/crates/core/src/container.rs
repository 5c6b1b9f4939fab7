//! Versioned binary container shared by every saved model.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "NFTM" | version: u32 | header_len: u32 | header: JSON (header_len bytes)
//!        | tensor data: f64 per element, tensors in header order
//!        | crc32: u32 over every preceding byte
//! ```
//!
//! The JSON header is `{"kind", "meta", "tensors": [{"name", "shape"}]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NFTM";
pub const FORMAT_VERSION: u32 = 1;
const PRELUDE: usize = 12;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}, this reader handles {FORMAT_VERSION}")]
    UnsupportedVersion(u32),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("{0} unexpected bytes after the checksum")]
    TrailingBytes(usize),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("expected a {expected:?} model, found {found:?}")]
    KindMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// A decoded file: model kind, free-form metadata and named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<(TensorEntry, Vec<f64>)>,
    /// CRC32 stored in the file; set by [`decode`], ignored by [`encode`].
    pub checksum: u32,
}

impl Container {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        Self { kind: kind.into(), meta, tensors: Vec::new(), checksum: 0 }
    }

    pub fn push(&mut self, name: &str, shape: Vec<usize>, data: &[f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push((TensorEntry { name: name.into(), shape }, data.to_vec()));
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), ContainerError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(ContainerError::KindMismatch { expected: kind.into(), found: self.kind.clone() })
        }
    }

    /// Removes and returns the tensor called `name` after checking its shape.
    pub fn take(&mut self, name: &str, shape: &[usize]) -> Result<Vec<f64>, ContainerError> {
        let pos = self
            .tensors
            .iter()
            .position(|(e, _)| e.name == name)
            .ok_or_else(|| ContainerError::Header(format!("missing tensor {name:?}")))?;
        let (entry, data) = self.tensors.remove(pos);
        if entry.shape != shape {
            return Err(ContainerError::Header(format!(
                "tensor {name:?} has shape {:?}, expected {shape:?}",
                entry.shape
            )));
        }
        Ok(data)
    }
}

pub fn encode(c: &Container) -> Vec<u8> {
    let header = Header {
        kind: c.kind.clone(),
        meta: c.meta.clone(),
        tensors: c.tensors.iter().map(|(e, _)| e.clone()).collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let n_values: usize = c.tensors.iter().map(|(_, d)| d.len()).sum();
    let mut out = Vec::with_capacity(PRELUDE + json.len() + 8 * n_values + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, data) in &c.tensors {
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn stored_and_computed(bytes: &[u8]) -> (u32, u32) {
    let body = bytes.len() - 4;
    (u32_at(bytes, body), crc32fast::hash(&bytes[..body]))
}

pub fn decode(bytes: &[u8]) -> Result<Container, ContainerError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    if bytes.len() < PRELUDE + 4 {
        return Err(ContainerError::Truncated { expected: PRELUDE + 4, found: bytes.len() });
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(ContainerError::UnsupportedVersion(version));
    }
    let header_len = u32_at(bytes, 8) as usize;
    let header_end = PRELUDE + header_len;
    if bytes.len() < header_end + 4 {
        return Err(ContainerError::Truncated { expected: header_end + 4, found: bytes.len() });
    }
    let (stored, computed) = stored_and_computed(bytes);
    let header: Header = match serde_json::from_slice(&bytes[PRELUDE..header_end]) {
        Ok(h) => h,
        Err(_) if stored != computed => return Err(ContainerError::Checksum { stored, computed }),
        Err(e) => return Err(ContainerError::Header(e.to_string())),
    };
    let n_values: usize = header.tensors.iter().map(TensorEntry::len).sum();
    let expected = header_end + 8 * n_values + 4;
    if bytes.len() < expected {
        return Err(ContainerError::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(ContainerError::TrailingBytes(bytes.len() - expected));
    }
    if stored != computed {
        return Err(ContainerError::Checksum { stored, computed });
    }

    let mut at = header_end;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        let data = bytes[at..at + 8 * entry.len()]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        at += 8 * entry.len();
        tensors.push((entry, data));
    }
    Ok(Container { kind: header.kind, meta: header.meta, tensors, checksum: stored })
}

pub fn write_file(c: &Container, path: impl AsRef<Path>) -> Result<(), ContainerError> {
    std::fs::write(path, encode(c))?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Container, ContainerError> {
    decode(&std::fs::read(path)?)
}
