//! OCFS1: a small checksummed container for named `f64` tensors plus JSON
//! metadata.
//!
//! Layout (all integers little-endian):
//!
//! | bytes        | content                                            |
//! |--------------|----------------------------------------------------|
//! | 8            | magic `b"OCFS1\0\r\n"`                             |
//! | 2            | format version (u16, currently 1)                  |
//! | 4            | header length `H` (u32)                            |
//! | H            | UTF-8 JSON `{"metadata": .., "sections": [..]}`    |
//! | 8 * Σ sizes  | section payloads, row-major IEEE-754 binary64 LE   |
//! | 4            | CRC32C of every preceding byte (u32)               |
//!
//! Each entry of `"sections"` is `{"name": str, "shape": [usize]}`; payloads
//! follow in the same order. Floats that must survive bit-exactly belong in
//! sections, not in the metadata.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 8] = *b"OCFS1\0\r\n";
pub const VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ContainerError {
    #[error("not an OCFS1 container")]
    BadMagic,
    #[error("unsupported container version {0}")]
    VersionMismatch(u16),
    #[error("container is truncated")]
    TruncatedFile,
    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("bad container header: {0}")]
    BadHeader(String),
    #[error("missing section {0:?}")]
    MissingSection(String),
    #[error("section {name:?} has {len} values but shape {shape:?}")]
    ShapeMismatch {
        name: String,
        shape: Vec<usize>,
        len: usize,
    },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Section {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        Section {
            name: name.into(),
            shape,
            data,
        }
    }

    pub fn vector(name: impl Into<String>, data: Vec<f64>) -> Self {
        let n = data.len();
        Self::new(name, vec![n], data)
    }
}

#[derive(Serialize, Deserialize)]
struct SectionHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: serde_json::Value,
    sections: Vec<SectionHeader>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub metadata: serde_json::Value,
    pub sections: Vec<Section>,
}

impl Container {
    pub fn new(metadata: serde_json::Value) -> Self {
        Container {
            metadata,
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, section: Section) -> &mut Self {
        self.sections.push(section);
        self
    }

    pub fn section(&self, name: &str) -> Result<&Section, ContainerError> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| ContainerError::MissingSection(name.to_string()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ContainerError> {
        for s in &self.sections {
            if s.shape.iter().product::<usize>() != s.data.len() {
                return Err(ContainerError::ShapeMismatch {
                    name: s.name.clone(),
                    shape: s.shape.clone(),
                    len: s.data.len(),
                });
            }
        }
        let header = Header {
            metadata: self.metadata.clone(),
            sections: self
                .sections
                .iter()
                .map(|s| SectionHeader {
                    name: s.name.clone(),
                    shape: s.shape.clone(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| ContainerError::BadHeader(e.to_string()))?;
        let payload: usize = self.sections.iter().map(|s| s.data.len()).sum();
        let mut out = Vec::with_capacity(18 + header.len() + 8 * payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for s in &self.sections {
            for v in &s.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32c::crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        if bytes.len() < MAGIC.len() {
            return Err(if MAGIC.starts_with(bytes) {
                ContainerError::TruncatedFile
            } else {
                ContainerError::BadMagic
            });
        }
        if bytes[..8] != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let mut cur = Cursor { bytes, pos: 8 };
        let version = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(ContainerError::VersionMismatch(version));
        }
        let header_len = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
        let header_bytes = cur.take(header_len)?;
        // verify the checksum before trusting anything inside the header
        let payload_start = cur.pos;
        if bytes.len() < payload_start + 4 {
            return Err(ContainerError::TruncatedFile);
        }
        let body_end = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[body_end..].try_into().unwrap());
        let header: Header = match serde_json::from_slice(header_bytes) {
            Ok(h) => h,
            Err(e) => {
                let computed = crc32c::crc32c(&bytes[..body_end]);
                if computed != stored {
                    return Err(ContainerError::ChecksumMismatch { stored, computed });
                }
                return Err(ContainerError::BadHeader(e.to_string()));
            }
        };
        let total: usize = header
            .sections
            .iter()
            .map(|s| s.shape.iter().product::<usize>())
            .sum();
        let expected_len = payload_start + 8 * total + 4;
        if bytes.len() < expected_len {
            return Err(ContainerError::TruncatedFile);
        }
        if bytes.len() > expected_len {
            return Err(ContainerError::BadHeader(format!(
                "{} trailing bytes",
                bytes.len() - expected_len
            )));
        }
        let computed = crc32c::crc32c(&bytes[..body_end]);
        if computed != stored {
            return Err(ContainerError::ChecksumMismatch { stored, computed });
        }
        let mut sections = Vec::with_capacity(header.sections.len());
        for sh in header.sections {
            let n: usize = sh.shape.iter().product();
            let raw = cur.take(8 * n)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            sections.push(Section {
                name: sh.name,
                shape: sh.shape,
                data,
            });
        }
        Ok(Container {
            metadata: header.metadata,
            sections,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ContainerError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| io_err(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> ContainerError {
    ContainerError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).ok_or(ContainerError::TruncatedFile)?;
        let s = self.bytes.get(self.pos..end).ok_or(ContainerError::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Container {
        let mut c = Container::new(json!({"kind": "test", "n": 3}));
        c.push(Section::new("w", vec![2, 2], vec![1.0, -0.5, f64::MIN_POSITIVE, 1e300]));
        c.push(Section::vector("b", vec![0.0, -0.0]));
        c
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let back = Container::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back.metadata, c.metadata);
        for (a, b) in c.sections.iter().zip(&back.sections) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.data), bits(&b.data));
        }
    }

    #[test]
    fn corrupted_payload_is_detected() {
        let mut bytes = sample().to_bytes().unwrap();
        let n = bytes.len();
        bytes[n - 10] ^= 0x40;
        assert!(matches!(
            Container::from_bytes(&bytes),
            Err(ContainerError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn header_errors() {
        let bytes = sample().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(Container::from_bytes(&bad), Err(ContainerError::BadMagic));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert_eq!(Container::from_bytes(&v2), Err(ContainerError::VersionMismatch(2)));
        for cut in [4, 9, 20, bytes.len() - 1] {
            assert_eq!(
                Container::from_bytes(&bytes[..cut]),
                Err(ContainerError::TruncatedFile),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn shape_must_match_data() {
        let mut c = Container::new(json!(null));
        c.push(Section::new("x", vec![3], vec![1.0]));
        assert!(matches!(c.to_bytes(), Err(ContainerError::ShapeMismatch { .. })));
    }
}
