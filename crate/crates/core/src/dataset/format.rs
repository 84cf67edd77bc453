//! Embedding container format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MMEB"
//! 4       2     version (u16 LE, = 1)
//! 6       4     count (u32 LE)
//! 10      4     rows_per_sample (u32 LE)
//! 14      4     dim (u32 LE)
//! 18      ...   count * rows_per_sample * dim f32 LE, sample-major, row-major
//! ```
//!
//! Text modalities use one row per sample; image region stacks use one row
//! per region.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MMEB";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

/// In-memory contents of one embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    count: u32,
    rows_per_sample: u32,
    dim: u32,
    values: Vec<f32>,
}

impl EmbeddingFile {
    pub fn new(rows_per_sample: u32, dim: u32, values: Vec<f32>) -> Result<Self> {
        if rows_per_sample == 0 || dim == 0 {
            return Err(Error::config("rows_per_sample and dim must be positive"));
        }
        let stride = rows_per_sample as usize * dim as usize;
        if !values.len().is_multiple_of(stride) {
            return Err(Error::shape(
                "embedding payload",
                values.len().div_ceil(stride) * stride,
                values.len(),
            ));
        }
        let count = u32::try_from(values.len() / stride)
            .map_err(|_| Error::config("too many samples for one embedding file"))?;
        Ok(EmbeddingFile {
            count,
            rows_per_sample,
            dim,
            values,
        })
    }

    pub fn empty(rows_per_sample: u32, dim: u32) -> Result<Self> {
        Self::new(rows_per_sample, dim, Vec::new())
    }

    pub fn count(&self) -> usize {
        self.count as usize
    }

    pub fn rows_per_sample(&self) -> usize {
        self.rows_per_sample as usize
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// All rows of sample `i`, concatenated.
    pub fn sample(&self, i: usize) -> &[f32] {
        let stride = self.rows_per_sample() * self.dim();
        &self.values[i * stride..(i + 1) * stride]
    }

    pub fn push_sample(&mut self, rows: &[f32]) -> Result<()> {
        let stride = self.rows_per_sample() * self.dim();
        if rows.len() != stride {
            return Err(Error::shape("embedding sample", stride, rows.len()));
        }
        self.values.extend_from_slice(rows);
        self.count += 1;
        Ok(())
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 4 * self.values.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&self.rows_per_sample.to_le_bytes());
        out.extend_from_slice(&self.dim.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses a complete file image, validating the header before touching
    /// the payload.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let len = bytes.len() as u64;
        if bytes.len() < 4 {
            return Err(Error::format(len, "truncated header"));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::format(0, format!("bad magic {:?}", &bytes[..4])));
        }
        if bytes.len() < 6 {
            return Err(Error::format(len, "truncated header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(len, "truncated header"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let (count, rows_per_sample, dim) = (word(6), word(10), word(14));
        if rows_per_sample == 0 {
            return Err(Error::format(10, "rows_per_sample is zero"));
        }
        if dim == 0 {
            return Err(Error::format(14, "dim is zero"));
        }
        let floats = u64::from(count) * u64::from(rows_per_sample) * u64::from(dim);
        let expected = HEADER_LEN as u64 + 4 * floats;
        if len < expected {
            return Err(Error::format(len, format!("truncated payload, expected {expected} bytes")));
        }
        if len > expected {
            return Err(Error::format(expected, format!("{} trailing bytes", len - expected)));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(EmbeddingFile {
            count,
            rows_per_sample,
            dim,
            values,
        })
    }
}

pub fn write_embeddings(path: impl AsRef<Path>, file: &EmbeddingFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingFile::from_bytes(&bytes)
}
