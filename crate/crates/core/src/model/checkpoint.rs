//! Checkpoint files.
//!
//! ```text
//! MTAD-CHECKPOINT
//! version 1
//! <param name>\n<extents separated by spaces>\n<raw little-endian f32 values>
//! ...
//! records <count>\n
//! ```

use std::fs;
use std::path::Path;

use crate::error::{CheckpointError, Error, Result};
use crate::nn::{Module, Param};
use crate::numeric::Array;

const MAGIC: &str = "MTAD-CHECKPOINT";
const VERSION: u32 = 1;

/// One parameter as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

pub fn encode_checkpoint<'a>(params: impl IntoIterator<Item = &'a Param<f32>>) -> Vec<u8> {
    let mut out = format!("{MAGIC}\nversion {VERSION}\n").into_bytes();
    let mut count = 0usize;
    for p in params {
        out.extend_from_slice(p.name.as_bytes());
        out.push(b'\n');
        let shape: Vec<String> = p.shape().iter().map(usize::to_string).collect();
        out.extend_from_slice(shape.join(" ").as_bytes());
        out.push(b'\n');
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        count += 1;
    }
    out.extend_from_slice(format!("records {count}\n").as_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn line(&mut self) -> std::result::Result<&'a str, CheckpointError> {
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or(CheckpointError::Truncated)?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| CheckpointError::Malformed("line is not UTF-8".into()))
    }

    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<Vec<StoredParam>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.is_empty() {
        return Err(CheckpointError::Truncated);
    }
    if r.line().map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.line()?;
    if version != format!("version {VERSION}") {
        return Err(CheckpointError::VersionMismatch {
            expected: VERSION,
            found: version.to_string(),
        });
    }
    let mut params = Vec::new();
    loop {
        let line = r.line()?;
        if let Some(n) = line.strip_prefix("records ") {
            let expected: usize = n
                .parse()
                .map_err(|_| CheckpointError::Malformed(format!("bad record count {n:?}")))?;
            if expected != params.len() {
                return Err(CheckpointError::CountMismatch {
                    expected,
                    found: params.len(),
                });
            }
            if r.pos != bytes.len() {
                return Err(CheckpointError::Malformed("data after record count".into()));
            }
            return Ok(params);
        }
        let name = line.to_string();
        let shape: Vec<usize> = r
            .line()?
            .split(' ')
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CheckpointError::Malformed(format!("bad shape line for {name}")))?;
        if shape.is_empty() || shape.contains(&0) {
            return Err(CheckpointError::Malformed(format!("empty shape for {name}")));
        }
        let n: usize = shape.iter().product();
        let values = r
            .take(4 * n)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")))
            .collect();
        params.push(StoredParam { name, shape, values });
    }
}

pub fn save_checkpoint<M: Module<f32>>(model: &M, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model.params()))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Vec<StoredParam>> {
    let path = path.as_ref();
    let wrap = |kind| Error::Checkpoint {
        path: path.to_path_buf(),
        kind,
    };
    let bytes = fs::read(path)?;
    decode_checkpoint(&bytes).map_err(wrap)
}

/// Copies stored values into a model whose parameters must match by name,
/// order and shape.
pub fn restore<M: Module<f32>>(model: &mut M, stored: &[StoredParam]) -> std::result::Result<(), CheckpointError> {
    let mut params = model.params_mut();
    if params.len() != stored.len() {
        if let Some(p) = params.iter().find(|p| !stored.iter().any(|s| s.name == p.name)) {
            return Err(CheckpointError::MissingParam(p.name.clone()));
        }
        return Err(CheckpointError::CountMismatch {
            expected: params.len(),
            found: stored.len(),
        });
    }
    for (p, s) in params.iter_mut().zip(stored) {
        if p.name != s.name {
            return Err(CheckpointError::MissingParam(p.name.clone()));
        }
        if p.shape() != s.shape.as_slice() {
            return Err(CheckpointError::ShapeMismatch {
                name: s.name.clone(),
                stored: s.shape.clone(),
                model: p.shape().to_vec(),
            });
        }
    }
    for (p, s) in params.into_iter().zip(stored) {
        p.value = Array::new(&s.shape, s.values.clone()).expect("shape checked");
    }
    Ok(())
}

pub fn load_into<M: Module<f32>>(model: &mut M, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let stored = load_checkpoint(path)?;
    restore(model, &stored).map_err(|kind| Error::Checkpoint {
        path: path.to_path_buf(),
        kind,
    })
}
