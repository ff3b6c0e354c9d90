//! On-disk window store: binary window files plus JSON scaler and label
//! statistics.
//!
//! Window file layout (little-endian):
//!
//! ```text
//! magic "MTADWIN\0" | version u32 | count u64 | steps u32 | channels u32 | target_len u32
//! per window: id u64 | trace_id u32 | start u64 | majority u8 | max_speed f64
//!             | anomaly_fraction f64 | targets u8 × target_len | input f32 × steps·channels
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::maneuver::Maneuver;
use crate::data::pipeline::{LabelStats, ScalerParams, Window};
use crate::error::{Error, Result};
use crate::numeric::Array;

const MAGIC: &[u8; 8] = b"MTADWIN\0";
const VERSION: u32 = 1;

pub const TRAIN_FILE: &str = "train.bin";
pub const TEST_FILE: &str = "test.bin";
pub const SCALER_FILE: &str = "scaler.json";
pub const STATS_FILE: &str = "label_stats.json";
pub const COUNTS_FILE: &str = "counts.json";

pub fn encode_windows(windows: &[Window]) -> Result<Vec<u8>> {
    let (steps, channels, target_len) = match windows.first() {
        Some(w) => (w.input.rows(), w.input.cols(), w.targets.len()),
        None => (0, 0, 0),
    };
    let mut out = Vec::with_capacity(32 + windows.len() * (41 + target_len + 4 * steps * channels));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(windows.len() as u64).to_le_bytes());
    for v in [steps, channels, target_len] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for w in windows {
        if w.input.shape() != [steps, channels] || w.targets.len() != target_len {
            return Err(Error::data(format!("window {} has a different shape from the first", w.id)));
        }
        out.extend_from_slice(&w.id.to_le_bytes());
        out.extend_from_slice(&w.trace_id.to_le_bytes());
        out.extend_from_slice(&(w.start as u64).to_le_bytes());
        out.push(w.majority_label as u8);
        out.extend_from_slice(&w.max_speed.to_le_bytes());
        out.extend_from_slice(&w.anomaly_fraction.to_le_bytes());
        for &s in &w.targets {
            out.push(u8::try_from(s).map_err(|_| Error::data(format!("symbol {s} too large")))?);
        }
        for v in w.input.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::data("window store is truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

pub fn decode_windows(bytes: &[u8]) -> Result<Vec<Window>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err(Error::data("not a window store (bad magic)"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::data(format!("window store version {version}, expected {VERSION}")));
    }
    let count = c.u64()? as usize;
    let steps = c.u32()? as usize;
    let channels = c.u32()? as usize;
    let target_len = c.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(bytes.len()));
    for _ in 0..count {
        let id = c.u64()?;
        let trace_id = c.u32()?;
        let start = c.u64()? as usize;
        let label = c.take(1)?[0];
        let majority_label = Maneuver::from_index(usize::from(label))
            .ok_or_else(|| Error::data(format!("window {id}: bad label index {label}")))?;
        let max_speed = c.f64()?;
        let anomaly_fraction = c.f64()?;
        let targets = c.take(target_len)?.iter().map(|&b| usize::from(b)).collect();
        let data = c
            .take(4 * steps * channels)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("chunk of 4")))
            .collect();
        out.push(Window {
            id,
            input: Array::new(&[steps, channels], data)?,
            targets,
            majority_label,
            max_speed,
            trace_id,
            start,
            anomaly_fraction,
        });
    }
    if c.pos != bytes.len() {
        return Err(Error::data("trailing bytes after window records"));
    }
    Ok(out)
}

pub fn write_windows(path: impl AsRef<Path>, windows: &[Window]) -> Result<()> {
    fs::write(path, encode_windows(windows)?)?;
    Ok(())
}

pub fn read_windows(path: impl AsRef<Path>) -> Result<Vec<Window>> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    decode_windows(&bytes)
}

/// Window counts at each pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub traces: usize,
    pub segmented: usize,
    pub speed_filtered: usize,
    pub train: usize,
    pub test: usize,
    pub excluded_from_train: usize,
}

/// A prepared dataset: scaled train/test windows and training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedStore {
    pub train: Vec<Window>,
    pub test: Vec<Window>,
    pub scaler: ScalerParams,
    pub stats: LabelStats,
    pub counts: Counts,
}

impl PreparedStore {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let files = [
            (TRAIN_FILE, encode_windows(&self.train)?),
            (TEST_FILE, encode_windows(&self.test)?),
            (SCALER_FILE, to_json(&self.scaler)?),
            (STATS_FILE, to_json(&self.stats)?),
            (COUNTS_FILE, to_json(&self.counts)?),
        ];
        let mut written = Vec::new();
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            train: read_windows(dir.join(TRAIN_FILE))?,
            test: read_windows(dir.join(TEST_FILE))?,
            scaler: from_json(&dir.join(SCALER_FILE))?,
            stats: from_json(&dir.join(STATS_FILE))?,
            counts: from_json(&dir.join(COUNTS_FILE))?,
        })
    }
}

/// Hash identifying a saved store: SHA-256 over the data files in a fixed order.
pub fn store_hash(dir: impl AsRef<Path>) -> Result<String> {
    let dir = dir.as_ref();
    let mut h = Sha256::new();
    for name in [TRAIN_FILE, TEST_FILE, SCALER_FILE, STATS_FILE] {
        let bytes = fs::read(dir.join(name))
            .map_err(|e| Error::data(format!("cannot read {}: {e}", dir.join(name).display())))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| Error::data(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub(crate) fn from_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::maneuver::EOS;

    fn sample_windows() -> Vec<Window> {
        (0..4)
            .map(|i| Window {
                id: 10 + i,
                input: Array::new(&[3, 2], (0..6).map(|v| v as f32 * 0.1 + i as f32).collect()).unwrap(),
                targets: vec![1, 2, EOS],
                majority_label: Maneuver::ALL[i as usize],
                max_speed: 7.25 + i as f64,
                trace_id: 2,
                start: 5 * i as usize,
                anomaly_fraction: 0.25,
            })
            .collect()
    }

    #[test]
    fn binary_round_trip() {
        let ws = sample_windows();
        let bytes = encode_windows(&ws).unwrap();
        assert_eq!(decode_windows(&bytes).unwrap(), ws);
        assert!(decode_windows(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_windows(b"garbage!").is_err());
        assert!(decode_windows(&encode_windows(&[]).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn store_round_trip_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let store = PreparedStore {
            train: sample_windows(),
            test: sample_windows()[..1].to_vec(),
            scaler: ScalerParams {
                min: vec![0.0, 1.0],
                max: vec![2.0, 3.0],
            },
            stats: LabelStats::from_counts(vec![3, 1]),
            counts: Counts::default(),
        };
        store.save(dir.path()).unwrap();
        assert_eq!(PreparedStore::load(dir.path()).unwrap(), store);
        let h1 = store_hash(dir.path()).unwrap();
        store.save(dir.path()).unwrap();
        assert_eq!(store_hash(dir.path()).unwrap(), h1);
        assert_eq!(h1.len(), 64);
    }
}
