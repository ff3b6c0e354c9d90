//! Labeled multi-channel traces and their CSV form.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::maneuver::Maneuver;
use crate::error::{Error, Result};

pub const NUM_CHANNELS: usize = 6;

/// Channel names in storage order. This is also the order of the combined
/// error vector used for scoring.
pub const CHANNEL_NAMES: [&str; NUM_CHANNELS] = [
    "steer_angle",
    "steer_speed",
    "speed",
    "yaw",
    "pedal_angle",
    "pedal_pressure",
];

/// Column index of vehicle speed (m/s).
pub const SPEED_CHANNEL: usize = 2;

/// One sample of all six channels.
pub type Sample = [f64; NUM_CHANNELS];

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub id: u32,
    pub sample_rate_hz: f64,
    pub samples: Vec<Sample>,
    pub labels: Vec<Maneuver>,
    /// Ground-truth injected anomalies; all false for recorded data.
    pub anomaly_mask: Vec<bool>,
}

impl Trace {
    pub fn new(
        id: u32,
        sample_rate_hz: f64,
        samples: Vec<Sample>,
        labels: Vec<Maneuver>,
        anomaly_mask: Vec<bool>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::data(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if labels.len() != samples.len() || anomaly_mask.len() != samples.len() {
            return Err(Error::data(format!(
                "trace series lengths differ: {} samples, {} labels, {} mask entries",
                samples.len(),
                labels.len(),
                anomaly_mask.len()
            )));
        }
        Ok(Self {
            id,
            sample_rate_hz,
            samples,
            labels,
            anomaly_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }

    pub fn channel(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(move |s| s[c])
    }
}

const LABEL_COLUMN: &str = "label";
const ANOMALY_COLUMN: &str = "anomaly";

/// Reads a trace CSV. The sample rate is inferred from the time column;
/// a single-row file is taken to be sampled at 1 Hz.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, 0)
}

pub fn read_csv<Rd: Read>(reader: Rd, id: u32) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(format!("unreadable header: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let time_col = find("t").ok_or_else(|| Error::data("missing column \"t\""))?;
    let mut channel_cols = [0usize; NUM_CHANNELS];
    for (slot, name) in channel_cols.iter_mut().zip(CHANNEL_NAMES) {
        *slot = find(name).ok_or_else(|| Error::data(format!("missing column {name:?}")))?;
    }
    let label_col =
        find(LABEL_COLUMN).ok_or_else(|| Error::data(format!("missing column {LABEL_COLUMN:?}")))?;
    let anomaly_col = find(ANOMALY_COLUMN);

    let mut times = Vec::new();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut mask = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // Row numbers are 1-based and count the header as row 1.
        let row = i + 2;
        let record = record.map_err(|e| Error::data(format!("row {row}: {e}")))?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let number = |col: usize| -> Result<f64> {
            let raw = field(col);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::data(format!("row {row}: cannot parse {:?} in column {:?}", raw, &headers[col]))
                })
        };
        let t = number(time_col)?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::data(format!("row {row}: time {t} does not follow {prev}")));
            }
        }
        times.push(t);
        let mut sample = [0.0; NUM_CHANNELS];
        for (v, &col) in sample.iter_mut().zip(&channel_cols) {
            *v = number(col)?;
        }
        samples.push(sample);
        let label = field(label_col);
        labels.push(
            label
                .parse::<Maneuver>()
                .map_err(|_| Error::data(format!("row {row}: unknown label {label:?}")))?,
        );
        mask.push(match anomaly_col.map(field) {
            None | Some("0") | Some("false") => false,
            Some("1") | Some("true") => true,
            Some(other) => {
                return Err(Error::data(format!("row {row}: bad anomaly flag {other:?}")));
            }
        });
    }
    if samples.is_empty() {
        return Err(Error::data("trace CSV has no rows"));
    }
    let rate = infer_rate(&times);
    Trace::new(id, rate, samples, labels, mask)
}

fn infer_rate(times: &[f64]) -> f64 {
    if times.len() < 2 {
        return 1.0;
    }
    let span = times[times.len() - 1] - times[0];
    let rate = (times.len() - 1) as f64 / span;
    let rounded = rate.round();
    if rounded > 0.0 && ((rate - rounded) / rounded).abs() < 1e-6 {
        rounded
    } else {
        rate
    }
}

pub fn export_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(File::create(path.as_ref())?);
    write_csv(trace, &mut file)?;
    file.flush()?;
    Ok(())
}

/// Writes the CSV form. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t"];
    header.extend(CHANNEL_NAMES);
    header.extend([LABEL_COLUMN, ANOMALY_COLUMN]);
    w.write_record(&header).map_err(csv_io)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for (i, sample) in trace.samples.iter().enumerate() {
        row.clear();
        row.push((i as f64 / trace.sample_rate_hz).to_string());
        row.extend(sample.iter().map(f64::to_string));
        row.push(trace.labels[i].name().to_string());
        row.push(if trace.anomaly_mask[i] { "1" } else { "0" }.to_string());
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_ROWS: &str = "\
t,steer_angle,steer_speed,speed,yaw,pedal_angle,pedal_pressure,label
0.0,1.5,0,10,0,12,0,background
0.2,2.5,5,10.5,1,12,0,left_turn
0.4,3.5,5,11,2,13,0.1,left_turn
";

    #[test]
    fn parses_well_formed_file() {
        let t = read_csv(THREE_ROWS.as_bytes(), 7).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.id, 7);
        assert_eq!(t.sample_rate_hz, 5.0);
        assert_eq!(t.labels[1], Maneuver::LeftTurn);
        assert_eq!(t.samples[2][SPEED_CHANNEL], 11.0);
        assert!(t.anomaly_mask.iter().all(|&m| !m));
    }

    #[test]
    fn unknown_label_names_row_and_value() {
        let bad = THREE_ROWS.replace("0.2,2.5,5,10.5,1,12,0,left_turn", "0.2,2.5,5,10.5,1,12,0,Wheelie");
        let msg = read_csv(bad.as_bytes(), 0).unwrap_err().to_string();
        assert!(msg.contains("row 3") && msg.contains("Wheelie"), "{msg}");
    }

    #[test]
    fn rejects_structural_problems() {
        let missing = THREE_ROWS.replace("pedal_pressure", "brake");
        assert!(read_csv(missing.as_bytes(), 0).unwrap_err().to_string().contains("pedal_pressure"));
        let unordered = THREE_ROWS.replace("0.4,", "0.1,");
        assert!(read_csv(unordered.as_bytes(), 0).unwrap_err().to_string().contains("row 4"));
        let nan = THREE_ROWS.replace("10.5", "fast");
        assert!(read_csv(nan.as_bytes(), 0).is_err());
    }

    #[test]
    fn export_ingest_round_trip() {
        let samples: Vec<Sample> = (0..50)
            .map(|i| {
                let x = i as f64;
                [x.sin() * 123.456, 1.0 / (x + 3.0), 9.87654321 + x, -x / 7.0, 0.1 * x, (x / 50.0).powi(3)]
            })
            .collect();
        let labels = (0..50).map(|i| Maneuver::ALL[i % 11]).collect();
        let mask = (0..50).map(|i| i % 7 == 0).collect();
        let trace = Trace::new(0, 100.0, samples, labels, mask).unwrap();
        let mut buf = Vec::new();
        write_csv(&trace, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), 0).unwrap();
        assert_eq!(back, trace);
    }
}
