//! Sequence likelihood, scaled scores, percentile selection and detection
//! reports.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::data::maneuver::{Maneuver, EOS, NUM_MANEUVERS, SOS};
use crate::data::pipeline::LabelStats;
use crate::data::trace::csv_io;
use crate::error::{Error, Result};

/// Lower clamp on the NLL denominator of the scaled score.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Percentiles reported in detection tables.
pub const REPORT_PERCENTILES: [f64; 5] = [0.001, 0.01, 0.1, 0.5, 1.0];

/// `−Σ ln f_s` over predicted maneuvers, skipping EOS.
pub fn sequence_nll(symbols: &[usize], stats: &LabelStats) -> Result<f64> {
    if symbols.is_empty() {
        return Err(Error::Empty("symbol sequence"));
    }
    let mut nll = 0.0;
    for &s in symbols {
        match s {
            EOS => continue,
            SOS => return Err(Error::data("SOS in a predicted sequence")),
            s if s >= NUM_MANEUVERS => {
                return Err(Error::SymbolOutOfVocab {
                    symbol: s,
                    vocab: NUM_MANEUVERS,
                })
            }
            s => nll -= stats.frequency(s)?.ln(),
        }
    }
    Ok(nll)
}

/// `raw / max(nll, delta)`.
pub fn scaled_score(raw: f64, nll: f64, delta: f64) -> f64 {
    raw / nll.max(delta)
}

/// Number of windows in the top `percentile` percent of `n`.
pub fn top_count(n: usize, percentile: f64) -> usize {
    ((n as f64 * percentile / 100.0 - 1e-9).ceil().max(0.0) as usize).min(n)
}

fn ranked(scores: &[(u64, f64)]) -> Result<Vec<(u64, f64)>> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if scores.iter().any(|(_, s)| s.is_nan()) {
        return Err(Error::NonFinite("rank_and_select"));
    }
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(v)
}

fn check_percentile(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::config(format!("percentile {p} outside (0, 100]")));
    }
    Ok(())
}

/// Ids of the top `percentile` percent of `(id, score)` pairs, highest
/// first; equal scores are ordered by ascending id.
pub fn rank_and_select(scores: &[(u64, f64)], percentile: f64) -> Result<Vec<u64>> {
    check_percentile(percentile)?;
    let v = ranked(scores)?;
    let k = top_count(v.len(), percentile);
    Ok(v[..k].iter().map(|(id, _)| *id).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionRow {
    pub percentile: f64,
    pub selected: usize,
    pub captured: usize,
    pub targets: usize,
}

impl DetectionRow {
    pub fn recall(&self) -> f64 {
        if self.targets == 0 {
            0.0
        } else {
            self.captured as f64 / self.targets as f64
        }
    }

    /// Fraction of the selected windows that are targets.
    pub fn share_of_selected(&self) -> f64 {
        if self.selected == 0 {
            0.0
        } else {
            self.captured as f64 / self.selected as f64
        }
    }
}

impl fmt::Display for DetectionRow {
    /// `"7.97% (61/765)"`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}% ({}/{})", 100.0 * self.recall(), self.captured, self.targets)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub rows: Vec<DetectionRow>,
}

impl DetectionReport {
    pub fn row(&self, percentile: f64) -> Option<&DetectionRow> {
        self.rows.iter().find(|r| r.percentile == percentile)
    }
}

/// How many `targets` fall inside the top-p selection for each percentile.
pub fn detection_report(
    scores: &[(u64, f64)],
    targets: &HashSet<u64>,
    percentiles: &[f64],
) -> Result<DetectionReport> {
    let v = ranked(scores)?;
    let total = v.iter().filter(|(id, _)| targets.contains(id)).count();
    let mut prefix = Vec::with_capacity(v.len() + 1);
    prefix.push(0usize);
    for (id, _) in &v {
        prefix.push(prefix.last().unwrap() + usize::from(targets.contains(id)));
    }
    let rows = percentiles
        .iter()
        .map(|&p| {
            check_percentile(p)?;
            let k = top_count(v.len(), p);
            Ok(DetectionRow {
                percentile: p,
                selected: k,
                captured: prefix[k],
                targets: total,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DetectionReport { rows })
}

/// One scored test window under one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWindow {
    pub window_id: u64,
    pub modality: String,
    pub raw_score: f64,
    /// Empty for variants without a symbol head.
    pub predicted_symbols: Vec<usize>,
    pub nll: Option<f64>,
    pub scaled_score: Option<f64>,
    pub majority_label: Maneuver,
    pub anomaly_fraction: f64,
}

pub const SCORE_HEADER: [&str; 7] = [
    "window_id",
    "modality",
    "raw_score",
    "nll",
    "scaled_score",
    "majority_label",
    "anomaly_fraction",
];

pub fn write_scores<W: Write>(out: W, scores: &[ScoredWindow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_HEADER).map_err(csv_io)?;
    for s in scores {
        w.write_record([
            s.window_id.to_string(),
            s.modality.clone(),
            s.raw_score.to_string(),
            s.nll.map_or_else(String::new, |v| v.to_string()),
            s.scaled_score.map_or_else(String::new, |v| v.to_string()),
            s.majority_label.name().to_string(),
            s.anomaly_fraction.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scores_file(path: impl AsRef<Path>, scores: &[ScoredWindow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_scores(std::io::BufWriter::new(file), scores)
}

/// Percentile table: one row per percentile, one column per named report.
pub fn write_detection_table<W: Write>(out: W, columns: &[(&str, &DetectionReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["percentile".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header).map_err(csv_io)?;
    let n_rows = columns.first().map_or(0, |(_, r)| r.rows.len());
    for i in 0..n_rows {
        let mut row = vec![columns[0].1.rows[i].percentile.to_string()];
        row.extend(columns.iter().map(|(_, r)| r.rows[i].to_string()));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}
