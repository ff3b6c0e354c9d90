//! Downsampling, sliding-window segmentation, speed filtering, splitting,
//! min-max scaling and label statistics.

use serde::{Deserialize, Serialize};

use crate::data::maneuver::{Maneuver, EOS, NUM_MANEUVERS};
use crate::data::trace::{Sample, Trace, NUM_CHANNELS, SPEED_CHANNEL};
use crate::error::{Error, Result};
use crate::numeric::{Array, SeededRng};

pub const MPS_PER_MPH: f64 = 0.44704;
/// 15 mph in m/s.
pub const MIN_SPEED_MPS: f64 = 15.0 * MPS_PER_MPH;

/// Reduces the sample rate by an integer factor. Continuous channels are
/// block-averaged, labels take the block majority (ties go to the label
/// that occurs first in the block) and the anomaly mask is OR-ed. A trailing
/// partial block is dropped.
pub fn downsample(trace: &Trace, target_hz: f64) -> Result<Trace> {
    let ratio = trace.sample_rate_hz / target_hz;
    let factor = ratio.round();
    if !(target_hz > 0.0) || factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::data(format!(
            "cannot downsample {} Hz to {target_hz} Hz: rates are not divisible",
            trace.sample_rate_hz
        )));
    }
    let factor = factor as usize;
    let blocks = trace.len() / factor;
    let mut samples = Vec::with_capacity(blocks);
    let mut labels = Vec::with_capacity(blocks);
    let mut mask = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let span = b * factor..(b + 1) * factor;
        let mut mean = [0.0; NUM_CHANNELS];
        for s in &trace.samples[span.clone()] {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= factor as f64);
        samples.push(mean);
        labels.push(majority(&trace.labels[span.clone()]));
        mask.push(trace.anomaly_mask[span].iter().any(|&a| a));
    }
    Trace::new(trace.id, target_hz, samples, labels, mask)
}

/// Most frequent label; ties resolve to whichever tied label appears first.
pub fn majority(labels: &[Maneuver]) -> Maneuver {
    let mut counts = [0usize; NUM_MANEUVERS];
    let mut first_seen = [usize::MAX; NUM_MANEUVERS];
    for (i, l) in labels.iter().enumerate() {
        counts[l.index()] += 1;
        first_seen[l.index()] = first_seen[l.index()].min(i);
    }
    let best = (0..NUM_MANEUVERS)
        .filter(|&s| counts[s] > 0)
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(first_seen[b].cmp(&first_seen[a])))
        .unwrap_or(0);
    Maneuver::ALL[best]
}

/// Window geometry in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub window_s: f64,
    pub stride_s: f64,
    pub horizon_s: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            window_s: 5.0,
            stride_s: 0.5,
            horizon_s: 3.0,
        }
    }
}

impl SegmentConfig {
    /// `(window, horizon)` in whole samples and the stride in (possibly
    /// fractional) samples.
    pub fn steps(&self, rate_hz: f64) -> Result<(usize, usize, f64)> {
        let whole = |s: f64, what: &str| -> Result<usize> {
            let n = s * rate_hz;
            let r = n.round();
            if r < 1.0 || (n - r).abs() > 1e-9 * n.max(1.0) {
                return Err(Error::data(format!(
                    "{what} of {s} s is not a whole number of samples at {rate_hz} Hz"
                )));
            }
            Ok(r as usize)
        };
        let stride = self.stride_s * rate_hz;
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(Error::data("stride must be positive"));
        }
        Ok((whole(self.window_s, "window")?, whole(self.horizon_s, "horizon")?, stride))
    }

    /// Closed-form number of windows in a trace of `n` samples.
    pub fn window_count(&self, n: usize, rate_hz: f64) -> Result<usize> {
        let (w, h, stride) = self.steps(rate_hz)?;
        if n < w + h {
            return Ok(0);
        }
        Ok(((n - w - h) as f64 / stride + 1e-9).floor() as usize + 1)
    }
}

/// One segmented unit: an input block and the maneuvers that follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub id: u64,
    /// `window_steps × 6`, raw units until a scaler is applied.
    pub input: Array<f32>,
    /// The next `horizon_steps` maneuver symbols followed by EOS.
    pub targets: Vec<usize>,
    pub majority_label: Maneuver,
    /// Peak speed over the input span, m/s.
    pub max_speed: f64,
    pub trace_id: u32,
    pub start: usize,
    /// Fraction of input samples flagged anomalous.
    pub anomaly_fraction: f64,
}

/// Cuts a trace into overlapping windows. Start offsets are
/// `floor(k·stride)` so fractional strides keep their average spacing.
/// Ids are assigned consecutively from `first_id`.
pub fn segment(trace: &Trace, cfg: &SegmentConfig, first_id: u64) -> Result<Vec<Window>> {
    let (w, h, stride) = cfg.steps(trace.sample_rate_hz)?;
    let count = cfg.window_count(trace.len(), trace.sample_rate_hz)?;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let start = (k as f64 * stride + 1e-9).floor() as usize;
        let span = start..start + w;
        let input: Vec<f32> = trace.samples[span.clone()]
            .iter()
            .flat_map(|s: &Sample| s.iter().map(|&v| v as f32))
            .collect();
        let mut targets: Vec<usize> = trace.labels[start + w..start + w + h]
            .iter()
            .map(|l| l.index())
            .collect();
        targets.push(EOS);
        let flagged = trace.anomaly_mask[span.clone()].iter().filter(|&&a| a).count();
        out.push(Window {
            id: first_id + k as u64,
            input: Array::new(&[w, NUM_CHANNELS], input)?,
            targets,
            majority_label: majority(&trace.labels[span.clone()]),
            max_speed: trace.samples[span]
                .iter()
                .map(|s| s[SPEED_CHANNEL])
                .fold(f64::NEG_INFINITY, f64::max),
            trace_id: trace.id,
            start,
            anomaly_fraction: flagged as f64 / w as f64,
        });
    }
    Ok(out)
}

/// Keeps windows whose peak speed is at least `min_mph`, in order.
pub fn speed_filter(windows: Vec<Window>, min_mph: f64) -> Vec<Window> {
    let threshold = min_mph * MPS_PER_MPH;
    windows.into_iter().filter(|w| w.max_speed >= threshold).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Ordered by window id; the earliest windows train.
    #[default]
    Chronological,
    Shuffled { seed: u64 },
}

/// Number of training windows out of `n`.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    ((n as f64 * train_fraction + 1e-9).floor() as usize).min(n)
}

pub fn split(
    mut windows: Vec<Window>,
    train_fraction: f64,
    mode: SplitMode,
) -> Result<(Vec<Window>, Vec<Window>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::data(format!("train fraction {train_fraction} outside [0, 1]")));
    }
    let n_train = train_count(windows.len(), train_fraction);
    match mode {
        SplitMode::Chronological => windows.sort_by_key(|w| w.id),
        SplitMode::Shuffled { seed } => SeededRng::new(seed).shuffle(&mut windows),
    }
    let test = windows.split_off(n_train);
    Ok((windows, test))
}

/// Drops windows whose majority label is `label`.
pub fn exclude_label(windows: Vec<Window>, label: Maneuver) -> Vec<Window> {
    windows.into_iter().filter(|w| w.majority_label != label).collect()
}

/// Per-channel min/max of the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(train: &[Window]) -> Result<Self> {
        let first = train.first().ok_or(Error::Empty("scaler training set"))?;
        let channels = first.input.cols();
        let mut min = vec![f64::INFINITY; channels];
        let mut max = vec![f64::NEG_INFINITY; channels];
        for w in train {
            if w.input.cols() != channels {
                return Err(Error::ShapeMismatch {
                    op: "fit_scaler",
                    expected: vec![channels],
                    found: vec![w.input.cols()],
                });
            }
            for row in w.input.data().chunks_exact(channels) {
                for c in 0..channels {
                    let v = f64::from(row[c]);
                    min[c] = min[c].min(v);
                    max[c] = max[c].max(v);
                }
            }
        }
        Ok(Self { min, max })
    }

    fn map(&self, c: usize, v: f64) -> f64 {
        let range = self.max[c] - self.min[c];
        if range > 0.0 {
            (v - self.min[c]) / range
        } else {
            0.0
        }
    }

    /// `(x − min)/(max − min)` per channel, unclamped; constant channels map to 0.
    pub fn apply(&self, input: &Array<f32>) -> Result<Array<f32>> {
        let channels = self.min.len();
        if input.cols() != channels {
            return Err(Error::ShapeMismatch {
                op: "apply_scaler",
                expected: vec![input.rows(), channels],
                found: input.shape().to_vec(),
            });
        }
        let data = input
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| self.map(i % channels, f64::from(v)) as f32)
            .collect();
        Array::new(input.shape(), data)
    }

    pub fn apply_window(&self, w: &Window) -> Result<Window> {
        Ok(Window {
            input: self.apply(&w.input)?,
            ..w.clone()
        })
    }

    pub fn apply_all(&self, windows: &mut [Window]) -> Result<()> {
        for w in windows {
            w.input = self.apply(&w.input)?;
        }
        Ok(())
    }

    /// Maps scaled values back to raw units. Constant channels return `min`.
    pub fn inverse(&self, scaled: &Array<f32>) -> Result<Array<f32>> {
        let channels = self.min.len();
        if scaled.cols() != channels {
            return Err(Error::ShapeMismatch {
                op: "inverse_scaler",
                expected: vec![scaled.rows(), channels],
                found: scaled.shape().to_vec(),
            });
        }
        let data = scaled
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = i % channels;
                (self.min[c] + f64::from(v) * (self.max[c] - self.min[c])) as f32
            })
            .collect();
        Array::new(scaled.shape(), data)
    }
}

/// Majority-label counts over the training windows with add-one smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
}

impl LabelStats {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let denom = (total + counts.len() as u64) as f64;
        let frequencies = counts.iter().map(|&c| (c + 1) as f64 / denom).collect();
        Self {
            counts,
            frequencies,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Smoothed frequency of a maneuver symbol.
    pub fn frequency(&self, symbol: usize) -> Result<f64> {
        self.frequencies
            .get(symbol)
            .copied()
            .ok_or(Error::SymbolOutOfVocab {
                symbol,
                vocab: self.frequencies.len(),
            })
    }

    /// Frequencies padded to the decoder vocabulary. SOS and EOS get 1,
    /// which yields unit class weight for EOS.
    pub fn vocab_frequencies(&self, vocab: usize) -> Vec<f64> {
        let mut f = self.frequencies.clone();
        f.resize(vocab, 1.0);
        f
    }
}

pub fn label_stats(train: &[Window]) -> LabelStats {
    let mut counts = vec![0u64; NUM_MANEUVERS];
    for w in train {
        counts[w.majority_label.index()] += 1;
    }
    LabelStats::from_counts(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(n: usize, rate: f64) -> Trace {
        let samples = (0..n)
            .map(|i| {
                let x = i as f64;
                [x, 2.0, 5.0 + (x / 10.0).sin() * 3.0, -x, 10.0, 0.0]
            })
            .collect();
        let labels = (0..n).map(|i| Maneuver::ALL[(i / 7) % NUM_MANEUVERS]).collect();
        let mask = (0..n).map(|i| i % 13 == 0).collect();
        Trace::new(3, rate, samples, labels, mask).unwrap()
    }

    #[test]
    fn downsample_by_twenty() {
        let t = trace(2000, 100.0);
        let d = downsample(&t, 5.0).unwrap();
        assert_eq!(d.len(), 100);
        assert_eq!(d.sample_rate_hz, 5.0);
        for (b, s) in d.samples.iter().enumerate() {
            assert_eq!(s[1], 2.0);
            let oracle: f64 = (b * 20..(b + 1) * 20).map(|i| t.samples[i][2]).sum::<f64>() / 20.0;
            assert!((s[2] - oracle).abs() < 1e-6);
        }
        assert!(downsample(&t, 7.0).is_err());
    }

    #[test]
    fn majority_ties_go_to_earliest() {
        use Maneuver::*;
        assert_eq!(majority(&[LeftTurn, Merge, Merge, LeftTurn]), LeftTurn);
        assert_eq!(majority(&[Merge, LeftTurn, LeftTurn]), LeftTurn);
        assert_eq!(majority(&[UTurn]), UTurn);
    }

    #[test]
    fn sixty_five_samples_give_eleven_windows() {
        let t = trace(65, 5.0);
        let ws = segment(&t, &SegmentConfig::default(), 0).unwrap();
        assert_eq!(ws.len(), 11);
        assert_eq!(ws[0].input.shape(), &[25, 6]);
        assert_eq!(ws[0].targets.len(), 16);
        assert_eq!(*ws[0].targets.last().unwrap(), EOS);
        let expected: Vec<usize> = t.labels[25..40].iter().map(|l| l.index()).collect();
        assert_eq!(&ws[0].targets[..15], &expected[..]);
        let starts: Vec<usize> = ws.iter().map(|w| w.start).collect();
        assert_eq!(starts, [0, 2, 5, 7, 10, 12, 15, 17, 20, 22, 25]);
        assert!(segment(&trace(39, 5.0), &SegmentConfig::default(), 0).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn segment_count_matches_formula(n in 0usize..600) {
            let t = trace(n, 5.0);
            let ws = segment(&t, &SegmentConfig::default(), 0).unwrap();
            let expected = if n < 40 { 0 } else { ((n - 40) as f64 / 2.5).floor() as usize + 1 };
            prop_assert_eq!(ws.len(), expected);
            if let Some(last) = ws.last() {
                prop_assert!(last.start + 40 <= n);
            }
        }
    }

    #[test]
    fn speed_threshold_is_inclusive() {
        let t = trace(65, 5.0);
        let mut ws = segment(&t, &SegmentConfig::default(), 0).unwrap();
        ws[0].max_speed = MIN_SPEED_MPS;
        ws[1].max_speed = MIN_SPEED_MPS - 1e-9;
        let kept = speed_filter(ws.clone(), 15.0);
        assert!(kept.iter().any(|w| w.id == 0));
        assert!(!kept.iter().any(|w| w.id == 1));
        let brute: Vec<u64> = ws.iter().filter(|w| w.max_speed >= 6.7056).map(|w| w.id).collect();
        assert_eq!(kept.iter().map(|w| w.id).collect::<Vec<_>>(), brute);
    }

    #[test]
    fn split_sizes() {
        assert_eq!(train_count(10, 0.7), 7);
        assert_eq!(train_count(762_671, 0.7), 533_869);
        let ws = segment(&trace(65, 5.0), &SegmentConfig::default(), 100).unwrap();
        let (train, test) = split(ws.clone(), 0.7, SplitMode::Chronological).unwrap();
        assert_eq!((train.len(), test.len()), (7, 4));
        let max_train = train.iter().map(|w| w.id).max().unwrap();
        assert!(test.iter().all(|w| w.id > max_train));
        let (a, b) = split(ws, 0.7, SplitMode::Shuffled { seed: 1 }).unwrap();
        let mut ids: Vec<u64> = a.iter().chain(&b).map(|w| w.id).collect();
        ids.sort();
        assert_eq!(ids, (100..111).collect::<Vec<_>>());
    }

    fn window_with(values: &[[f32; 2]]) -> Window {
        let data = values.iter().flatten().copied().collect();
        Window {
            id: 0,
            input: Array::new(&[values.len(), 2], data).unwrap(),
            targets: vec![EOS],
            majority_label: Maneuver::Background,
            max_speed: 0.0,
            trace_id: 0,
            start: 0,
            anomaly_fraction: 0.0,
        }
    }

    #[test]
    fn scaler_rules() {
        let train = [window_with(&[[0.0, 3.0], [10.0, 3.0]])];
        let s = ScalerParams::fit(&train).unwrap();
        let out = s.apply(&window_with(&[[5.0, 3.0], [12.0, 7.0]]).input).unwrap();
        assert_eq!(out.data(), &[0.5, 0.0, 1.2, 0.0]);
        assert!(ScalerParams::fit(&[]).is_err());
    }

    proptest! {
        #[test]
        fn scaler_maps_train_into_unit_interval(vals in prop::collection::vec(-1e3f32..1e3, 4..40)) {
            let rows: Vec<[f32; 2]> = vals.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
            let w = window_with(&rows);
            let s = ScalerParams::fit(std::slice::from_ref(&w)).unwrap();
            let scaled = s.apply(&w.input).unwrap();
            prop_assert!(scaled.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let back = s.inverse(&scaled).unwrap();
            for (i, (&a, &b)) in back.data().iter().zip(w.input.data()).enumerate() {
                let range = s.max[i % 2] - s.min[i % 2];
                if range > 0.0 {
                    prop_assert!((f64::from(a) - f64::from(b)).abs() <= 1e-6 * range.max(1.0) + 1e-6 * f64::from(b).abs());
                }
            }
        }
    }

    #[test]
    fn laplace_smoothing() {
        let mut w = window_with(&[[0.0, 0.0]]);
        let ws: Vec<Window> = (0..50).map(|i| { w.id = i; w.clone() }).collect();
        let stats = label_stats(&ws);
        assert!((stats.frequencies[0] - 51.0 / 61.0).abs() < 1e-15);
        assert!((stats.frequencies[7] - 1.0 / 61.0).abs() < 1e-15);
        assert!((stats.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn table_shares_reproduced() {
        use crate::data::maneuver::HDD_LABEL_PERCENT;
        let counts: Vec<u64> = HDD_LABEL_PERCENT.iter().map(|p| (p * 1e4) as u64).collect();
        let stats = LabelStats::from_counts(counts);
        for (f, p) in stats.frequencies.iter().zip(HDD_LABEL_PERCENT) {
            assert!((f * 100.0 - p).abs() < 0.01);
        }
    }
}
