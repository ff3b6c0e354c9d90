//! Synthetic labeled driving traces.
//!
//! A trace is a sequence of maneuver segments. Each maneuver shapes the yaw
//! rate and speed; steering follows from a kinematic bicycle model, steer
//! speed is its time derivative and the pedals follow longitudinal
//! acceleration. Anomalies (brake slams, steering oscillation, pedal
//! spikes) are overlaid afterwards and recorded in the anomaly mask.
//!
//! Maneuver probabilities are shares of driving *time*: the next segment is
//! drawn with weight `p / mean_duration` so that long maneuvers are not
//! over-represented.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::maneuver::{Maneuver, HDD_LABEL_PERCENT, NUM_MANEUVERS};
use crate::data::trace::{Sample, Trace, NUM_CHANNELS};
use crate::error::{Error, Result};
use crate::numeric::SeededRng;

const STEERING_RATIO: f64 = 16.0;
const WHEELBASE_M: f64 = 2.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub num_traces: u32,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Multiplier on per-channel sensor noise.
    pub noise: f64,
    /// Expected injected anomaly events per minute of driving.
    pub anomaly_rate: f64,
    /// Cruise speed range, m/s.
    pub cruise_speed: [f64; 2],
    /// Time share of each maneuver, keyed by label name (`p.left_turn`).
    /// Normalised to sum to one; missing labels get zero.
    pub p: BTreeMap<String, f64>,
    /// Segment duration range in seconds, keyed by label name.
    pub durations: BTreeMap<String, [f64; 2]>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_traces: 1,
            duration_s: 600.0,
            sample_rate_hz: 100.0,
            noise: 1.0,
            anomaly_rate: 0.5,
            cruise_speed: [10.0, 16.0],
            p: Maneuver::ALL
                .iter()
                .map(|m| (m.name().to_string(), HDD_LABEL_PERCENT[m.index()] / 100.0))
                .collect(),
            durations: Maneuver::ALL
                .iter()
                .map(|&m| (m.name().to_string(), default_duration(m)))
                .collect(),
        }
    }
}

fn default_duration(m: Maneuver) -> [f64; 2] {
    use Maneuver::*;
    match m {
        Background => [6.0, 20.0],
        IntersectionPassing => [3.0, 6.0],
        LeftTurn | RightTurn => [4.0, 7.0],
        LeftLaneChange | RightLaneChange => [3.0, 6.0],
        CrosswalkPassing => [3.0, 5.0],
        UTurn => [8.0, 12.0],
        LeftLaneBranch | RightLaneBranch => [3.0, 5.0],
        Merge => [4.0, 6.0],
    }
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::config(format!("generator config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("generator config serializes")
    }

    /// Normalised time share per maneuver.
    pub fn probabilities(&self) -> Result<[f64; NUM_MANEUVERS]> {
        let mut p = [0.0; NUM_MANEUVERS];
        for (name, &v) in &self.p {
            let m: Maneuver = name
                .parse()
                .map_err(|_| Error::config(format!("unknown maneuver in p: {name:?}")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("invalid probability p.{name} = {v}")));
            }
            p[m.index()] = v;
        }
        let total: f64 = p.iter().sum();
        if !(total > 0.0) {
            return Err(Error::config("maneuver probabilities sum to zero"));
        }
        p.iter_mut().for_each(|v| *v /= total);
        Ok(p)
    }

    pub fn duration_range(&self, m: Maneuver) -> [f64; 2] {
        self.durations
            .get(m.name())
            .copied()
            .unwrap_or_else(|| default_duration(m))
    }

    pub fn validate(&self) -> Result<()> {
        self.probabilities()?;
        for name in self.durations.keys() {
            name.parse::<Maneuver>()
                .map_err(|_| Error::config(format!("unknown maneuver in durations: {name:?}")))?;
        }
        for m in Maneuver::ALL {
            let [lo, hi] = self.duration_range(m);
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config(format!("invalid duration range for {m}: [{lo}, {hi}]")));
            }
        }
        let [vlo, vhi] = self.cruise_speed;
        if !(vlo > 0.0 && vhi >= vlo && vhi.is_finite()) {
            return Err(Error::config("invalid cruise_speed range"));
        }
        if !(self.sample_rate_hz > 0.0 && self.duration_s > 0.0) {
            return Err(Error::config("sample_rate_hz and duration_s must be positive"));
        }
        if !(self.noise >= 0.0 && self.anomaly_rate >= 0.0) {
            return Err(Error::config("noise and anomaly_rate must be non-negative"));
        }
        Ok(())
    }
}

/// Where one maneuver segment landed in the generated trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpan {
    pub maneuver: Maneuver,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    BrakeSlam,
    SteerOscillation,
    PedalSpike,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalySpan {
    pub kind: AnomalyKind,
    pub start: usize,
    pub len: usize,
}

/// Everything the generator produced for one trace.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub trace: Trace,
    pub segments: Vec<SegmentSpan>,
    pub anomalies: Vec<AnomalySpan>,
}

/// Generates one trace of `cfg.duration_s` seconds.
pub fn synth_trace(cfg: &GeneratorConfig, rng: &mut SeededRng) -> Result<Trace> {
    Ok(synth_detailed(cfg, 0, rng)?.trace)
}

/// Generates `cfg.num_traces` traces from `cfg.seed`, each from its own
/// forked stream.
pub fn synth_traces(cfg: &GeneratorConfig) -> Result<Vec<Trace>> {
    let root = SeededRng::new(cfg.seed);
    (0..cfg.num_traces)
        .map(|i| Ok(synth_detailed(cfg, i, &mut root.fork(u64::from(i)))?.trace))
        .collect()
}

pub fn synth_detailed(cfg: &GeneratorConfig, id: u32, rng: &mut SeededRng) -> Result<SynthOutput> {
    cfg.validate()?;
    let probs = cfg.probabilities()?;
    let rate = cfg.sample_rate_hz;
    let dt = 1.0 / rate;
    let n = (cfg.duration_s * rate).round() as usize;
    let weights: Vec<f64> = Maneuver::ALL
        .iter()
        .map(|&m| {
            let [lo, hi] = cfg.duration_range(m);
            probs[m.index()] / (0.5 * (lo + hi))
        })
        .collect();
    let [vlo, vhi] = cfg.cruise_speed;

    let mut yaw = Vec::with_capacity(n);
    let mut speed = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut segments = Vec::new();
    let mut cruise = rng.uniform(vlo, vhi);
    while labels.len() < n {
        let m = Maneuver::ALL[rng.weighted_index(&weights)];
        let [dlo, dhi] = cfg.duration_range(m);
        let len = ((rng.uniform(dlo, dhi) * rate).round() as usize).clamp(1, n - labels.len());
        let dur = len as f64 * dt;
        segments.push(SegmentSpan {
            maneuver: m,
            start: labels.len(),
            len,
        });
        let shape = SegmentShape::draw(m, cruise, dur, cfg, rng);
        for k in 0..len {
            let t = k as f64 * dt;
            let (r, v) = shape.at(t, dur, cruise);
            yaw.push(r);
            speed.push(v);
            labels.push(m);
        }
        cruise = shape.end_cruise(cruise);
    }

    let mut steer_offset = vec![0.0; n];
    let mut pedal_extra = vec![0.0; n];
    let mut mask = vec![false; n];
    let mut anomalies = Vec::new();
    if cfg.anomaly_rate > 0.0 {
        let per_second = cfg.anomaly_rate / 60.0;
        let step = rate.round().max(1.0) as usize;
        let mut i = 0;
        while i < n {
            if rng.bernoulli(per_second) {
                let kind = match rng.below(3) {
                    0 => AnomalyKind::BrakeSlam,
                    1 => AnomalyKind::SteerOscillation,
                    _ => AnomalyKind::PedalSpike,
                };
                let (dlo, dhi) = match kind {
                    AnomalyKind::BrakeSlam => (2.0, 3.0),
                    AnomalyKind::SteerOscillation => (2.0, 4.0),
                    AnomalyKind::PedalSpike => (1.0, 2.0),
                };
                let len = ((rng.uniform(dlo, dhi) * rate).round() as usize).min(n - i);
                let dur = len as f64 * dt;
                for k in 0..len {
                    let t = k as f64 * dt;
                    let j = i + k;
                    mask[j] = true;
                    match kind {
                        AnomalyKind::BrakeSlam => speed[j] *= 1.0 - 0.7 * (PI * t / dur).sin(),
                        AnomalyKind::SteerOscillation => {
                            let wave = (2.0 * PI * 1.5 * t).sin();
                            steer_offset[j] += 60.0 * wave;
                            yaw[j] += 6.0 * wave;
                        }
                        AnomalyKind::PedalSpike => pedal_extra[j] += 35.0 * (PI * t / dur).sin(),
                    }
                }
                anomalies.push(AnomalySpan { kind, start: i, len });
                i += len + step;
            } else {
                i += step;
            }
        }
    }

    let steer: Vec<f64> = (0..n)
        .map(|j| {
            let v = speed[j].max(1.0);
            STEERING_RATIO * (WHEELBASE_M * yaw[j].to_radians() / v).atan().to_degrees() + steer_offset[j]
        })
        .collect();
    let derivative = |x: &[f64], j: usize| -> f64 {
        match (j.checked_sub(1), x.get(j + 1)) {
            (Some(a), Some(&b)) => (b - x[a]) / (2.0 * dt),
            (None, Some(&b)) => (b - x[j]) / dt,
            (Some(a), None) => (x[j] - x[a]) / dt,
            (None, None) => 0.0,
        }
    };

    let noise_std = [0.5, 2.0, 0.05, 0.2, 0.3, 0.005].map(|s| s * cfg.noise);
    let mut samples: Vec<Sample> = Vec::with_capacity(n);
    for j in 0..n {
        let accel = derivative(&speed, j);
        let mut s = [
            steer[j],
            derivative(&steer, j),
            speed[j],
            yaw[j],
            10.0 + 8.0 * accel.max(0.0) + pedal_extra[j],
            (0.3 * (-accel).max(0.0)).min(1.0),
        ];
        for c in 0..NUM_CHANNELS {
            if noise_std[c] > 0.0 {
                s[c] += noise_std[c] * rng.normal();
            }
        }
        s[2] = s[2].max(0.0);
        s[4] = s[4].max(0.0);
        s[5] = s[5].clamp(0.0, 1.0);
        samples.push(s);
    }
    Ok(SynthOutput {
        trace: Trace::new(id, rate, samples, labels, mask)?,
        segments,
        anomalies,
    })
}

/// Yaw-rate and speed template of one segment.
#[derive(Debug, Clone, Copy)]
enum SegmentShape {
    /// Speed eases from the current cruise to a new one; slow yaw wander.
    Cruise { target: f64, wander: f64, period: f64 },
    /// Half-sine yaw lobe turning by `heading` degrees with a speed dip.
    Lobe { heading: f64, v_min: f64 },
    /// Full-sine yaw S: heading out and back, with optional speed gain.
    S { heading: f64, gain: f64 },
    /// Speed dip only.
    Dip { v_min: f64 },
}

impl SegmentShape {
    fn draw(m: Maneuver, cruise: f64, _dur: f64, cfg: &GeneratorConfig, rng: &mut SeededRng) -> Self {
        use Maneuver::*;
        let side = |left: bool| if left { 1.0 } else { -1.0 };
        match m {
            Background => SegmentShape::Cruise {
                target: rng.uniform(cfg.cruise_speed[0], cfg.cruise_speed[1]),
                wander: rng.uniform(-0.8, 0.8),
                period: rng.uniform(6.0, 15.0),
            },
            IntersectionPassing => SegmentShape::Dip {
                v_min: cruise * rng.uniform(0.55, 0.75),
            },
            CrosswalkPassing => SegmentShape::Dip {
                v_min: cruise * rng.uniform(0.35, 0.55),
            },
            LeftTurn | RightTurn => SegmentShape::Lobe {
                heading: side(m == LeftTurn) * 90.0,
                v_min: rng.uniform(5.0, 7.0).min(cruise),
            },
            UTurn => SegmentShape::Lobe {
                heading: 180.0,
                v_min: rng.uniform(4.0, 5.0).min(cruise),
            },
            LeftLaneChange | RightLaneChange => SegmentShape::S {
                heading: side(m == LeftLaneChange) * rng.uniform(4.0, 6.0),
                gain: 0.0,
            },
            LeftLaneBranch | RightLaneBranch => SegmentShape::Lobe {
                heading: side(m == LeftLaneBranch) * rng.uniform(8.0, 12.0),
                v_min: cruise * rng.uniform(0.85, 0.95),
            },
            Merge => SegmentShape::S {
                heading: rng.uniform(3.0, 5.0),
                gain: rng.uniform(2.0, 4.0),
            },
        }
    }

    /// `(yaw rate deg/s, speed m/s)` at time `t` into a segment of `dur` s.
    fn at(&self, t: f64, dur: f64, cruise: f64) -> (f64, f64) {
        let u = t / dur;
        match *self {
            SegmentShape::Cruise { target, wander, period } => {
                let ease = u * u * (3.0 - 2.0 * u);
                (wander * (2.0 * PI * t / period).sin(), cruise + (target - cruise) * ease)
            }
            SegmentShape::Lobe { heading, v_min } => (
                heading * PI / (2.0 * dur) * (PI * u).sin(),
                cruise - (cruise - v_min) * (PI * u).sin(),
            ),
            SegmentShape::S { heading, gain } => {
                let ease = u * u * (3.0 - 2.0 * u);
                (heading * PI / dur * (2.0 * PI * u).sin(), cruise + gain * ease)
            }
            SegmentShape::Dip { v_min } => (0.0, cruise - (cruise - v_min) * (PI * u).sin()),
        }
    }

    fn end_cruise(&self, cruise: f64) -> f64 {
        match *self {
            SegmentShape::Cruise { target, .. } => target,
            SegmentShape::S { gain, .. } => cruise + gain,
            _ => cruise,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(duration_s: f64) -> GeneratorConfig {
        GeneratorConfig {
            duration_s,
            anomaly_rate: 0.0,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn zero_rate_means_no_anomalies() {
        let t = synth_trace(&quiet(300.0), &mut SeededRng::new(1)).unwrap();
        assert_eq!(t.len(), 30_000);
        assert!(t.anomaly_mask.iter().all(|&m| !m));
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = GeneratorConfig {
            duration_s: 120.0,
            anomaly_rate: 3.0,
            ..GeneratorConfig::default()
        };
        let a = synth_trace(&cfg, &mut SeededRng::new(9)).unwrap();
        let b = synth_trace(&cfg, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.anomaly_mask.iter().any(|&m| m));
    }

    fn yaw_integral(trace: &Trace, span: &SegmentSpan) -> f64 {
        let dt = 1.0 / trace.sample_rate_hz;
        trace.samples[span.start..span.start + span.len].iter().map(|s| s[3] * dt).sum()
    }

    #[test]
    fn turn_yaw_integrals() {
        let mut cfg = quiet(1200.0);
        cfg.p.insert("left_turn".into(), 0.3);
        cfg.p.insert("u_turn".into(), 0.2);
        let out = synth_detailed(&cfg, 0, &mut SeededRng::new(5)).unwrap();
        let full = |s: &&SegmentSpan| s.start + s.len < out.trace.len();
        let lefts: Vec<_> = out.segments.iter().filter(full).filter(|s| s.maneuver == Maneuver::LeftTurn).collect();
        let uturns: Vec<_> = out.segments.iter().filter(full).filter(|s| s.maneuver == Maneuver::UTurn).collect();
        assert!(lefts.len() > 5 && uturns.len() > 3);
        for s in lefts {
            let deg = yaw_integral(&out.trace, s);
            assert!((deg - 90.0).abs() < 15.0, "left turn integral {deg}");
        }
        for s in uturns {
            let deg = yaw_integral(&out.trace, s);
            assert!((deg - 180.0).abs() < 15.0, "u-turn integral {deg}");
        }
    }

    #[test]
    fn label_shares_follow_probabilities() {
        let mut cfg = quiet(20_000.0);
        cfg.sample_rate_hz = 100.0;
        let t = synth_trace(&cfg, &mut SeededRng::new(2024)).unwrap();
        assert!(t.len() >= 100_000);
        let p = cfg.probabilities().unwrap();
        let mut counts = [0usize; NUM_MANEUVERS];
        t.labels.iter().for_each(|l| counts[l.index()] += 1);
        for m in Maneuver::ALL {
            let share = counts[m.index()] as f64 / t.len() as f64;
            assert!((share - p[m.index()]).abs() < 0.02, "{m}: {share} vs {}", p[m.index()]);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GeneratorConfig::from_toml("p.left_turn = -0.1").is_err());
        assert!(GeneratorConfig::from_toml("p.wheelie = 0.1").is_err());
        assert!(GeneratorConfig::from_toml("colour = 3").is_err());
        let cfg = GeneratorConfig::from_toml("seed = 7\np.left_turn = 0.5\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.p["left_turn"], 0.5);
        let round = GeneratorConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn ten_minutes_at_hundred_hz() {
        let t = synth_trace(&quiet(600.0), &mut SeededRng::new(3)).unwrap();
        assert_eq!(t.len(), 60_000);
    }
}
