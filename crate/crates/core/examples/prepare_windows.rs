//! Runs the window pipeline step by step on a synthetic trace: downsample
//! to 5 Hz, cut 5 s windows with 3 s of future maneuvers, drop slow
//! windows, split chronologically, hold out U-turns from training and
//! scale to [0, 1] with training statistics.

use mtad::data::pipeline::{exclude_label, label_stats, speed_filter, split, ScalerParams, SplitMode};
use mtad::data::{downsample, segment, synth_traces, GeneratorConfig, Maneuver, SegmentConfig, EOS};

fn main() -> mtad::Result<()> {
    let gen = GeneratorConfig {
        duration_s: 1200.0,
        ..GeneratorConfig::default()
    };
    let trace = synth_traces(&gen)?.remove(0);
    let coarse = downsample(&trace, 5.0)?;
    println!("downsampled {} samples at {} Hz to {} at {} Hz", trace.len(), trace.sample_rate_hz, coarse.len(), coarse.sample_rate_hz);

    let seg = SegmentConfig::default();
    let windows = segment(&coarse, &seg, 0)?;
    println!("{} windows (closed form {})", windows.len(), seg.window_count(coarse.len(), 5.0)?);
    let w = &windows[0];
    println!("first window: input {:?}, {} target symbols, last is EOS: {}", w.input.shape(), w.targets.len(), w.targets.last() == Some(&EOS));

    let moving = speed_filter(windows, 15.0);
    let (train, test) = split(moving, 0.7, SplitMode::Chronological)?;
    let before = train.len();
    let mut train = exclude_label(train, Maneuver::UTurn);
    let mut test = test;
    println!("train {} ({} u_turn windows held out), test {}", train.len(), before - train.len(), test.len());

    let scaler = ScalerParams::fit(&train)?;
    scaler.apply_all(&mut train)?;
    scaler.apply_all(&mut test)?;
    for (c, name) in mtad::data::CHANNEL_NAMES.iter().enumerate() {
        println!("  {name:<15} [{:>8.3}, {:>8.3}]", scaler.min[c], scaler.max[c]);
    }

    let stats = label_stats(&train);
    println!("smoothed training label frequencies:");
    for m in Maneuver::ALL {
        println!("  {:<22} {:>5} {:.4}", m.name(), stats.counts[m.index()], stats.frequencies[m.index()]);
    }
    Ok(())
}
