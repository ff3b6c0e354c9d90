//! Generates a labeled synthetic trace, prints the time share of each
//! maneuver and the injected anomalies, and writes it as CSV.
//!
//! ```text
//! cargo run --example synth_traces -- [seconds] [out.csv]
//! ```

use mtad::data::synth::synth_detailed;
use mtad::data::{export_csv, GeneratorConfig, Maneuver};
use mtad::numeric::SeededRng;

fn main() -> mtad::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let duration_s: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(600.0);
    let cfg = GeneratorConfig {
        duration_s,
        ..GeneratorConfig::default()
    };
    let out = synth_detailed(&cfg, 0, &mut SeededRng::new(cfg.seed))?;
    let trace = &out.trace;
    println!("{} samples at {} Hz ({:.0} s)", trace.len(), trace.sample_rate_hz, trace.duration_s());

    let mut steps = [0usize; 11];
    for s in &out.segments {
        steps[s.maneuver.index()] += s.len;
    }
    println!("{:<22} {:>8} {:>8}", "maneuver", "share", "target");
    for m in Maneuver::ALL {
        let share = 100.0 * steps[m.index()] as f64 / trace.len() as f64;
        println!("{:<22} {:>7.2}% {:>7.2}%", m.name(), share, 100.0 * cfg.probabilities()?[m.index()]);
    }

    println!("\n{} injected anomalies:", out.anomalies.len());
    for a in out.anomalies.iter().take(10) {
        println!("  {:?} at {:.1} s for {:.1} s", a.kind, a.start as f64 / cfg.sample_rate_hz, a.len as f64 / cfg.sample_rate_hz);
    }

    if let Some(path) = args.get(2) {
        export_csv(trace, path)?;
        println!("wrote {path}");
    }
    Ok(())
}
