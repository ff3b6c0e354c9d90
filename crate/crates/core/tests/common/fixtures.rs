//! Synthetic datasets for integration tests.

use mtad::cli::{prepare_windows, RunConfig};
use mtad::data::maneuver::Maneuver;
use mtad::data::store::PreparedStore;
use mtad::data::synth::{synth_traces, GeneratorConfig};

/// Generator settings with the given seed, trace count and length.
pub fn generator(seed: u64, num_traces: u32, duration_s: f64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        num_traces,
        duration_s,
        ..GeneratorConfig::default()
    }
}

/// Generates traces and runs the full window pipeline on them.
pub fn prepared(gen: &GeneratorConfig, exclude: Option<Maneuver>) -> PreparedStore {
    let mut cfg = RunConfig::default();
    cfg.synth = gen.clone();
    cfg.prepare.exclude_label = exclude.map(|m| m.name().to_string());
    let traces = synth_traces(gen).expect("synthetic traces");
    prepare_windows(&cfg, &traces).expect("prepared store")
}
