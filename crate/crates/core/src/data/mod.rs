//! Traces, the windowing pipeline and a synthetic trace generator.

pub mod maneuver;
pub mod pipeline;
pub mod store;
pub mod synth;
pub mod trace;

pub use maneuver::{Maneuver, EOS, NUM_MANEUVERS, SOS, VOCAB_SIZE};
pub use pipeline::{
    downsample, exclude_label, label_stats, segment, speed_filter, split, LabelStats,
    ScalerParams, SegmentConfig, SplitMode, Window, MIN_SPEED_MPS,
};
pub use synth::{synth_trace, synth_traces, GeneratorConfig};
pub use trace::{export_csv, ingest_csv, Trace, CHANNEL_NAMES, NUM_CHANNELS};
