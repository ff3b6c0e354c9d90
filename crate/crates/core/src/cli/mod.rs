//! Command-line front end behind the `mtad` binary.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_compare, cmd_prepare, cmd_score, cmd_synth, cmd_train, prepare_windows, Comparison, TrainedModel};
pub use config::{CompareConfig, PrepareConfig, RunConfig, ScoreConfig, Variant};
pub use manifest::{FileEntry, Manifest};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "mtad", version, about = "Multi-task anomaly detection for driving telemetry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (TOML). Missing keys take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Working directory for all inputs and outputs.
    #[arg(long, global = true, default_value = "mtad-out")]
    pub out: PathBuf,

    /// Full-size model and optimizer settings.
    #[arg(long, global = true)]
    pub paper_scale: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate labeled synthetic traces.
    Synth,
    /// Downsample, window, filter, split and scale traces.
    Prepare {
        /// Drop training windows whose majority maneuver is this label.
        #[arg(long)]
        exclude_label: Option<String>,
    },
    /// Train one model variant.
    Train {
        #[arg(long, default_value = "multitask")]
        variant: String,
    },
    /// Score the test split with a trained variant.
    Score {
        #[arg(long, default_value = "multitask")]
        variant: String,
    },
    /// Compare trained variants. `--variant` takes a comma-separated list.
    Compare {
        #[arg(long)]
        variant: Option<String>,
    },
}

impl Cli {
    /// Loads the configuration file and applies command-line overrides.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.paper_scale {
            cfg.apply_paper_scale();
        }
        if let Some(seed) = self.seed {
            cfg.apply_seed(seed);
        }
        if let Command::Prepare {
            exclude_label: Some(l),
        } = &self.command
        {
            cfg.prepare.exclude_label = Some(l.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_variants(list: &str) -> Result<Vec<Variant>> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

/// Runs a parsed command line and returns a one-line summary.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.resolve_config()?;
    let out = &cli.out;
    std::fs::create_dir_all(out)?;
    match &cli.command {
        Command::Synth => {
            let files = cmd_synth(&cfg, out)?;
            Ok(format!("wrote {} trace files to {}", files.len() - 2, out.join(commands::TRACES_DIR).display()))
        }
        Command::Prepare { .. } => {
            let store = cmd_prepare(&cfg, out)?;
            let c = &store.counts;
            Ok(format!(
                "{} traces, {} windows, {} after speed filter, train {} (excluded {}), test {}",
                c.traces, c.segmented, c.speed_filtered, c.train, c.excluded_from_train, c.test
            ))
        }
        Command::Train { variant } => {
            let v: Variant = variant.parse()?;
            let history = cmd_train(&cfg, out, v)?;
            let last = history.last().ok_or(Error::Empty("training history"))?;
            Ok(format!(
                "{v}: {} epochs, test L_A {:.6}, L_O {:.6}",
                history.len(),
                last.reconstruction,
                last.total
            ))
        }
        Command::Score { variant } => {
            let v: Variant = variant.parse()?;
            let run = cmd_score(&cfg, out, v)?;
            Ok(format!("{v}: scored {} rows", run.scored.len()))
        }
        Command::Compare { variant } => {
            let vs = variant.as_deref().map(parse_variants).transpose()?.unwrap_or_default();
            let c = cmd_compare(&cfg, out, &vs)?;
            Ok(format!(
                "compared {}",
                c.variants.iter().map(|v| v.name()).collect::<Vec<_>>().join(", ")
            ))
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
