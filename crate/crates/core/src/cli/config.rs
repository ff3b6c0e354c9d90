//! Run configuration: one TOML file with a section per command.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::maneuver::Maneuver;
use crate::data::pipeline::{SegmentConfig, SplitMode, MIN_SPEED_MPS, MPS_PER_MPH};
use crate::data::synth::GeneratorConfig;
use crate::error::{Error, Result};
use crate::model::{LossWeights, ModelConfig, TrainConfig};
use crate::scoring::{Ridge, COMBINED, DEFAULT_DELTA, REPORT_PERCENTILES};

/// Model families the `train` command can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Multitask,
    BaselineAe,
    Ensemble,
    SymbolOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Multitask, Variant::BaselineAe, Variant::Ensemble, Variant::SymbolOnly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Multitask => "multitask",
            Variant::BaselineAe => "baseline_ae",
            Variant::Ensemble => "ensemble",
            Variant::SymbolOnly => "symbol_only",
        }
    }

    /// Loss weights for this variant given the configured multi-task weights.
    pub fn loss_weights(self, base: LossWeights) -> LossWeights {
        match self {
            Variant::Multitask => base,
            Variant::BaselineAe | Variant::Ensemble => LossWeights {
                reconstruction: 1.0,
                symbols: 0.0,
                regularization: base.regularization,
            },
            Variant::SymbolOnly => LossWeights {
                reconstruction: 0.0,
                symbols: 1.0,
                regularization: base.regularization,
            },
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown variant {s:?}; expected one of multitask, baseline_ae, ensemble, symbol_only")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    /// Directory of trace CSVs; relative to the output directory. Defaults
    /// to the `synth` output.
    pub traces_dir: PathBuf,
    pub target_hz: f64,
    pub segment: SegmentConfig,
    pub min_speed_mph: f64,
    pub train_fraction: f64,
    pub split: SplitMode,
    /// Maneuver whose majority windows are removed from the training split.
    pub exclude_label: Option<String>,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            traces_dir: PathBuf::from("traces"),
            target_hz: 5.0,
            segment: SegmentConfig::default(),
            min_speed_mph: MIN_SPEED_MPS / MPS_PER_MPH,
            train_fraction: 0.7,
            split: SplitMode::Chronological,
            exclude_label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub ridge: Ridge,
    pub delta: f64,
    pub percentiles: Vec<f64>,
    /// Modality whose scores feed the detection tables.
    pub modality: String,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            ridge: Ridge::Auto,
            delta: DEFAULT_DELTA,
            percentiles: REPORT_PERCENTILES.to_vec(),
            modality: COMBINED.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Variants to compare; empty means every scored run.
    pub variants: Vec<Variant>,
    /// Maneuver tracked in the recall table.
    pub rare_label: String,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            variants: Vec::new(),
            rare_label: Maneuver::UTurn.name().to_string(),
        }
    }
}

/// Everything a run needs. Written back next to every command's outputs
/// after command-line overrides are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: GeneratorConfig,
    pub prepare: PrepareConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub score: ScoreConfig,
    pub compare: CompareConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            synth: GeneratorConfig::default(),
            prepare: PrepareConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            score: ScoreConfig::default(),
            compare: CompareConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the resolved TOML.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Switches model and optimizer settings to the full-size values.
    pub fn apply_paper_scale(&mut self) {
        let paper = ModelConfig::paper_scale();
        self.model.hidden_size = paper.hidden_size;
        let t = TrainConfig::paper_scale();
        self.train.epochs = t.epochs;
        self.train.batch_size = t.batch_size;
        self.train.adam = t.adam;
    }

    /// One seed drives generation, splitting and training.
    pub fn apply_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.train.seed = seed;
        if let SplitMode::Shuffled { .. } = self.prepare.split {
            self.prepare.split = SplitMode::Shuffled { seed };
        }
    }

    pub fn excluded_label(&self) -> Result<Option<Maneuver>> {
        self.prepare
            .exclude_label
            .as_deref()
            .map(|s| s.parse().map_err(|_| Error::config(format!("unknown maneuver label {s:?}"))))
            .transpose()
    }

    pub fn rare_label(&self) -> Result<Maneuver> {
        self.compare
            .rare_label
            .parse()
            .map_err(|_| Error::config(format!("unknown maneuver label {:?}", self.compare.rare_label)))
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate().map_err(as_config)?;
        self.model.validate().map_err(as_config)?;
        self.train.validate()?;
        self.excluded_label()?;
        self.rare_label()?;
        let p = &self.prepare;
        if !(p.target_hz > 0.0) || !(0.0..=1.0).contains(&p.train_fraction) || p.min_speed_mph < 0.0 {
            return Err(Error::config("prepare: target_hz must be positive and train_fraction in [0, 1]"));
        }
        let (w, h, _) = p.segment.steps(p.target_hz).map_err(as_config)?;
        if w != self.model.window_steps || h != self.model.horizon_steps {
            return Err(Error::config(format!(
                "prepare produces {w}-step windows with a {h}-step horizon but the model expects {} and {}",
                self.model.window_steps, self.model.horizon_steps
            )));
        }
        if self.score.percentiles.iter().any(|&q| !(q > 0.0 && q <= 100.0)) {
            return Err(Error::config("score percentiles must lie in (0, 100]"));
        }
        if !(self.score.delta > 0.0) {
            return Err(Error::config("score delta must be positive"));
        }
        if !crate::scoring::modality_names().contains(&self.score.modality.as_str()) {
            return Err(Error::config(format!("unknown modality {:?}", self.score.modality)));
        }
        Ok(())
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::config(other.to_string()),
    }
}
