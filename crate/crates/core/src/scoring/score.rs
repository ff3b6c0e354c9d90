//! Scoring trained detectors over prepared windows.

use std::collections::HashSet;

use crate::data::maneuver::Maneuver;
use crate::data::pipeline::{LabelStats, Window};
use crate::error::{Error, Result};
use crate::model::{ensemble_loss, EnsembleModel, LstmAutoencoder, MultiTaskModel};
use crate::numeric::Array;
use crate::scoring::gaussian::{error_vectors, modality_names, ErrorModelSet, Ridge, COMBINED, NUM_MODALITIES};
use crate::scoring::rank::{scaled_score, sequence_nll, ScoredWindow};

/// Modality name of the ensemble's minimum member loss.
pub const MIN_LOSS: &str = "min_loss";

/// Windows whose anomaly fraction reaches this share count as injected
/// anomalies.
pub const ANOMALY_TARGET_FRACTION: f64 = 0.2;

/// A trained model that can reconstruct windows.
#[derive(Debug, Clone, Copy)]
pub enum Detector<'a> {
    MultiTask(&'a MultiTaskModel),
    Autoencoder(&'a LstmAutoencoder),
    Ensemble(&'a EnsembleModel),
}

/// What a detector produced for one window.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Error vectors per modality, see [`error_vectors`].
    pub errors: Vec<Vec<f64>>,
    pub symbols: Option<Vec<usize>>,
    /// Minimum member loss and the member label, for ensembles.
    pub min_loss: Option<(f64, Maneuver)>,
}

impl Detector<'_> {
    pub fn has_symbols(&self) -> bool {
        matches!(self, Detector::MultiTask(_))
    }

    pub fn reconstruct(&self, input: &Array<f32>) -> Result<Reconstruction> {
        let (recon, symbols, min_loss) = match self {
            Detector::MultiTask(m) => {
                let (r, s) = m.infer(input)?;
                (r, Some(s), None)
            }
            Detector::Autoencoder(ae) => (ae.reconstruct(input)?, None, None),
            Detector::Ensemble(e) => {
                let (loss, label) = ensemble_loss(e, input)?;
                let member = &e.members.iter().find(|(l, _)| *l == label).expect("label from ensemble").1;
                (member.reconstruct(input)?, None, Some((loss, label)))
            }
        };
        Ok(Reconstruction {
            errors: error_vectors(input, &recon)?,
            symbols,
            min_loss,
        })
    }

    pub fn reconstruct_all(&self, windows: &[Window]) -> Result<Vec<Reconstruction>> {
        windows.iter().map(|w| self.reconstruct(&w.input)).collect()
    }
}

/// Mean squared reconstruction error per channel, then over all channels.
pub fn modality_mse(recons: &[Reconstruction]) -> Result<Vec<f64>> {
    if recons.is_empty() {
        return Err(Error::Empty("reconstruction set"));
    }
    let mut sums = vec![0.0; NUM_MODALITIES];
    let mut counts = vec![0usize; NUM_MODALITIES];
    for r in recons {
        for (k, e) in r.errors.iter().enumerate() {
            sums[k] += e.iter().map(|v| v * v).sum::<f64>();
            counts[k] += e.len();
        }
    }
    Ok(sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect())
}

/// Results of scoring a test set.
#[derive(Debug, Clone)]
pub struct ScoreRun {
    pub error_models: ErrorModelSet,
    /// Window-major, modalities in [`modality_names`] order, then
    /// [`MIN_LOSS`] for ensembles.
    pub scored: Vec<ScoredWindow>,
    /// Test reconstruction MSE per modality.
    pub test_mse: Vec<f64>,
}

impl ScoreRun {
    pub fn modality(&self, name: &str) -> impl Iterator<Item = &ScoredWindow> + '_ {
        let name = name.to_string();
        self.scored.iter().filter(move |s| s.modality == name)
    }

    /// `(window_id, raw_score)` for one modality.
    pub fn raw_scores(&self, modality: &str) -> Vec<(u64, f64)> {
        self.modality(modality).map(|s| (s.window_id, s.raw_score)).collect()
    }

    /// `(window_id, scaled_score)` for one modality; empty when the
    /// detector has no symbol head.
    pub fn scaled_scores(&self, modality: &str) -> Vec<(u64, f64)> {
        self.modality(modality)
            .filter_map(|s| s.scaled_score.map(|v| (s.window_id, v)))
            .collect()
    }
}

/// Fits the error models on the training windows and scores the test
/// windows under every modality.
pub fn score_windows(
    detector: Detector<'_>,
    train: &[Window],
    test: &[Window],
    stats: &LabelStats,
    ridge: Ridge,
    delta: f64,
) -> Result<ScoreRun> {
    let train_errors: Vec<Vec<Vec<f64>>> = detector
        .reconstruct_all(train)?
        .into_iter()
        .map(|r| r.errors)
        .collect();
    let error_models = ErrorModelSet::fit(&train_errors, ridge)?;
    drop(train_errors);
    let recons = detector.reconstruct_all(test)?;
    let names = modality_names();
    let mut scored = Vec::with_capacity(test.len() * (NUM_MODALITIES + 1));
    for (w, r) in test.iter().zip(&recons) {
        let raw = error_models.score(&r.errors)?;
        let nll = r.symbols.as_deref().map(|s| sequence_nll(s, stats)).transpose()?;
        let symbols = r.symbols.clone().unwrap_or_default();
        for (name, &raw) in names.iter().zip(&raw) {
            scored.push(ScoredWindow {
                window_id: w.id,
                modality: name.to_string(),
                raw_score: raw,
                predicted_symbols: symbols.clone(),
                nll,
                scaled_score: nll.map(|n| scaled_score(raw, n, delta)),
                majority_label: w.majority_label,
                anomaly_fraction: w.anomaly_fraction,
            });
        }
        if let Some((loss, _)) = r.min_loss {
            scored.push(ScoredWindow {
                window_id: w.id,
                modality: MIN_LOSS.to_string(),
                raw_score: loss,
                predicted_symbols: Vec::new(),
                nll: None,
                scaled_score: None,
                majority_label: w.majority_label,
                anomaly_fraction: w.anomaly_fraction,
            });
        }
    }
    Ok(ScoreRun {
        error_models,
        scored,
        test_mse: modality_mse(&recons)?,
    })
}

/// Ids of windows whose majority maneuver is `label`.
pub fn label_targets(windows: &[Window], label: Maneuver) -> HashSet<u64> {
    windows.iter().filter(|w| w.majority_label == label).map(|w| w.id).collect()
}

/// Ids of windows that overlap an injected anomaly by at least
/// [`ANOMALY_TARGET_FRACTION`].
pub fn anomaly_targets(windows: &[Window]) -> HashSet<u64> {
    windows
        .iter()
        .filter(|w| w.anomaly_fraction >= ANOMALY_TARGET_FRACTION)
        .map(|w| w.id)
        .collect()
}

/// The modality used for headline scores.
pub const DEFAULT_MODALITY: &str = COMBINED;
