//! Minibatch training with Adam, global-norm clipping and per-epoch
//! evaluation.

use serde::{Deserialize, Serialize};

use crate::data::pipeline::{LabelStats, Window};
use crate::error::{Error, Result};
use crate::model::baseline::{ensemble_loss, EnsembleModel, LstmAutoencoder};
use crate::model::config::LossWeights;
use crate::model::multitask::MultiTaskModel;
use crate::nn::{add_l2_grad, class_weights, AdamConfig, AdamState, Module};
use crate::numeric::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 512,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn paper_scale() -> Self {
        Self {
            epochs: 300,
            batch_size: 512,
            adam: AdamConfig {
                learning_rate: 0.01,
                epsilon: 0.01,
                ..AdamConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.clip_norm > 0.0 && self.adam.learning_rate > 0.0) {
            return Err(Error::config("clip_norm and learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Task losses of one window; `symbols` is absent for models without a
/// symbol head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowLoss {
    pub reconstruction: f64,
    pub symbols: Option<f64>,
}

/// A model the trainer can fit.
pub trait Trainable: Module<f32> + Clone {
    /// Loss of one window. With `grads`, accumulates `scale` times the
    /// gradient of the weighted task loss (without L2) into it.
    fn window_loss(
        &self,
        w: &Window,
        class_weights: &[f32],
        grads: Option<&mut Self>,
        scale: f64,
    ) -> Result<WindowLoss>;

    fn loss_weights(&self) -> LossWeights;

    /// `(correct, total)` greedy predictions over the horizon positions.
    fn symbol_hits(&self, _w: &Window) -> Result<Option<(usize, usize)>> {
        Ok(None)
    }
}

impl Trainable for MultiTaskModel<f32> {
    fn window_loss(&self, w: &Window, cw: &[f32], grads: Option<&mut Self>, scale: f64) -> Result<WindowLoss> {
        let t = self.task_losses(w.input.data(), &w.targets, cw, grads, scale)?;
        Ok(WindowLoss {
            reconstruction: t.reconstruction,
            symbols: Some(t.symbols),
        })
    }

    fn loss_weights(&self) -> LossWeights {
        self.config.loss_weights
    }

    fn symbol_hits(&self, w: &Window) -> Result<Option<(usize, usize)>> {
        let enc = self.encode(&w.input)?;
        let predicted = self.predict_symbols(&enc.forward_states());
        let horizon = self.config.horizon_steps;
        let correct = predicted[..horizon]
            .iter()
            .zip(&w.targets[..horizon])
            .filter(|(a, b)| a == b)
            .count();
        Ok(Some((correct, horizon)))
    }
}

impl Trainable for LstmAutoencoder<f32> {
    fn window_loss(&self, w: &Window, _cw: &[f32], grads: Option<&mut Self>, scale: f64) -> Result<WindowLoss> {
        Ok(WindowLoss {
            reconstruction: self.loss(w.input.data(), grads, scale)?,
            symbols: None,
        })
    }

    fn loss_weights(&self) -> LossWeights {
        LossWeights {
            reconstruction: 1.0,
            symbols: 0.0,
            regularization: self.config.loss_weights.regularization,
        }
    }
}

/// Evaluation metrics after one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub total: f64,
    pub reconstruction: f64,
    pub symbols: Option<f64>,
    pub regularization: f64,
    pub symbol_accuracy: Option<f64>,
    /// Mean training-batch objective during the epoch.
    pub train_loss: f64,
}

pub const METRICS_HEADER: [&str; 6] = ["epoch", "L_O", "L_A", "L_B", "L_R", "symbol_accuracy"];

impl EpochMetrics {
    pub fn csv_record(&self) -> [String; 6] {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.epoch.to_string(),
            self.total.to_string(),
            self.reconstruction.to_string(),
            opt(self.symbols),
            self.regularization.to_string(),
            opt(self.symbol_accuracy),
        ]
    }
}

/// Class weights over the decoder vocabulary from training label statistics.
/// SOS and EOS get frequency 1 and hence weight 1.
pub fn symbol_class_weights(stats: &LabelStats, vocab: usize, k: f64) -> Result<Vec<f64>> {
    class_weights(&stats.vocab_frequencies(vocab), k)
}

/// Mean losses and accuracy of a model over `eval`.
pub fn evaluate<M: Trainable>(model: &M, eval: &[Window], cw: &[f32]) -> Result<EpochMetrics> {
    if eval.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let (mut rec, mut sym, mut has_sym) = (0.0, 0.0, false);
    let (mut hits, mut total) = (0usize, 0usize);
    let mut has_acc = false;
    for w in eval {
        let l = model.window_loss(w, cw, None, 1.0)?;
        rec += l.reconstruction;
        if let Some(s) = l.symbols {
            sym += s;
            has_sym = true;
        }
        if let Some((h, t)) = model.symbol_hits(w)? {
            hits += h;
            total += t;
            has_acc = true;
        }
    }
    let n = eval.len() as f64;
    let reconstruction = rec / n;
    let symbols = has_sym.then(|| sym / n);
    let regularization = crate::nn::l2_regularization(model.params());
    Ok(EpochMetrics {
        epoch: 0,
        total: model
            .loss_weights()
            .combine(reconstruction, symbols.unwrap_or(0.0), regularization),
        reconstruction,
        symbols,
        regularization,
        symbol_accuracy: has_acc.then(|| hits as f64 / total.max(1) as f64),
        train_loss: f64::NAN,
    })
}

/// Optimizer state and gradient buffer for one model.
pub struct Trainer<M: Trainable> {
    cfg: TrainConfig,
    class_weights: Vec<f32>,
    adam: AdamState<f32>,
    grads: M,
    rng: SeededRng,
    epoch: usize,
}

impl<M: Trainable> Trainer<M> {
    pub fn new(model: &M, class_weights: &[f64], cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut grads = model.clone();
        grads.zero_grad();
        Ok(Self {
            adam: AdamState::new(cfg.adam, model),
            class_weights: class_weights.iter().map(|&w| w as f32).collect(),
            rng: SeededRng::new(cfg.seed),
            grads,
            cfg,
            epoch: 0,
        })
    }

    pub fn class_weights(&self) -> &[f32] {
        &self.class_weights
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// One pass over `data`; returns the mean batch objective.
    pub fn train_epoch(&mut self, model: &mut M, data: &[Window]) -> Result<f64> {
        self.epoch += 1;
        let mut order: Vec<usize> = (0..data.len()).collect();
        if self.cfg.shuffle {
            self.rng.shuffle(&mut order);
        }
        let weights = model.loss_weights();
        let mut sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(self.cfg.batch_size) {
            self.grads.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            let (mut rec, mut sym) = (0.0, 0.0);
            for &i in batch {
                let l = model.window_loss(&data[i], &self.class_weights, Some(&mut self.grads), scale)?;
                rec += l.reconstruction;
                sym += l.symbols.unwrap_or(0.0);
            }
            let reg = crate::nn::l2_regularization(model.params());
            let objective = weights.combine(rec * scale, sym * scale, reg);
            if weights.regularization != 0.0 {
                add_l2_grad(model, &mut self.grads, weights.regularization);
            }
            for (p, g) in model.params_mut().into_iter().zip(self.grads.params()) {
                p.grad.data_mut().copy_from_slice(g.grad.data());
            }
            let norm = model.clip_grad_norm(self.cfg.clip_norm);
            if !objective.is_finite() || !norm.is_finite() {
                return Err(Error::Divergence {
                    epoch: self.epoch,
                    detail: format!("batch {batches}: objective {objective}, gradient norm {norm}"),
                });
            }
            self.adam.step(model);
            sum += objective;
            batches += 1;
        }
        Ok(if batches == 0 { 0.0 } else { sum / batches as f64 })
    }
}

/// Trains for `cfg.epochs` epochs, evaluating on `eval` after each one.
pub fn train<M: Trainable>(
    model: &mut M,
    train_set: &[Window],
    eval: &[Window],
    class_weights: &[f64],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut trainer = Trainer::new(model, class_weights, cfg.clone())?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let train_loss = trainer.train_epoch(model, train_set)?;
        let mut m = evaluate(model, eval, trainer.class_weights())?;
        m.epoch = epoch;
        m.train_loss = train_loss;
        if !m.total.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("evaluation objective {}", m.total),
            });
        }
        on_epoch(&m);
        history.push(m);
    }
    Ok(history)
}

/// Trains each ensemble member on the training windows whose majority label
/// matches the member, one epoch at a time. Evaluation uses the
/// minimum-over-members loss.
pub fn train_ensemble(
    ensemble: &mut EnsembleModel<f32>,
    train_set: &[Window],
    eval: &[Window],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    if ensemble.members.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    if eval.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let subsets: Vec<Vec<Window>> = ensemble
        .members
        .iter()
        .map(|(label, _)| train_set.iter().filter(|w| w.majority_label == *label).cloned().collect())
        .collect();
    let mut trainers = ensemble
        .members
        .iter()
        .enumerate()
        .map(|(i, (_, m))| {
            let c = TrainConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            Trainer::new(m, &[], c)
        })
        .collect::<Result<Vec<_>>>()?;
    let w_r = ensemble.members[0].1.config.loss_weights.regularization;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut train_loss = 0.0;
        for ((trainer, (_, member)), data) in trainers.iter_mut().zip(&mut ensemble.members).zip(&subsets) {
            if !data.is_empty() {
                train_loss += trainer.train_epoch(member, data)? * data.len() as f64;
            }
        }
        let mut rec = 0.0;
        for w in eval {
            rec += ensemble_loss(ensemble, &w.input)?.0;
        }
        let reconstruction = rec / eval.len() as f64;
        let regularization = crate::nn::l2_regularization(ensemble.params());
        let m = EpochMetrics {
            epoch,
            total: reconstruction + w_r * regularization,
            reconstruction,
            symbols: None,
            regularization,
            symbol_accuracy: None,
            train_loss: train_loss / train_set.len().max(1) as f64,
        };
        if !m.total.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("evaluation objective {}", m.total),
            });
        }
        on_epoch(&m);
        history.push(m);
    }
    Ok(history)
}
