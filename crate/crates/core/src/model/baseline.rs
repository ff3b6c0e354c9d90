//! Unidirectional LSTM autoencoder and the per-maneuver ensemble built
//! from it.

use crate::data::maneuver::Maneuver;
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::nn::lstm::LstmRun;
use crate::nn::{l2_regularization, mse_with_grad, Dense, LstmCell, LstmState, Module, Param};
use crate::numeric::{Array, Real, SeededRng};

/// Stacked LSTM encoder over the raw window; a decoder stack of the same
/// depth, driven by zero input and started from the encoder's final states,
/// emits one hidden vector per step which a dense layer maps back to the
/// channels.
#[derive(Debug, Clone)]
pub struct LstmAutoencoder<R: Real = f32> {
    pub config: ModelConfig,
    pub encoder: Vec<LstmCell<R>>,
    pub decoder: Vec<LstmCell<R>>,
    pub proj: Dense<R>,
}

impl<R: Real> LstmAutoencoder<R> {
    /// Parameter names are prefixed with `prefix` (e.g. `"ae"`).
    pub fn new(config: ModelConfig, prefix: &str, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let encoder = (0..config.lstm_layers)
            .map(|l| LstmCell::new(&format!("{prefix}.enc{l}"), if l == 0 { config.channels } else { h }, h, rng))
            .collect();
        let decoder = (0..config.lstm_layers)
            .map(|l| LstmCell::new(&format!("{prefix}.dec{l}"), if l == 0 { 0 } else { h }, h, rng))
            .collect();
        let proj = Dense::new(&format!("{prefix}.proj"), h, config.channels, rng);
        Ok(Self {
            config,
            encoder,
            decoder,
            proj,
        })
    }

    fn check_input(&self, x: &[R]) -> Result<()> {
        let n = self.config.window_steps * self.config.channels;
        if x.len() != n {
            return Err(Error::ShapeMismatch {
                op: "autoencoder input",
                expected: vec![self.config.window_steps, self.config.channels],
                found: vec![x.len()],
            });
        }
        Ok(())
    }

    fn forward(&self, x: &[R]) -> (Vec<LstmRun<R>>, Vec<LstmRun<R>>, Vec<R>) {
        let steps = self.config.window_steps;
        let hidden = self.config.hidden_size;
        let mut enc_runs = Vec::with_capacity(self.encoder.len());
        let mut h = x.to_vec();
        for cell in &self.encoder {
            let run = cell.run(&h, steps, &LstmState::zeros(hidden), false);
            h = run.outputs.clone();
            enc_runs.push(run);
        }
        let mut dec_runs = Vec::with_capacity(self.decoder.len());
        let mut h: Vec<R> = Vec::new();
        for (l, cell) in self.decoder.iter().enumerate() {
            let init = enc_runs
                .get(l)
                .map_or_else(|| LstmState::zeros(hidden), |r| r.final_state.clone());
            let run = cell.run(&h, steps, &init, false);
            h = run.outputs.clone();
            dec_runs.push(run);
        }
        (enc_runs, dec_runs, h)
    }

    pub fn reconstruct(&self, window: &Array<R>) -> Result<Array<R>> {
        self.check_input(window.data())?;
        let (_, _, top) = self.forward(window.data());
        let out = self.proj.forward(&top, self.config.window_steps);
        Array::new(window.shape(), out)
    }

    /// Reconstruction MSE for one window. With `grads`, accumulates
    /// `scale · ∂MSE/∂θ` into it.
    pub fn loss(&self, x: &[R], grads: Option<&mut Self>, scale: f64) -> Result<f64> {
        self.check_input(x)?;
        let steps = self.config.window_steps;
        let hidden = self.config.hidden_size;
        let (enc_runs, dec_runs, top) = self.forward(x);
        let out = self.proj.forward(&top, steps);
        let (mse, d_out) = mse_with_grad(&out, x);
        if let Some(g) = grads {
            let k = R::narrow(scale);
            let d_out: Vec<R> = d_out.iter().map(|&v| v * k).collect();
            let mut d = self.proj.backward(&top, steps, &d_out, &mut g.proj);
            let mut d_final = vec![LstmState::zeros(hidden); self.encoder.len()];
            for l in (0..self.decoder.len()).rev() {
                let (dx, d_init) = self.decoder[l].run_backward(&dec_runs[l], Some(&d), &LstmState::zeros(hidden), &mut g.decoder[l]);
                if l < d_final.len() {
                    d_final[l] = d_init;
                }
                d = dx;
            }
            let mut d_out: Option<Vec<R>> = None;
            for l in (0..self.encoder.len()).rev() {
                let (dx, _) = self.encoder[l].run_backward(&enc_runs[l], d_out.as_deref(), &d_final[l], &mut g.encoder[l]);
                d_out = Some(dx);
            }
        }
        Ok(mse)
    }

    pub fn regularization(&self) -> f64 {
        l2_regularization(self.params())
    }
}

/// Reconstruction MSE of the standalone autoencoder.
pub fn baseline_autoencoder_loss<R: Real>(b: &LstmAutoencoder<R>, window: &Array<R>) -> Result<f64> {
    b.loss(window.data(), None, 1.0)
}

impl<R: Real> Module<R> for LstmAutoencoder<R> {
    fn params(&self) -> Vec<&Param<R>> {
        let mut v = Vec::new();
        self.encoder.iter().for_each(|c| v.extend(c.params()));
        self.decoder.iter().for_each(|c| v.extend(c.params()));
        v.extend(self.proj.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        let mut v = Vec::new();
        self.encoder.iter_mut().for_each(|c| v.extend(c.params_mut()));
        self.decoder.iter_mut().for_each(|c| v.extend(c.params_mut()));
        v.extend(self.proj.params_mut());
        v
    }
}

/// One autoencoder per maneuver seen in training.
#[derive(Debug, Clone)]
pub struct EnsembleModel<R: Real = f32> {
    pub members: Vec<(Maneuver, LstmAutoencoder<R>)>,
}

impl<R: Real> EnsembleModel<R> {
    /// Builds untrained members for `labels`, in the given order.
    pub fn new(config: &ModelConfig, labels: &[Maneuver], rng: &mut SeededRng) -> Result<Self> {
        let members = labels
            .iter()
            .map(|&l| Ok((l, LstmAutoencoder::new(config.clone(), &format!("member.{}", l.name()), rng)?)))
            .collect::<Result<_>>()?;
        Ok(Self { members })
    }

    pub fn labels(&self) -> Vec<Maneuver> {
        self.members.iter().map(|(l, _)| *l).collect()
    }

    /// Every member's reconstruction MSE, in member order.
    pub fn member_losses(&self, window: &Array<R>) -> Result<Vec<f64>> {
        self.members
            .iter()
            .map(|(_, ae)| baseline_autoencoder_loss(ae, window))
            .collect()
    }
}

/// Lowest member loss and the label of the member that achieved it (the
/// earliest member on ties).
pub fn ensemble_loss<R: Real>(e: &EnsembleModel<R>, window: &Array<R>) -> Result<(f64, Maneuver)> {
    let losses = e.member_losses(window)?;
    let mut best: Option<(f64, Maneuver)> = None;
    for (loss, (label, _)) in losses.into_iter().zip(&e.members) {
        if best.map_or(true, |(b, _)| loss < b) {
            best = Some((loss, *label));
        }
    }
    best.ok_or(Error::Empty("ensemble"))
}

impl<R: Real> Module<R> for EnsembleModel<R> {
    fn params(&self) -> Vec<&Param<R>> {
        self.members.iter().flat_map(|(_, m)| m.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        self.members.iter_mut().flat_map(|(_, m)| m.params_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            hidden_size: 5,
            ..ModelConfig::default()
        }
    }

    fn window(seed: u64) -> Array<f32> {
        let mut rng = SeededRng::new(seed);
        Array::new(&[25, 6], (0..150).map(|_| rng.uniform(0.0, 1.0) as f32).collect()).unwrap()
    }

    #[test]
    fn zero_params_reconstruct_zero_window() {
        let mut ae = LstmAutoencoder::<f32>::new(tiny(), "ae", &mut SeededRng::new(1)).unwrap();
        ae.params_mut().into_iter().for_each(|p| p.value.fill(0.0));
        assert_eq!(baseline_autoencoder_loss(&ae, &Array::zeros(&[25, 6])).unwrap(), 0.0);
        assert_eq!(ae.reconstruct(&window(1)).unwrap().shape(), &[25, 6]);
    }

    #[test]
    fn ensemble_minimum() {
        let e = EnsembleModel::<f32>::new(&tiny(), &[Maneuver::Background, Maneuver::LeftTurn, Maneuver::Merge], &mut SeededRng::new(2)).unwrap();
        let w = window(3);
        let losses = e.member_losses(&w).unwrap();
        let (min, label) = ensemble_loss(&e, &w).unwrap();
        assert!(losses.iter().all(|&l| min <= l));
        assert_eq!(min, losses[e.labels().iter().position(|&l| l == label).unwrap()]);

        let single = EnsembleModel {
            members: vec![e.members[1].clone()],
        };
        assert_eq!(ensemble_loss(&single, &w).unwrap(), (losses[1], Maneuver::LeftTurn));
        let doubled = EnsembleModel {
            members: vec![e.members[1].clone(), e.members[1].clone()],
        };
        assert_eq!(ensemble_loss(&doubled, &w).unwrap().0, losses[1]);
        let empty = EnsembleModel::<f32> { members: vec![] };
        assert!(matches!(ensemble_loss(&empty, &w), Err(Error::Empty(_))));
    }

    #[test]
    fn member_names_are_prefixed() {
        let e = EnsembleModel::<f32>::new(&tiny(), &[Maneuver::UTurn], &mut SeededRng::new(2)).unwrap();
        assert!(e.params().iter().all(|p| p.name.starts_with("member.u_turn.")));
    }
}
