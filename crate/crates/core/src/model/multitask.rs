//! Shared convolutional BiLSTM encoder with a reconstruction head and a
//! greedy maneuver-sequence head.
//!
//! ```text
//! x ─ conv·tanh ─ conv·tanh ─ BiLSTM×L ─┬─ final (h,c) per layer
//!                                       │
//!   reconstruction: BiLSTM×L (zero input, init from encoder layers)
//!                   ─ dense ─ convᵀ·tanh ─ convᵀ ─ x̂
//!   symbols:        embed(prev) ─ LSTM×L (init from forward finals) ─ dense ─ logits
//! ```

use crate::data::maneuver::SOS;
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::nn::{
    cross_entropy_with_grad, l2_regularization, mse_with_grad, BiLstm, BiState, Conv1d,
    ConvTranspose1d, Dense, Embedding, LstmCell, LstmState, Module, Param,
};
use crate::nn::lstm::{BiRun, LstmRun};
use crate::numeric::{Array, Real, SeededRng};

#[derive(Debug, Clone)]
pub struct MultiTaskModel<R: Real = f32> {
    pub config: ModelConfig,
    pub convs: Vec<Conv1d<R>>,
    pub encoder: Vec<BiLstm<R>>,
    pub recon_lstm: Vec<BiLstm<R>>,
    pub recon_proj: Dense<R>,
    /// `deconvs[i]` mirrors `convs[i]`; applied last to first.
    pub deconvs: Vec<ConvTranspose1d<R>>,
    pub embed: Embedding<R>,
    pub symbol_lstm: Vec<LstmCell<R>>,
    pub symbol_proj: Dense<R>,
}

/// Final states of every encoder layer for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding<R: Real = f32> {
    pub layers: Vec<BiState<R>>,
}

impl<R: Real> Encoding<R> {
    /// Top layer `[h_fwd; c_fwd; h_bwd; c_bwd]`.
    pub fn embedding(&self) -> Vec<R> {
        let top = self.layers.last().expect("at least one layer");
        [&top.forward.h, &top.forward.c, &top.backward.h, &top.backward.c]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn forward_states(&self) -> Vec<LstmState<R>> {
        self.layers.iter().map(|s| s.forward.clone()).collect()
    }
}

/// Task losses of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskLosses {
    /// Reconstruction MSE.
    pub reconstruction: f64,
    /// Weighted cross-entropy of the teacher-forced symbol predictions.
    pub symbols: f64,
}

/// `(L_O, L_A, L_B, L_R)` for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiTaskLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub symbols: f64,
    pub regularization: f64,
}

struct EncoderTrace<R: Real> {
    conv_in: Vec<Vec<R>>,
    conv_len: Vec<usize>,
    conv_out: Vec<Vec<R>>,
    runs: Vec<BiRun<R>>,
    steps: usize,
}

impl<R: Real> EncoderTrace<R> {
    fn encoding(&self) -> Encoding<R> {
        Encoding {
            layers: self.runs.iter().map(BiRun::final_states).collect(),
        }
    }
}

struct ReconTrace<R: Real> {
    runs: Vec<BiRun<R>>,
    proj_in: Vec<R>,
    deconv_in: Vec<Vec<R>>,
    deconv_out: Vec<Vec<R>>,
    output: Vec<R>,
}

struct SymbolTrace<R: Real> {
    inputs: Vec<usize>,
    runs: Vec<LstmRun<R>>,
    proj_in: Vec<R>,
    logits: Vec<R>,
}

fn tanh_in_place<R: Real>(v: &mut [R]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

/// `d ⊙ (1 − a²)` for `a = tanh(z)`.
fn tanh_backward<R: Real>(d: &[R], a: &[R]) -> Vec<R> {
    d.iter().zip(a).map(|(&d, &a)| d * (R::one() - a * a)).collect()
}

fn init_state<R: Real>(enc: &Encoding<R>, layer: usize, hidden: usize) -> BiState<R> {
    enc.layers.get(layer).cloned().unwrap_or_else(|| BiState::zeros(hidden))
}

/// Argmax over decoder outputs, never choosing SOS; ties go to the lowest index.
pub fn greedy_symbol<R: Real>(logits: &[R]) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in logits.iter().enumerate() {
        if i == SOS {
            continue;
        }
        if best == usize::MAX || v > logits[best] {
            best = i;
        }
    }
    best
}

impl<R: Real> MultiTaskModel<R> {
    pub fn new(config: ModelConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let mut convs = Vec::new();
        let mut deconvs = Vec::new();
        let mut c_in = config.channels;
        for (i, s) in config.conv_specs.iter().enumerate() {
            convs.push(Conv1d::new(&format!("enc.conv{i}"), c_in, s.out_channels, s.kernel_width, s.stride, rng));
            c_in = s.out_channels;
        }
        let encoder = (0..config.lstm_layers)
            .map(|l| BiLstm::new(&format!("enc.lstm{l}"), if l == 0 { c_in } else { 2 * h }, h, rng))
            .collect();
        let recon_lstm = (0..config.lstm_layers)
            .map(|l| BiLstm::new(&format!("rec.lstm{l}"), if l == 0 { 0 } else { 2 * h }, h, rng))
            .collect();
        let recon_proj = Dense::new("rec.proj", 2 * h, c_in, rng);
        let mut c = config.channels;
        for (i, s) in config.conv_specs.iter().enumerate() {
            deconvs.push(ConvTranspose1d::new(&format!("rec.deconv{i}"), s.out_channels, c, s.kernel_width, s.stride, rng));
            c = s.out_channels;
        }
        let v = config.vocab_size();
        let e = config.embedding_dim;
        let embed = Embedding::new("sym.embed", v, e, rng);
        let symbol_lstm = (0..config.lstm_layers)
            .map(|l| LstmCell::new(&format!("sym.lstm{l}"), if l == 0 { e } else { h }, h, rng))
            .collect();
        let symbol_proj = Dense::new("sym.proj", h, v, rng);
        Ok(Self {
            config,
            convs,
            encoder,
            recon_lstm,
            recon_proj,
            deconvs,
            embed,
            symbol_lstm,
            symbol_proj,
        })
    }

    fn input_len(&self) -> usize {
        self.config.window_steps * self.config.channels
    }

    fn check_input(&self, x: &[R]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::ShapeMismatch {
                op: "encode",
                expected: vec![self.config.window_steps, self.config.channels],
                found: vec![x.len()],
            });
        }
        Ok(())
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        let len = self.config.target_len();
        if targets.len() != len {
            return Err(Error::ShapeMismatch {
                op: "symbol targets",
                expected: vec![len],
                found: vec![targets.len()],
            });
        }
        let vocab = self.config.vocab_size();
        if let Some(&s) = targets.iter().find(|&&s| s >= vocab) {
            return Err(Error::SymbolOutOfVocab { symbol: s, vocab });
        }
        if targets.contains(&SOS) {
            return Err(Error::data("SOS cannot be a decoder target"));
        }
        Ok(())
    }

    fn encode_traced(&self, x: &[R]) -> Result<EncoderTrace<R>> {
        let mut t = self.config.window_steps;
        let mut h = x.to_vec();
        let mut conv_in = Vec::with_capacity(self.convs.len());
        let mut conv_len = Vec::with_capacity(self.convs.len());
        let mut conv_out = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let mut y = conv.forward(&h, t)?;
            tanh_in_place(&mut y);
            conv_len.push(t);
            t = conv.output_len(t).expect("forward succeeded");
            conv_in.push(std::mem::replace(&mut h, y.clone()));
            conv_out.push(y);
        }
        let hidden = self.config.hidden_size;
        let mut runs = Vec::with_capacity(self.encoder.len());
        for layer in &self.encoder {
            let run = layer.run(&h, t, &BiState::zeros(hidden));
            h = run.outputs.clone();
            runs.push(run);
        }
        Ok(EncoderTrace {
            conv_in,
            conv_len,
            conv_out,
            runs,
            steps: t,
        })
    }

    fn encoder_backward(&self, tr: &EncoderTrace<R>, d_final: &[BiState<R>], g: &mut Self) {
        let mut d_out: Option<Vec<R>> = None;
        for l in (0..self.encoder.len()).rev() {
            let (dx, _) = self.encoder[l].run_backward(&tr.runs[l], d_out.as_deref(), &d_final[l], &mut g.encoder[l]);
            d_out = Some(dx);
        }
        let mut d = d_out.expect("at least one layer");
        for i in (0..self.convs.len()).rev() {
            let d_pre = tanh_backward(&d, &tr.conv_out[i]);
            d = self.convs[i].backward(&tr.conv_in[i], tr.conv_len[i], &d_pre, &mut g.convs[i]);
        }
    }

    /// Final recurrent states of every encoder layer.
    pub fn encode(&self, window: &Array<R>) -> Result<Encoding<R>> {
        self.check_input(window.data())?;
        Ok(self.encode_traced(window.data())?.encoding())
    }

    fn recon_traced(&self, enc: &Encoding<R>, steps: usize) -> ReconTrace<R> {
        let hidden = self.config.hidden_size;
        let mut h: Vec<R> = Vec::new();
        let mut runs = Vec::with_capacity(self.recon_lstm.len());
        for (l, layer) in self.recon_lstm.iter().enumerate() {
            let run = layer.run(&h, steps, &init_state(enc, l, hidden));
            h = run.outputs.clone();
            runs.push(run);
        }
        let mut y = self.recon_proj.forward(&h, steps);
        let proj_in = h;
        let n = self.deconvs.len();
        let mut deconv_in = vec![Vec::new(); n];
        let mut deconv_out = vec![Vec::new(); n];
        let mut t = steps;
        for i in (0..n).rev() {
            let mut z = self.deconvs[i].forward(&y, t);
            t = self.deconvs[i].output_len(t);
            if i > 0 {
                tanh_in_place(&mut z);
                deconv_out[i] = z.clone();
            }
            deconv_in[i] = std::mem::replace(&mut y, z);
        }
        ReconTrace {
            runs,
            proj_in,
            deconv_in,
            deconv_out,
            output: y,
        }
    }

    /// Returns the gradient w.r.t. each encoder layer's final states.
    fn recon_backward(&self, tr: &ReconTrace<R>, steps: usize, d_output: Vec<R>, g: &mut Self) -> Vec<BiState<R>> {
        let mut d = d_output;
        let mut lens = Vec::with_capacity(self.deconvs.len());
        let mut t = steps;
        for i in (0..self.deconvs.len()).rev() {
            lens.push(t);
            t = self.deconvs[i].output_len(t);
        }
        lens.reverse();
        for i in 0..self.deconvs.len() {
            let d_pre = if i > 0 { tanh_backward(&d, &tr.deconv_out[i]) } else { d };
            d = self.deconvs[i].backward(&tr.deconv_in[i], lens[i], &d_pre, &mut g.deconvs[i]);
        }
        let mut d_out = self.recon_proj.backward(&tr.proj_in, steps, &d, &mut g.recon_proj);
        let hidden = self.config.hidden_size;
        let mut d_init = vec![BiState::zeros(hidden); self.recon_lstm.len()];
        for l in (0..self.recon_lstm.len()).rev() {
            let (dx, di) = self.recon_lstm[l].run_backward(&tr.runs[l], Some(&d_out), &BiState::zeros(hidden), &mut g.recon_lstm[l]);
            d_init[l] = di;
            d_out = dx;
        }
        d_init
    }

    /// Decodes encoder states into a `window_steps × channels` reconstruction.
    pub fn reconstruct(&self, enc: &Encoding<R>) -> Array<R> {
        let steps = self.config.recurrent_steps();
        let out = self.recon_traced(enc, steps).output;
        Array::new(&[self.config.window_steps, self.config.channels], out).expect("decoder geometry")
    }

    fn symbols_traced(&self, enc: &Encoding<R>, targets: &[usize]) -> SymbolTrace<R> {
        let hidden = self.config.hidden_size;
        let steps = targets.len();
        let mut inputs = Vec::with_capacity(steps);
        inputs.push(SOS);
        inputs.extend_from_slice(&targets[..steps - 1]);
        let mut h = self.embed.lookup(&inputs);
        let mut runs = Vec::with_capacity(self.symbol_lstm.len());
        for (l, cell) in self.symbol_lstm.iter().enumerate() {
            let init = enc.layers.get(l).map_or_else(|| LstmState::zeros(hidden), |s| s.forward.clone());
            let run = cell.run(&h, steps, &init, false);
            h = run.outputs.clone();
            runs.push(run);
        }
        let logits = self.symbol_proj.forward(&h, steps);
        SymbolTrace {
            inputs,
            runs,
            proj_in: h,
            logits,
        }
    }

    /// Returns the gradient w.r.t. each encoder layer's forward final state.
    fn symbols_backward(&self, tr: &SymbolTrace<R>, d_logits: &[R], g: &mut Self) -> Vec<LstmState<R>> {
        let steps = tr.inputs.len();
        let hidden = self.config.hidden_size;
        let mut d_out = self.symbol_proj.backward(&tr.proj_in, steps, d_logits, &mut g.symbol_proj);
        let mut d_init = vec![LstmState::zeros(hidden); self.symbol_lstm.len()];
        for l in (0..self.symbol_lstm.len()).rev() {
            let (dx, di) = self.symbol_lstm[l].run_backward(&tr.runs[l], Some(&d_out), &LstmState::zeros(hidden), &mut g.symbol_lstm[l]);
            d_init[l] = di;
            d_out = dx;
        }
        self.embed.backward(&tr.inputs, &d_out, &mut g.embed);
        d_init
    }

    /// Teacher-forced logits (`(horizon+1) × vocab`) for the given targets.
    pub fn symbol_logits(&self, enc: &Encoding<R>, targets: &[usize]) -> Result<Array<R>> {
        self.check_targets(targets)?;
        let logits = self.symbols_traced(enc, targets).logits;
        Array::new(&[targets.len(), self.config.vocab_size()], logits)
    }

    /// Greedy decoding of `horizon_steps + 1` symbols, starting from SOS and
    /// feeding back each step's argmax.
    pub fn predict_symbols(&self, forward_states: &[LstmState<R>]) -> Vec<usize> {
        let hidden = self.config.hidden_size;
        let mut states: Vec<LstmState<R>> = (0..self.symbol_lstm.len())
            .map(|l| forward_states.get(l).cloned().unwrap_or_else(|| LstmState::zeros(hidden)))
            .collect();
        let mut symbol = SOS;
        let mut out = Vec::with_capacity(self.config.target_len());
        for _ in 0..self.config.target_len() {
            let mut x = self.embed.lookup(&[symbol]);
            for (cell, state) in self.symbol_lstm.iter().zip(states.iter_mut()) {
                let run = cell.run(&x, 1, state, false);
                *state = run.final_state;
                x = state.h.clone();
            }
            symbol = greedy_symbol(&self.symbol_proj.forward(&x, 1));
            out.push(symbol);
        }
        out
    }

    /// Reconstruction and greedy symbols for one window.
    pub fn infer(&self, window: &Array<R>) -> Result<(Array<R>, Vec<usize>)> {
        let enc = self.encode(window)?;
        Ok((self.reconstruct(&enc), self.predict_symbols(&enc.forward_states())))
    }

    /// Task losses for one window. With `grads`, accumulates
    /// `scale · ∂(w_A·L_A + w_B·L_B)/∂θ` into it; a head whose weight is zero
    /// contributes no gradient at all.
    pub fn task_losses(
        &self,
        x: &[R],
        targets: &[usize],
        class_weights: &[R],
        grads: Option<&mut Self>,
        scale: f64,
    ) -> Result<TaskLosses> {
        self.check_input(x)?;
        self.check_targets(targets)?;
        let enc_tr = self.encode_traced(x)?;
        let enc = enc_tr.encoding();
        let rec = self.recon_traced(&enc, enc_tr.steps);
        let (l_a, d_rec) = mse_with_grad(&rec.output, x);
        let sym = self.symbols_traced(&enc, targets);
        let (l_b, d_sym) = cross_entropy_with_grad(&sym.logits, targets, class_weights)?;
        if let Some(g) = grads {
            let w = self.config.loss_weights;
            let hidden = self.config.hidden_size;
            let mut d_final = vec![BiState::zeros(hidden); self.encoder.len()];
            let mut touched = false;
            if w.reconstruction != 0.0 {
                let k = R::narrow(w.reconstruction * scale);
                let d: Vec<R> = d_rec.iter().map(|&v| v * k).collect();
                for (acc, di) in d_final.iter_mut().zip(self.recon_backward(&rec, enc_tr.steps, d, g)) {
                    acc.forward.add_assign(&di.forward);
                    acc.backward.add_assign(&di.backward);
                }
                touched = true;
            }
            if w.symbols != 0.0 {
                let k = R::narrow(w.symbols * scale);
                let d: Vec<R> = d_sym.iter().map(|&v| v * k).collect();
                for (acc, di) in d_final.iter_mut().zip(self.symbols_backward(&sym, &d, g)) {
                    acc.forward.add_assign(&di);
                }
                touched = true;
            }
            if touched {
                self.encoder_backward(&enc_tr, &d_final, g);
            }
        }
        Ok(TaskLosses {
            reconstruction: l_a,
            symbols: l_b,
        })
    }

    pub fn regularization(&self) -> f64 {
        l2_regularization(self.params())
    }
}

/// `(L_O, L_A, L_B, L_R)` for one window with teacher-forced symbols.
pub fn multitask_loss<R: Real>(
    m: &MultiTaskModel<R>,
    window: &Array<R>,
    targets: &[usize],
    class_weights: &[f64],
) -> Result<MultiTaskLoss> {
    let cw: Vec<R> = class_weights.iter().map(|&w| R::narrow(w)).collect();
    if cw.len() != m.config.vocab_size() {
        return Err(Error::ShapeMismatch {
            op: "class weights",
            expected: vec![m.config.vocab_size()],
            found: vec![cw.len()],
        });
    }
    let t = m.task_losses(window.data(), targets, &cw, None, 1.0)?;
    let regularization = m.regularization();
    Ok(MultiTaskLoss {
        total: m.config.loss_weights.combine(t.reconstruction, t.symbols, regularization),
        reconstruction: t.reconstruction,
        symbols: t.symbols,
        regularization,
    })
}

impl<R: Real> Module<R> for MultiTaskModel<R> {
    fn params(&self) -> Vec<&Param<R>> {
        let mut v = Vec::new();
        self.convs.iter().for_each(|m| v.extend(m.params()));
        self.encoder.iter().for_each(|m| v.extend(m.params()));
        self.recon_lstm.iter().for_each(|m| v.extend(m.params()));
        v.extend(self.recon_proj.params());
        self.deconvs.iter().for_each(|m| v.extend(m.params()));
        v.extend(self.embed.params());
        self.symbol_lstm.iter().for_each(|m| v.extend(m.params()));
        v.extend(self.symbol_proj.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        let mut v = Vec::new();
        self.convs.iter_mut().for_each(|m| v.extend(m.params_mut()));
        self.encoder.iter_mut().for_each(|m| v.extend(m.params_mut()));
        self.recon_lstm.iter_mut().for_each(|m| v.extend(m.params_mut()));
        v.extend(self.recon_proj.params_mut());
        self.deconvs.iter_mut().for_each(|m| v.extend(m.params_mut()));
        v.extend(self.embed.params_mut());
        self.symbol_lstm.iter_mut().for_each(|m| v.extend(m.params_mut()));
        v.extend(self.symbol_proj.params_mut());
        v
    }
}
