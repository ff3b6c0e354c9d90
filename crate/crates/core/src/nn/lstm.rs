//! LSTM cells (input, forget, candidate and output gates; no peepholes) and
//! bidirectional layers built from them.
//!
//! Gate pre-activations are stacked `[i; f; g; o]`, each of length `hidden`,
//! computed from the concatenation `[x; h_prev]`:
//!
//! ```text
//! c = σ(f) ⊙ c_prev + σ(i) ⊙ tanh(g)
//! h = σ(o) ⊙ tanh(c)
//! ```
//!
//! An input size of zero is allowed and models a recurrence driven only by
//! its state (decoders fed zero input).

use crate::error::{Error, Result};
use crate::nn::param::{Module, Param, ParamKind};
use crate::numeric::{dot, sigmoid, Array, Real, SeededRng};

#[derive(Debug, Clone)]
pub struct LstmCell<R: Real = f32> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub weight: Param<R>,
    pub bias: Param<R>,
}

/// Hidden and cell state of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<R: Real = f32> {
    pub h: Vec<R>,
    pub c: Vec<R>,
}

impl<R: Real> LstmState<R> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![R::zero(); hidden],
            c: vec![R::zero(); hidden],
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, &b) in self.h.iter_mut().zip(&other.h) {
            *a += b;
        }
        for (a, &b) in self.c.iter_mut().zip(&other.c) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone)]
struct StepCache<R: Real> {
    z: Vec<R>,
    /// Activated gates `[σ(i); σ(f); tanh(g); σ(o)]`.
    gates: Vec<R>,
    c_prev: Vec<R>,
    tanh_c: Vec<R>,
}

/// Forward pass record over a sequence, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmRun<R: Real = f32> {
    steps: Vec<StepCache<R>>,
    /// Per-step hidden outputs, `T × hidden`, in original time order.
    pub outputs: Vec<R>,
    pub final_state: LstmState<R>,
    reverse: bool,
}

impl<R: Real> LstmCell<R> {
    pub fn new(name: &str, input_size: usize, hidden_size: usize, rng: &mut SeededRng) -> Self {
        let cols = input_size + hidden_size;
        let weight = Param::glorot(
            format!("{name}.weight"),
            &[4 * hidden_size, cols],
            cols,
            4 * hidden_size,
            rng,
        );
        let mut bias = Param::zeros(format!("{name}.bias"), ParamKind::Bias, &[4 * hidden_size]);
        bias.value.data_mut()[hidden_size..2 * hidden_size].fill(R::one());
        Self {
            input_size,
            hidden_size,
            weight,
            bias,
        }
    }

    fn step_cached(&self, x: &[R], prev: &LstmState<R>) -> (LstmState<R>, StepCache<R>) {
        let (n_in, h) = (self.input_size, self.hidden_size);
        let cols = n_in + h;
        let mut z = Vec::with_capacity(cols);
        z.extend_from_slice(x);
        z.extend_from_slice(&prev.h);
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let mut gates = vec![R::zero(); 4 * h];
        for (r, gate) in gates.iter_mut().enumerate() {
            let a = R::narrow(b[r].widen() + dot(&w[r * cols..(r + 1) * cols], &z));
            *gate = if (2 * h..3 * h).contains(&r) {
                a.tanh()
            } else {
                sigmoid(a)
            };
        }
        let mut next = LstmState::zeros(h);
        let mut tanh_c = vec![R::zero(); h];
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let c = f * prev.c[k] + i * g;
            next.c[k] = c;
            tanh_c[k] = c.tanh();
            next.h[k] = o * tanh_c[k];
        }
        let cache = StepCache {
            z,
            gates,
            c_prev: prev.c.clone(),
            tanh_c,
        };
        (next, cache)
    }

    /// Backpropagates one step. `dh`, `dc` are gradients w.r.t. this step's
    /// outputs; returns gradients w.r.t. `(x, h_prev, c_prev)`.
    fn step_backward(
        &self,
        cache: &StepCache<R>,
        dh: &[R],
        dc: &[R],
        g: &mut Self,
    ) -> (Vec<R>, Vec<R>, Vec<R>) {
        let (n_in, h) = (self.input_size, self.hidden_size);
        let cols = n_in + h;
        let one = R::one();
        let gates = &cache.gates;
        let mut da = vec![R::zero(); 4 * h];
        let mut dc_prev = vec![R::zero(); h];
        for k in 0..h {
            let (i, f, gg, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_c[k];
            let dct = dc[k] + dh[k] * o * (one - tc * tc);
            da[k] = dct * gg * i * (one - i);
            da[h + k] = dct * cache.c_prev[k] * f * (one - f);
            da[2 * h + k] = dct * i * (one - gg * gg);
            da[3 * h + k] = dh[k] * tc * o * (one - o);
            dc_prev[k] = dct * f;
        }
        let w = self.weight.value.data();
        let gw = g.weight.grad.data_mut();
        let gb = g.bias.grad.data_mut();
        let mut dz = vec![R::zero(); cols];
        for (r, &d) in da.iter().enumerate() {
            gb[r] += d;
            if d == R::zero() {
                continue;
            }
            let row = &w[r * cols..(r + 1) * cols];
            let grow = &mut gw[r * cols..(r + 1) * cols];
            for j in 0..cols {
                grow[j] += d * cache.z[j];
                dz[j] += d * row[j];
            }
        }
        let dh_prev = dz.split_off(n_in);
        (dz, dh_prev, dc_prev)
    }

    /// Runs the cell over `steps` inputs (`xs` is `steps × input_size`),
    /// optionally in reverse time order.
    pub fn run(&self, xs: &[R], steps: usize, init: &LstmState<R>, reverse: bool) -> LstmRun<R> {
        debug_assert_eq!(xs.len(), steps * self.input_size);
        let (n_in, h) = (self.input_size, self.hidden_size);
        let mut outputs = vec![R::zero(); steps * h];
        let mut caches = Vec::with_capacity(steps);
        let mut state = init.clone();
        for k in 0..steps {
            let t = if reverse { steps - 1 - k } else { k };
            let (next, cache) = self.step_cached(&xs[t * n_in..(t + 1) * n_in], &state);
            outputs[t * h..(t + 1) * h].copy_from_slice(&next.h);
            caches.push(cache);
            state = next;
        }
        LstmRun {
            steps: caches,
            outputs,
            final_state: state,
            reverse,
        }
    }

    /// Backpropagates through a run. `d_outputs` is `T × hidden` in time
    /// order; `d_final` is the gradient w.r.t. the final state. Returns
    /// `(d_xs, d_init)`.
    pub fn run_backward(
        &self,
        run: &LstmRun<R>,
        d_outputs: Option<&[R]>,
        d_final: &LstmState<R>,
        g: &mut Self,
    ) -> (Vec<R>, LstmState<R>) {
        let (n_in, h) = (self.input_size, self.hidden_size);
        let steps = run.steps.len();
        let mut dxs = vec![R::zero(); steps * n_in];
        let mut dh = d_final.h.clone();
        let mut dc = d_final.c.clone();
        for k in (0..steps).rev() {
            let t = if run.reverse { steps - 1 - k } else { k };
            if let Some(dout) = d_outputs {
                for (a, &b) in dh.iter_mut().zip(&dout[t * h..(t + 1) * h]) {
                    *a += b;
                }
            }
            let (dx, dh_prev, dc_prev) = self.step_backward(&run.steps[k], &dh, &dc, g);
            dxs[t * n_in..(t + 1) * n_in].copy_from_slice(&dx);
            dh = dh_prev;
            dc = dc_prev;
        }
        (dxs, LstmState { h: dh, c: dc })
    }
}

impl<R: Real> Module<R> for LstmCell<R> {
    fn params(&self) -> Vec<&Param<R>> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Final states of both directions of a bidirectional layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BiState<R: Real = f32> {
    pub forward: LstmState<R>,
    pub backward: LstmState<R>,
}

impl<R: Real> BiState<R> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            forward: LstmState::zeros(hidden),
            backward: LstmState::zeros(hidden),
        }
    }
}

/// A forward and a time-reversed LSTM over the same sequence; per-step
/// outputs are concatenated `[h_fwd(t); h_bwd(t)]`.
#[derive(Debug, Clone)]
pub struct BiLstm<R: Real = f32> {
    pub forward: LstmCell<R>,
    pub backward: LstmCell<R>,
}

#[derive(Debug, Clone)]
pub struct BiRun<R: Real = f32> {
    fwd: LstmRun<R>,
    bwd: LstmRun<R>,
    /// `T × 2·hidden`.
    pub outputs: Vec<R>,
}

impl<R: Real> BiRun<R> {
    pub fn final_states(&self) -> BiState<R> {
        BiState {
            forward: self.fwd.final_state.clone(),
            backward: self.bwd.final_state.clone(),
        }
    }
}

impl<R: Real> BiLstm<R> {
    pub fn new(name: &str, input_size: usize, hidden_size: usize, rng: &mut SeededRng) -> Self {
        Self {
            forward: LstmCell::new(&format!("{name}.fwd"), input_size, hidden_size, rng),
            backward: LstmCell::new(&format!("{name}.bwd"), input_size, hidden_size, rng),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size
    }

    pub fn run(&self, xs: &[R], steps: usize, init: &BiState<R>) -> BiRun<R> {
        let h = self.hidden_size();
        let fwd = self.forward.run(xs, steps, &init.forward, false);
        let bwd = self.backward.run(xs, steps, &init.backward, true);
        let mut outputs = Vec::with_capacity(steps * 2 * h);
        for t in 0..steps {
            outputs.extend_from_slice(&fwd.outputs[t * h..(t + 1) * h]);
            outputs.extend_from_slice(&bwd.outputs[t * h..(t + 1) * h]);
        }
        BiRun { fwd, bwd, outputs }
    }

    pub fn run_backward(
        &self,
        run: &BiRun<R>,
        d_outputs: Option<&[R]>,
        d_final: &BiState<R>,
        g: &mut Self,
    ) -> (Vec<R>, BiState<R>) {
        let h = self.hidden_size();
        let steps = run.fwd.steps.len();
        let (d_fwd, d_bwd) = match d_outputs {
            Some(d) => {
                let mut a = Vec::with_capacity(steps * h);
                let mut b = Vec::with_capacity(steps * h);
                for t in 0..steps {
                    a.extend_from_slice(&d[t * 2 * h..t * 2 * h + h]);
                    b.extend_from_slice(&d[t * 2 * h + h..(t + 1) * 2 * h]);
                }
                (Some(a), Some(b))
            }
            None => (None, None),
        };
        let (mut dx, d_init_f) =
            self.forward
                .run_backward(&run.fwd, d_fwd.as_deref(), &d_final.forward, &mut g.forward);
        let (dx_b, d_init_b) =
            self.backward
                .run_backward(&run.bwd, d_bwd.as_deref(), &d_final.backward, &mut g.backward);
        for (a, b) in dx.iter_mut().zip(dx_b) {
            *a += b;
        }
        (
            dx,
            BiState {
                forward: d_init_f,
                backward: d_init_b,
            },
        )
    }
}

impl<R: Real> Module<R> for BiLstm<R> {
    fn params(&self) -> Vec<&Param<R>> {
        let mut v = self.forward.params();
        v.extend(self.backward.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        let mut v = self.forward.params_mut();
        v.extend(self.backward.params_mut());
        v
    }
}

fn check_len(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch {
            op,
            expected: vec![expected],
            found: vec![found],
        });
    }
    Ok(())
}

/// One LSTM step on arrays.
pub fn lstm_cell_step<R: Real>(
    p: &LstmCell<R>,
    x: &Array<R>,
    h_prev: &Array<R>,
    c_prev: &Array<R>,
) -> Result<(Array<R>, Array<R>)> {
    check_len("lstm_cell_step", p.input_size, x.len())?;
    check_len("lstm_cell_step", p.hidden_size, h_prev.len())?;
    check_len("lstm_cell_step", p.hidden_size, c_prev.len())?;
    let prev = LstmState {
        h: h_prev.data().to_vec(),
        c: c_prev.data().to_vec(),
    };
    let (next, _) = p.step_cached(x.data(), &prev);
    let h = Array::from_vec(next.h)?;
    let c = Array::from_vec(next.c)?;
    h.ensure_finite("lstm_cell_step")?;
    c.ensure_finite("lstm_cell_step")?;
    Ok((h, c))
}

/// Bidirectional layer over a `T × d` sequence from zero initial states.
/// Returns the `T × 2h` outputs and both directions' final states.
pub fn bilstm_layer<R: Real>(
    forward: &LstmCell<R>,
    backward: &LstmCell<R>,
    seq: &Array<R>,
) -> Result<(Array<R>, BiState<R>)> {
    if seq.shape().len() != 2
        || seq.cols() != forward.input_size
        || backward.input_size != forward.input_size
        || backward.hidden_size != forward.hidden_size
    {
        return Err(Error::ShapeMismatch {
            op: "bilstm_layer",
            expected: vec![seq.rows(), forward.input_size],
            found: seq.shape().to_vec(),
        });
    }
    let layer = BiLstm {
        forward: forward.clone(),
        backward: backward.clone(),
    };
    let run = layer.run(seq.data(), seq.rows(), &BiState::zeros(forward.hidden_size));
    let out = Array::new(&[seq.rows(), 2 * forward.hidden_size], run.outputs.clone())?;
    out.ensure_finite("bilstm_layer")?;
    Ok((out, run.final_states()))
}
