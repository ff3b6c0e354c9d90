use crate::nn::param::{Module, Param, ParamKind};
use crate::numeric::{dot, Real, SeededRng};

/// Affine map applied independently to every step of a `T × in` sequence.
#[derive(Debug, Clone)]
pub struct Dense<R: Real = f32> {
    pub in_size: usize,
    pub out_size: usize,
    pub weight: Param<R>,
    pub bias: Param<R>,
}

impl<R: Real> Dense<R> {
    pub fn new(name: &str, in_size: usize, out_size: usize, rng: &mut SeededRng) -> Self {
        Self {
            in_size,
            out_size,
            weight: Param::glorot(
                format!("{name}.weight"),
                &[out_size, in_size],
                in_size,
                out_size,
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), ParamKind::Bias, &[out_size]),
        }
    }

    pub fn forward(&self, x: &[R], steps: usize) -> Vec<R> {
        debug_assert_eq!(x.len(), steps * self.in_size);
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let mut y = vec![R::zero(); steps * self.out_size];
        for t in 0..steps {
            let xt = &x[t * self.in_size..(t + 1) * self.in_size];
            for o in 0..self.out_size {
                let row = &w[o * self.in_size..(o + 1) * self.in_size];
                y[t * self.out_size + o] = R::narrow(b[o].widen() + dot(row, xt));
            }
        }
        y
    }

    /// Accumulates parameter gradients into `g` and returns `dL/dx`.
    pub fn backward(&self, x: &[R], steps: usize, dy: &[R], g: &mut Self) -> Vec<R> {
        let (n_in, n_out) = (self.in_size, self.out_size);
        let w = self.weight.value.data();
        let gw = g.weight.grad.data_mut();
        let mut dx = vec![R::zero(); steps * n_in];
        for t in 0..steps {
            let xt = &x[t * n_in..(t + 1) * n_in];
            let dyt = &dy[t * n_out..(t + 1) * n_out];
            let dxt = &mut dx[t * n_in..(t + 1) * n_in];
            for (o, &d) in dyt.iter().enumerate() {
                if d == R::zero() {
                    continue;
                }
                let row = &w[o * n_in..(o + 1) * n_in];
                let grow = &mut gw[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += d * xt[i];
                    dxt[i] += d * row[i];
                }
            }
        }
        let gb = g.bias.grad.data_mut();
        for t in 0..steps {
            for o in 0..n_out {
                gb[o] += dy[t * n_out + o];
            }
        }
        dx
    }
}

impl<R: Real> Module<R> for Dense<R> {
    fn params(&self) -> Vec<&Param<R>> {
        vec![&self.weight, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Symbol embedding table (`vocab × dim`).
#[derive(Debug, Clone)]
pub struct Embedding<R: Real = f32> {
    pub vocab: usize,
    pub dim: usize,
    pub table: Param<R>,
}

impl<R: Real> Embedding<R> {
    pub fn new(name: &str, vocab: usize, dim: usize, rng: &mut SeededRng) -> Self {
        Self {
            vocab,
            dim,
            table: Param::glorot(format!("{name}.table"), &[vocab, dim], vocab, dim, rng),
        }
    }

    pub fn lookup(&self, symbols: &[usize]) -> Vec<R> {
        let t = self.table.value.data();
        let mut out = Vec::with_capacity(symbols.len() * self.dim);
        for &s in symbols {
            out.extend_from_slice(&t[s * self.dim..(s + 1) * self.dim]);
        }
        out
    }

    pub fn backward(&self, symbols: &[usize], dout: &[R], g: &mut Self) {
        let gt = g.table.grad.data_mut();
        for (k, &s) in symbols.iter().enumerate() {
            for j in 0..self.dim {
                gt[s * self.dim + j] += dout[k * self.dim + j];
            }
        }
    }
}

impl<R: Real> Module<R> for Embedding<R> {
    fn params(&self) -> Vec<&Param<R>> {
        vec![&self.table]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<R>> {
        vec![&mut self.table]
    }
}
