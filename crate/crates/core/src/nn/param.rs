use crate::numeric::{Array, Real, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Included in the L2 penalty.
    Weight,
    Bias,
}

/// A named learnable array and its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param<R: Real = f32> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Array<R>,
    pub grad: Array<R>,
}

impl<R: Real> Param<R> {
    pub fn new(name: impl Into<String>, kind: ParamKind, value: Array<R>) -> Self {
        let grad = Array::zeros(value.shape());
        Self {
            name: name.into(),
            kind,
            value,
            grad,
        }
    }

    pub fn zeros(name: impl Into<String>, kind: ParamKind, shape: &[usize]) -> Self {
        Self::new(name, kind, Array::zeros(shape))
    }

    /// Glorot-uniform weights: `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| R::narrow(rng.uniform(-limit, limit))).collect();
        Self::new(
            name,
            ParamKind::Weight,
            Array::new(shape, data).expect("positive extents"),
        )
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(R::zero());
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }
}

/// Anything that owns parameters. Orders must be stable: optimizers,
/// checkpoints and gradient buffers are matched by position.
pub trait Module<R: Real> {
    fn params(&self) -> Vec<&Param<R>>;
    fn params_mut(&mut self) -> Vec<&mut Param<R>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Adds another module's gradients into this one's.
    fn accumulate_grads(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (p, q) in self.params_mut().into_iter().zip(other.params()) {
            for (g, &h) in p.grad.data_mut().iter_mut().zip(q.grad.data()) {
                *g += h;
            }
        }
    }

    fn grad_norm(&self) -> f64 {
        self.params()
            .iter()
            .map(|p| p.grad.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so their global norm is at most `max_norm`.
    /// Returns the norm before clipping.
    fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = R::narrow(max_norm / norm);
            for p in self.params_mut() {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
            }
        }
        norm
    }
}
