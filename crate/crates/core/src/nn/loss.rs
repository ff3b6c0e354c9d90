use crate::error::{Error, Result};
use crate::nn::param::{Module, Param, ParamKind};
use crate::numeric::ops::{log_softmax_at, softmax_into};
use crate::numeric::{Array, Real};

/// Mean of squared differences over all elements.
pub fn mse_loss<R: Real>(pred: &Array<R>, target: &Array<R>) -> Result<f64> {
    pred.check_same_shape(target, "mse_loss")?;
    Ok(mse_with_grad(pred.data(), target.data()).0)
}

/// MSE and its gradient w.r.t. `pred`.
pub fn mse_with_grad<R: Real>(pred: &[R], target: &[R]) -> (f64, Vec<R>) {
    let n = pred.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let d = p.widen() - t.widen();
        total += d * d;
        grad.push(R::narrow(2.0 * d / n));
    }
    (total / n, grad)
}

/// `(1/T)·Σ_t w[s_t]·(−log softmax(logits_t)[s_t])` for `T × V` logits.
pub fn weighted_cross_entropy<R: Real>(
    logits: &Array<R>,
    targets: &[usize],
    weights: &Array<R>,
) -> Result<f64> {
    let vocab = weights.len();
    if logits.shape() != [targets.len(), vocab] {
        return Err(Error::ShapeMismatch {
            op: "weighted_cross_entropy",
            expected: vec![targets.len(), vocab],
            found: logits.shape().to_vec(),
        });
    }
    Ok(cross_entropy_with_grad(logits.data(), targets, weights.data())?.0)
}

/// Weighted cross-entropy and its gradient w.r.t. the logits.
pub fn cross_entropy_with_grad<R: Real>(
    logits: &[R],
    targets: &[usize],
    weights: &[R],
) -> Result<(f64, Vec<R>)> {
    let vocab = weights.len();
    let steps = targets.len();
    let mut grad = vec![R::zero(); logits.len()];
    let mut total = 0.0;
    for (t, &s) in targets.iter().enumerate() {
        if s >= vocab {
            return Err(Error::SymbolOutOfVocab { symbol: s, vocab });
        }
        let row = &logits[t * vocab..(t + 1) * vocab];
        let w = weights[s];
        total += -w.widen() * log_softmax_at(row, s);
        let g = &mut grad[t * vocab..(t + 1) * vocab];
        softmax_into(row, g);
        g[s] -= R::one();
        let scale = R::narrow(w.widen() / steps as f64);
        g.iter_mut().for_each(|v| *v *= scale);
    }
    Ok((total / steps as f64, grad))
}

/// Inverse-frequency class weights `w_s = f_s^(−k)`.
pub fn class_weights(freqs: &[f64], k: f64) -> Result<Vec<f64>> {
    freqs
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            if f <= 0.0 {
                Err(Error::ZeroFrequency { index: i })
            } else if f > 1.0 || !f.is_finite() {
                Err(Error::data(format!("frequency {f} of class {i} outside (0, 1]")))
            } else {
                Ok(f.powf(-k))
            }
        })
        .collect()
}

/// Sum of squared weight entries; biases excluded.
pub fn l2_regularization<'a, R: Real + 'a>(params: impl IntoIterator<Item = &'a Param<R>>) -> f64 {
    params
        .into_iter()
        .filter(|p| p.kind == ParamKind::Weight)
        .map(|p| p.value.sum_squares())
        .sum()
}

/// Adds `scale · ∂(Σ w²)/∂w = 2·scale·w` to every weight gradient of `grads`,
/// reading values from `model`.
pub fn add_l2_grad<R: Real, M: Module<R>>(model: &M, grads: &mut M, scale: f64) {
    for (p, g) in model.params().into_iter().zip(grads.params_mut()) {
        if p.kind != ParamKind::Weight {
            continue;
        }
        for (gv, &v) in g.grad.data_mut().iter_mut().zip(p.value.data()) {
            *gv += R::narrow(2.0 * scale * v.widen());
        }
    }
}
