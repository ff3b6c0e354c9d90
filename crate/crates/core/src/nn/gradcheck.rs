//! Central finite-difference verification of analytic gradients.

use crate::nn::param::Module;
use crate::numeric::{Real, SeededRng};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Perturbation half-width.
    pub step: f64,
    pub tolerance: f64,
    /// Relative error is `|a − n| / max(|a|, |n|, floor)`.
    pub floor: f64,
    /// Check at most this many randomly chosen entries per parameter.
    pub max_entries: Option<usize>,
    pub seed: u64,
    /// Use the fourth-order stencil `(8(f₊₁ − f₋₁) − (f₊₂ − f₋₂)) / 12h`
    /// instead of `(f₊₁ − f₋₁) / 2h`.
    pub five_point: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tolerance: 1e-4,
            floor: 1e-8,
            max_entries: None,
            seed: 0,
            five_point: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Analytic and numeric values at the worst entry.
    pub worst: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| !(p.max_rel_error < self.tolerance))
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failing().is_empty()
    }

    pub fn entries_checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the gradients produced by `loss_and_grad(model, Some(grads))`
/// against central differences of `loss_and_grad(model, None)`.
///
/// `loss_and_grad` must accumulate into the gradient slots of its second
/// argument, which arrives zeroed.
pub fn gradient_check<R, M, F>(model: &M, loss_and_grad: F, cfg: &GradCheckConfig) -> GradCheckReport
where
    R: Real,
    M: Module<R> + Clone,
    F: Fn(&M, Option<&mut M>) -> f64,
{
    let mut grads = model.clone();
    grads.zero_grad();
    loss_and_grad(model, Some(&mut grads));
    let analytic: Vec<Vec<f64>> = grads
        .params()
        .iter()
        .map(|p| p.grad.data().iter().map(|g| g.widen()).collect())
        .collect();

    let mut rng = SeededRng::new(cfg.seed);
    let mut work = model.clone();
    let n_params = work.params().len();
    let mut report = Vec::with_capacity(n_params);
    for pi in 0..n_params {
        let (name, len) = {
            let p = &work.params()[pi];
            (p.name.clone(), p.value.len())
        };
        let entries: Vec<usize> = match cfg.max_entries {
            Some(k) if k < len => (0..k).map(|_| rng.below(len)).collect(),
            _ => (0..len).collect(),
        };
        let mut check = ParamCheck {
            name,
            checked: entries.len(),
            max_rel_error: 0.0,
            worst: (0.0, 0.0),
        };
        for &j in &entries {
            let orig = work.params()[pi].value.data()[j];
            let mut eval_at = |offset: f64| -> (f64, f64) {
                let v = R::narrow(orig.widen() + offset);
                work.params_mut()[pi].value.data_mut()[j] = v;
                let loss = loss_and_grad(&work, None);
                (loss, v.widen())
            };
            let (lp, xp) = eval_at(cfg.step);
            let (lm, xm) = eval_at(-cfg.step);
            let numeric = if cfg.five_point {
                let (lp2, xp2) = eval_at(2.0 * cfg.step);
                let (lm2, xm2) = eval_at(-2.0 * cfg.step);
                // Exact for quartics when the perturbations are symmetric.
                let h = (xp - xm + (xp2 - xm2) / 2.0) / 4.0;
                (8.0 * (lp - lm) - (lp2 - lm2)) / (12.0 * h)
            } else {
                (lp - lm) / (xp - xm)
            };
            work.params_mut()[pi].value.data_mut()[j] = orig;
            let a = analytic[pi][j];
            let err = relative_error(a, numeric, cfg.floor);
            if err > check.max_rel_error || err.is_nan() {
                check.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                check.worst = (a, numeric);
            }
        }
        report.push(check);
    }
    GradCheckReport {
        params: report,
        tolerance: cfg.tolerance,
    }
}
