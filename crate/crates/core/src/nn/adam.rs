use serde::{Deserialize, Serialize};

use crate::nn::param::Module;
use crate::numeric::{Array, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one module.
#[derive(Debug, Clone)]
pub struct AdamState<R: Real = f32> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Array<R>>,
    second: Vec<Array<R>>,
}

impl<R: Real> AdamState<R> {
    pub fn new<M: Module<R>>(config: AdamConfig, model: &M) -> Self {
        let zeros: Vec<Array<R>> = model
            .params()
            .iter()
            .map(|p| Array::zeros(p.shape()))
            .collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Array<R>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Array<R>] {
        &self.second
    }

    /// Applies one update from the gradients currently stored in `model`.
    pub fn step<M: Module<R>>(&mut self, model: &mut M) {
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for ((p, m), v) in model
            .params_mut()
            .into_iter()
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let grads = p.grad.data();
            let values = p.value.data_mut();
            for (((x, &g), mk), vk) in values
                .iter_mut()
                .zip(grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g = g.widen();
                let mn = b1 * mk.widen() + (1.0 - b1) * g;
                let vn = b2 * vk.widen() + (1.0 - b2) * g * g;
                *mk = R::narrow(mn);
                *vk = R::narrow(vn);
                let update = lr * (mn / c1) / ((vn / c2).sqrt() + eps);
                *x = R::narrow(x.widen() - update);
            }
        }
    }
}

/// Single-step convenience wrapper.
pub fn adam_step<R: Real, M: Module<R>>(state: &mut AdamState<R>, model: &mut M) {
    state.step(model);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::param::{Param, ParamKind};

    #[derive(Clone)]
    struct Point(Param<f64>);

    impl Module<f64> for Point {
        fn params(&self) -> Vec<&Param<f64>> {
            vec![&self.0]
        }
        fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
            vec![&mut self.0]
        }
    }

    fn point(v: Vec<f64>) -> Point {
        Point(Param::new("p", ParamKind::Weight, Array::from_vec(v).unwrap()))
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut m = point(vec![1.0, -2.0]);
        let mut st = AdamState::new(AdamConfig::default(), &m);
        m.0.grad.data_mut().copy_from_slice(&[1.0, 1.0]);
        st.step(&mut m);
        let after_one = m.0.value.clone();
        let m1 = st.first_moments()[0].data()[0];
        m.0.grad.fill(0.0);
        st.step(&mut m);
        assert!((st.first_moments()[0].data()[0] - 0.9 * m1).abs() < 1e-15);
        // The first moment still carries momentum, so values keep moving;
        // with fresh state a zero gradient changes nothing.
        let mut fresh = point(vec![1.0, -2.0]);
        let mut st2 = AdamState::new(AdamConfig::default(), &fresh);
        st2.step(&mut fresh);
        assert_eq!(fresh.0.value.data(), &[1.0, -2.0]);
        assert_eq!(st2.step_count(), 1);
        assert_ne!(after_one.data(), m.0.value.data());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [0.5, 3.0, -7.0] {
            let mut m = point(vec![0.0]);
            let mut st = AdamState::new(AdamConfig::default(), &m);
            m.0.grad.data_mut()[0] = g;
            adam_step(&mut st, &mut m);
            // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε).
            let expect = -0.01 * g / (g.abs() + 1e-8);
            assert!((m.0.value.data()[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn converges_on_quadratic_bowl() {
        let target = [1.5, -0.5, 3.0];
        let mut m = point(vec![0.0; 3]);
        let mut st = AdamState::new(AdamConfig::default(), &m);
        for _ in 0..2000 {
            for i in 0..3 {
                let x = m.0.value.data()[i];
                m.0.grad.data_mut()[i] = 2.0 * (x - target[i]);
            }
            st.step(&mut m);
        }
        for i in 0..3 {
            assert!((m.0.value.data()[i] - target[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn deterministic_given_same_inputs() {
        let run = || {
            let mut m = point(vec![0.3, 0.1]);
            let mut st = AdamState::new(AdamConfig::default(), &m);
            for k in 0..10 {
                m.0.grad.data_mut().copy_from_slice(&[k as f64 * 0.1, -0.2]);
                st.step(&mut m);
            }
            m.0.value.data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
