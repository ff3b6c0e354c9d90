//! Finite-difference gradient cases shared by the gradient tests and the
//! acceptance run. Each case builds a fresh layer or model from a seed and
//! returns the check report.

use mtad::data::maneuver::EOS;
use mtad::model::{LossWeights, LstmAutoencoder, ModelConfig, MultiTaskModel};
use mtad::nn::gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
use mtad::nn::{
    add_l2_grad, cross_entropy_with_grad, l2_regularization, mse_with_grad, BiLstm, BiState, Conv1d,
    ConvTranspose1d, Dense, Embedding, LstmCell, LstmState, Module,
};
use mtad::numeric::SeededRng;

pub const SEEDS: u64 = 20;
pub const LAYER_TOL: f64 = 1e-4;
pub const MODEL_TOL: f64 = 1e-3;

pub type Case = (&'static str, f64, fn(u64, f64) -> GradCheckReport);

/// Every case with its tolerance.
pub const CASES: [Case; 9] = [
    ("dense", LAYER_TOL, dense),
    ("conv1d", LAYER_TOL, conv1d),
    ("conv1d_transpose", LAYER_TOL, conv1d_transpose),
    ("lstm_cell", LAYER_TOL, lstm_cell),
    ("bilstm", LAYER_TOL, bilstm),
    ("embedding", LAYER_TOL, embedding),
    ("losses", LAYER_TOL, losses),
    ("multitask", MODEL_TOL, multitask),
    ("autoencoder", MODEL_TOL, autoencoder),
];

fn cfg(seed: u64, tolerance: f64) -> GradCheckConfig {
    GradCheckConfig {
        step: 1e-3,
        five_point: true,
        tolerance,
        max_entries: Some(40),
        seed,
        ..GradCheckConfig::default()
    }
}

fn random(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

/// Projects an output onto fixed random weights so the scalar loss touches
/// every output element.
fn project(out: &[f64], w: &[f64]) -> f64 {
    out.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Failure description, or `None` when the report passed.
pub fn failure(what: &str, seed: u64, report: &GradCheckReport) -> Option<String> {
    (!report.passed()).then(|| {
        format!(
            "{what} seed {seed}: max rel err {:e}, failing {:?}",
            report.max_rel_error(),
            report
                .params
                .iter()
                .filter(|p| p.max_rel_error > report.tolerance)
                .map(|p| (&p.name, p.worst))
                .collect::<Vec<_>>()
        )
    })
}

pub fn dense(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(seed);
    let layer = Dense::<f64>::new("d", 4, 3, &mut rng);
    let x = random(&mut rng, 2 * 4);
    let w = random(&mut rng, 2 * 3);
    gradient_check(
        &layer,
        |m, g| {
            let y = m.forward(&x, 2);
            if let Some(g) = g {
                m.backward(&x, 2, &w, g);
            }
            project(&y, &w)
        },
        &cfg(seed, tol),
    )
}

pub fn conv1d(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(seed);
    let stride = 1 + (seed % 2) as usize;
    let conv = Conv1d::<f64>::new("c", 3, 4, 3, stride, &mut rng);
    let t = 9;
    let t_out = conv.output_len(t).unwrap();
    let x = random(&mut rng, t * 3);
    let w = random(&mut rng, t_out * 4);
    gradient_check(
        &conv,
        |m, g| {
            let y = m.forward(&x, t).unwrap();
            if let Some(g) = g {
                m.backward(&x, t, &w, g);
            }
            project(&y, &w)
        },
        &cfg(seed, tol),
    )
}

pub fn conv1d_transpose(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(seed);
    let stride = 1 + (seed % 2) as usize;
    let deconv = ConvTranspose1d::<f64>::new("ct", 4, 3, 3, stride, &mut rng);
    let t_in = 4;
    let y_in = random(&mut rng, t_in * 4);
    let t_out = deconv.output_len(t_in);
    let w = random(&mut rng, t_out * 3);
    gradient_check(
        &deconv,
        |m, g| {
            let z = m.forward(&y_in, t_in);
            if let Some(g) = g {
                m.backward(&y_in, t_in, &w, g);
            }
            project(&z, &w)
        },
        &cfg(seed, tol),
    )
}

pub fn lstm_cell(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(seed);
    let cell = LstmCell::<f64>::new("l", 3, 4, &mut rng);
    let x = random(&mut rng, 3 * 3);
    let init = LstmState {
        h: random(&mut rng, 4),
        c: random(&mut rng, 4),
    };
    let w = random(&mut rng, 3 * 4 + 4);
    gradient_check(
        &cell,
        |m, g| {
            let run = m.run(&x, 3, &init, false);
            let loss = project(&run.outputs, &w) + project(&run.final_state.c, &w[12..]);
            if let Some(g) = g {
                let d_final = LstmState {
                    h: vec![0.0; 4],
                    c: w[12..16].to_vec(),
                };
                m.run_backward(&run, Some(&w[..12]), &d_final, g);
            }
            loss
        },
        &cfg(seed, tol),
    )
}

pub fn bilstm(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(seed);
    let bi = BiLstm::<f64>::new("b", 2, 3, &mut rng);
    let x = random(&mut rng, 4 * 2);
    let w = random(&mut rng, 4 * 6 + 3);
    gradient_check(
        &bi,
        |m, g| {
            let run = m.run(&x, 4, &BiState::zeros(3));
            let fin = run.final_states();
            let loss = project(&run.outputs, &w) + project(&fin.backward.h, &w[24..]);
            if let Some(g) = g {
                let mut d_final = BiState::zeros(3);
                d_final.backward.h = w[24..27].to_vec();
                m.run_backward(&run, Some(&w[..24]), &d_final, g);
            }
            loss
        },
        &cfg(seed, tol),
    )
}

pub fn embedding(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(seed);
    let emb = Embedding::<f64>::new("e", 5, 3, &mut rng);
    let symbols = [1usize, 4, 1, 0];
    let w = random(&mut rng, 12);
    gradient_check(
        &emb,
        |m, g| {
            let y = m.lookup(&symbols);
            if let Some(g) = g {
                m.backward(&symbols, &w, g);
            }
            project(&y, &w)
        },
        &cfg(seed, tol),
    )
}

/// MSE, weighted cross-entropy and L2 through a dense layer.
pub fn losses(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(seed);
    let dense = Dense::<f64>::new("d", 3, 5, &mut rng);
    let x = random(&mut rng, 4 * 3);
    let target = random(&mut rng, 4 * 5);
    let classes = [0usize, 3, 4, 2];
    let weights: Vec<f64> = (0..5).map(|_| rng.uniform(0.5, 3.0)).collect();
    gradient_check(
        &dense,
        |m, g| {
            let y = m.forward(&x, 4);
            let (mse, d_mse) = mse_with_grad(&y, &target);
            let (ce, d_ce) = cross_entropy_with_grad(&y, &classes, &weights).unwrap();
            let l2 = l2_regularization(m.params());
            if let Some(g) = g {
                let d: Vec<f64> = d_mse.iter().zip(&d_ce).map(|(a, b)| a + 0.7 * b).collect();
                m.backward(&x, 4, &d, g);
                add_l2_grad(m, g, 0.3);
            }
            mse + 0.7 * ce + 0.3 * l2
        },
        &cfg(seed, tol),
    )
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        window_steps: 6,
        horizon_steps: 3,
        hidden_size: 8,
        embedding_dim: 4,
        loss_weights: LossWeights {
            reconstruction: 1.0,
            symbols: 0.5,
            regularization: 0.01,
        },
        ..ModelConfig::default()
    }
}

pub fn multitask(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(1000 + seed);
    let model = MultiTaskModel::<f64>::new(tiny_config(), &mut rng).unwrap();
    let x: Vec<f64> = (0..36).map(|_| rng.uniform(0.0, 1.0)).collect();
    let targets = [rng.below(11), rng.below(11), rng.below(11), EOS];
    let cw: Vec<f64> = (0..13).map(|_| rng.uniform(0.5, 4.0)).collect();
    gradient_check(
        &model,
        |m, g| {
            let w = m.config.loss_weights;
            let t = match g {
                Some(g) => {
                    let t = m.task_losses(&x, &targets, &cw, Some(g), 1.0).unwrap();
                    add_l2_grad(m, g, w.regularization);
                    t
                }
                None => m.task_losses(&x, &targets, &cw, None, 1.0).unwrap(),
            };
            w.combine(t.reconstruction, t.symbols, m.regularization())
        },
        &cfg(seed, tol),
    )
}

pub fn autoencoder(seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = SeededRng::new(2000 + seed);
    let ae = LstmAutoencoder::<f64>::new(tiny_config(), "ae", &mut rng).unwrap();
    let x: Vec<f64> = (0..36).map(|_| rng.uniform(0.0, 1.0)).collect();
    gradient_check(&ae, |m, g| m.loss(&x, g, 1.0).unwrap(), &cfg(seed, tol))
}
