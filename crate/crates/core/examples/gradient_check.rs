//! Checks analytic gradients against central finite differences, first for
//! a single dense layer and then for a tiny multi-task model in f64.

use mtad::data::EOS;
use mtad::model::{LossWeights, ModelConfig, MultiTaskModel};
use mtad::nn::{add_l2_grad, gradient_check, Dense, GradCheckConfig};
use mtad::numeric::SeededRng;

fn main() -> mtad::Result<()> {
    let mut rng = SeededRng::new(5);
    let cfg = GradCheckConfig {
        five_point: true,
        ..GradCheckConfig::default()
    };

    let layer = Dense::<f64>::new("dense", 4, 3, &mut rng);
    let x: Vec<f64> = (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let w: Vec<f64> = (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let report = gradient_check(
        &layer,
        |m, g| {
            let y = m.forward(&x, 2);
            if let Some(g) = g {
                m.backward(&x, 2, &w, g);
            }
            y.iter().zip(&w).map(|(a, b)| a * b).sum()
        },
        &cfg,
    );
    println!("dense: {} entries, max rel err {:.2e}", report.entries_checked(), report.max_rel_error());

    let config = ModelConfig {
        window_steps: 6,
        horizon_steps: 3,
        hidden_size: 6,
        embedding_dim: 4,
        loss_weights: LossWeights {
            reconstruction: 1.0,
            symbols: 0.5,
            regularization: 0.01,
        },
        ..ModelConfig::default()
    };
    let model = MultiTaskModel::<f64>::new(config, &mut rng)?;
    let x: Vec<f64> = (0..36).map(|_| rng.uniform(0.0, 1.0)).collect();
    let targets = [2, 0, 5, EOS];
    let cw = vec![1.0; 13];
    let report = gradient_check(
        &model,
        |m, g| {
            let lw = m.config.loss_weights;
            let t = match g {
                Some(g) => {
                    let t = m.task_losses(&x, &targets, &cw, Some(&mut *g), 1.0).unwrap();
                    add_l2_grad(m, g, lw.regularization);
                    t
                }
                None => m.task_losses(&x, &targets, &cw, None, 1.0).unwrap(),
            };
            lw.combine(t.reconstruction, t.symbols, m.regularization())
        },
        &GradCheckConfig {
            tolerance: 1e-3,
            max_entries: Some(30),
            ..cfg
        },
    );
    println!("multi-task: {} entries, max rel err {:.2e}, passed {}", report.entries_checked(), report.max_rel_error(), report.passed());
    Ok(())
}
