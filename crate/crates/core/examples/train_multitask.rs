//! Trains a small multi-task model on synthetic windows and shows what each
//! head produces: a reconstruction of the input and a greedy prediction of
//! the next 3 s of maneuvers.
//!
//! ```text
//! cargo run --release --example train_multitask -- [epochs]
//! ```

use mtad::cli::{prepare_windows, RunConfig};
use mtad::data::maneuver::symbol_name;
use mtad::data::synth_traces;
use mtad::model::{symbol_class_weights, train, ModelConfig, MultiTaskModel, TrainConfig};
use mtad::nn::{mse_loss, AdamConfig};
use mtad::numeric::SeededRng;

fn main() -> mtad::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let mut cfg = RunConfig::default();
    cfg.synth.duration_s = 1500.0;
    let store = prepare_windows(&cfg, &synth_traces(&cfg.synth)?)?;
    println!("train {} windows, test {}", store.train.len(), store.test.len());

    let mut config = ModelConfig {
        hidden_size: 16,
        ..ModelConfig::default()
    };
    config.loss_weights.regularization = 0.0;
    let mut model = MultiTaskModel::<f32>::new(config.clone(), &mut SeededRng::new(7))?;
    let cw = symbol_class_weights(&store.stats, config.vocab_size(), config.class_weight_power)?;
    let tc = TrainConfig {
        epochs,
        batch_size: 32,
        adam: AdamConfig {
            learning_rate: 0.005,
            ..AdamConfig::default()
        },
        seed: 7,
        ..TrainConfig::default()
    };
    train(&mut model, &store.train, &store.test, &cw, &tc, |m| {
        println!(
            "epoch {:>2}: test L_A {:.5}  L_B {:.3}  symbol accuracy {:.3}",
            m.epoch,
            m.reconstruction,
            m.symbols.unwrap_or(f64::NAN),
            m.symbol_accuracy.unwrap_or(f64::NAN)
        );
    })?;

    let w = store.test.iter().find(|w| w.targets[0] != w.targets[14]).unwrap_or(&store.test[0]);
    let (recon, symbols) = model.infer(&w.input)?;
    println!("\nwindow {}: reconstruction MSE {:.5}", w.id, mse_loss(&recon, &w.input)?);
    let names = |s: &[usize]| s.iter().map(|&x| symbol_name(x)).collect::<Vec<_>>().join(" ");
    println!("  target:    {}", names(&w.targets));
    println!("  predicted: {}", names(&symbols));
    Ok(())
}
