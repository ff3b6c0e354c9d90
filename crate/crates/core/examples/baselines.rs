//! Trains the two reconstruction-only baselines: a single LSTM autoencoder
//! and one autoencoder per maneuver whose minimum loss scores a window.
//! Prints test MSE for each and which member wins on a few test windows.

use mtad::cli::{prepare_windows, RunConfig};
use mtad::data::{synth_traces, Maneuver};
use mtad::model::{ensemble_loss, train, train_ensemble, EnsembleModel, LstmAutoencoder, ModelConfig, TrainConfig};
use mtad::nn::AdamConfig;
use mtad::numeric::SeededRng;

fn main() -> mtad::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.synth.duration_s = 1500.0;
    let store = prepare_windows(&cfg, &synth_traces(&cfg.synth)?)?;
    let config = ModelConfig {
        hidden_size: 16,
        ..ModelConfig::default()
    };
    let tc = TrainConfig {
        epochs: 4,
        batch_size: 32,
        adam: AdamConfig {
            learning_rate: 0.005,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };

    let mut ae = LstmAutoencoder::<f32>::new(config.clone(), "ae", &mut SeededRng::new(1))?;
    let history = train(&mut ae, &store.train, &store.test, &[], &tc, |_| {})?;
    println!("autoencoder test MSE {:.5}", history.last().unwrap().reconstruction);

    let mut labels: Vec<Maneuver> = store.train.iter().map(|w| w.majority_label).collect();
    labels.sort_by_key(|m| m.index());
    labels.dedup();
    let mut ensemble = EnsembleModel::<f32>::new(&config, &labels, &mut SeededRng::new(1))?;
    let history = train_ensemble(&mut ensemble, &store.train, &store.test, &tc, |_| {})?;
    println!("ensemble of {} members, test min-loss MSE {:.5}", ensemble.members.len(), history.last().unwrap().reconstruction);

    println!("\n{:<8} {:<22} {:<22} {:>9}", "window", "majority label", "winning member", "min loss");
    for w in store.test.iter().step_by(store.test.len() / 8 + 1) {
        let (loss, member) = ensemble_loss(&ensemble, &w.input)?;
        println!("{:<8} {:<22} {:<22} {:>9.5}", w.id, w.majority_label.name(), member.name(), loss);
    }
    Ok(())
}
