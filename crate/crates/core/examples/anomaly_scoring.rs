//! Fits Gaussian error models on training reconstruction errors, scores the
//! test split by Mahalanobis distance, divides by the negative
//! log-likelihood of the predicted maneuvers, and compares how many
//! injected anomalies and held-out U-turns each score puts at the top.

use mtad::cli::{prepare_windows, RunConfig};
use mtad::data::{synth_traces, Maneuver};
use mtad::model::{symbol_class_weights, train, ModelConfig, MultiTaskModel, TrainConfig};
use mtad::nn::AdamConfig;
use mtad::numeric::SeededRng;
use mtad::scoring::{
    anomaly_targets, detection_report, label_targets, score_windows, Detector, Ridge, COMBINED, DEFAULT_DELTA,
    REPORT_PERCENTILES,
};

fn main() -> mtad::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.synth.duration_s = 2000.0;
    cfg.synth.p.insert(Maneuver::UTurn.name().into(), 0.03);
    cfg.prepare.exclude_label = Some(Maneuver::UTurn.name().into());
    let store = prepare_windows(&cfg, &synth_traces(&cfg.synth)?)?;

    let mut config = ModelConfig {
        hidden_size: 16,
        ..ModelConfig::default()
    };
    config.loss_weights.regularization = 0.0;
    let mut model = MultiTaskModel::<f32>::new(config.clone(), &mut SeededRng::new(3))?;
    let cw = symbol_class_weights(&store.stats, config.vocab_size(), config.class_weight_power)?;
    let tc = TrainConfig {
        epochs: 6,
        batch_size: 32,
        adam: AdamConfig {
            learning_rate: 0.005,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    train(&mut model, &store.train, &store.test, &cw, &tc, |m| println!("epoch {} test L_A {:.5}", m.epoch, m.reconstruction))?;

    let run = score_windows(Detector::MultiTask(&model), &store.train, &store.test, &store.stats, Ridge::Auto, DEFAULT_DELTA)?;
    for m in &run.error_models.models {
        println!("{:<15} dim {:>3}, ridge {:.2e}", m.modality, m.dim(), m.ridge);
    }

    let uturns = label_targets(&store.test, Maneuver::UTurn);
    let anomalies = anomaly_targets(&store.test);
    println!("\n{} test windows, {} held-out u_turn, {} anomalous", store.test.len(), uturns.len(), anomalies.len());
    for (name, scores) in [("raw", run.raw_scores(COMBINED)), ("scaled", run.scaled_scores(COMBINED))] {
        let u = detection_report(&scores, &uturns, &REPORT_PERCENTILES)?;
        let a = detection_report(&scores, &anomalies, &REPORT_PERCENTILES)?;
        println!("\n{name} scores");
        println!("{:>10} {:>18} {:>18}", "top %", "u_turn flagged", "anomalies found");
        for (ru, ra) in u.rows.iter().zip(&a.rows) {
            println!("{:>10} {:>18} {:>18}", ru.percentile, ru.to_string(), ra.to_string());
        }
    }
    Ok(())
}
