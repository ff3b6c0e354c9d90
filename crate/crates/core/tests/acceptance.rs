//! Acceptance run. Every criterion prints one PASS/FAIL line; the process
//! fails if any criterion fails. Set `MTAD_ACCEPTANCE=3,7` to run a subset.

mod common;

use std::collections::HashSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::fixtures;
use common::grad_cases::{self, failure, SEEDS};
use mtad::cli::commands::{run_dir, CHECKPOINT_FILE, METRICS_FILE, SCORES_FILE};
use mtad::cli::{cmd_prepare, cmd_score, cmd_synth, cmd_train, RunConfig, TrainedModel, Variant};
use mtad::data::maneuver::{Maneuver, EOS, HDD_LABEL_PERCENT, NUM_MANEUVERS, SOS, VOCAB_SIZE};
use mtad::data::pipeline::{segment, split, train_count, SegmentConfig, SplitMode, Window};
use mtad::data::trace::Trace;
use mtad::model::checkpoint::{decode_checkpoint, encode_checkpoint, restore};
use mtad::model::{
    baseline_autoencoder_loss, ensemble_loss, train, train_ensemble, EnsembleModel, LossWeights, ModelConfig,
    MultiTaskModel, TrainConfig, Trainable,
};
use mtad::nn::{class_weights, AdamConfig, Module};
use mtad::numeric::{cholesky, Array, SeededRng};
use mtad::scoring::{
    anomaly_targets, detection_report, fit_error_model, label_targets, mahalanobis, score_windows, GaussianErrorModel, Ridge, COMBINED,
    DEFAULT_DELTA, MIN_LOSS,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst = Vec::new();
    for (name, tol, case) in grad_cases::CASES {
        let mut max_err: f64 = 0.0;
        for seed in 0..SEEDS {
            let report = case(seed, tol);
            max_err = max_err.max(report.max_rel_error());
            failures.extend(failure(name, seed, &report));
        }
        worst.push(format!("{name} {max_err:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 120.0;
    outcome(
        pass,
        format!(
            "{} cases x {SEEDS} seeds in {secs:.1}s; worst rel err: {}{}",
            grad_cases::CASES.len(),
            worst.join(", "),
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Mahalanobis oracle

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
fn explicit_inverse(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs())).unwrap();
        for j in 0..n {
            m.swap(col * n + j, pivot * n + j);
            inv.swap(col * n + j, pivot * n + j);
        }
        let p = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        m[r * n + j] -= f * m[col * n + j];
                        inv[r * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
    }
    inv
}

fn mahalanobis_oracle() -> Outcome {
    let mut rng = SeededRng::new(2024);
    let mut worst: f64 = 0.0;
    let mut zero_ok = true;
    for _ in 0..100 {
        let dim = 1 + rng.below(50);
        let n = dim + 5 + rng.below(60);
        let scales: Vec<f64> = (0..dim).map(|_| rng.uniform(0.2, 3.0)).collect();
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                // Correlate neighbouring coordinates.
                (0..dim).map(|i| scales[i] * (z[i] + if i > 0 { 0.5 * z[i - 1] } else { 0.0 })).collect()
            })
            .collect();
        let model = fit_error_model(&samples, Ridge::Auto).unwrap();
        let cov = model.factor.reconstruct();
        let inv = explicit_inverse(cov.data(), dim);
        for _ in 0..5 {
            let e: Vec<f64> = (0..dim).map(|i| model.mean[i] + rng.uniform(-3.0, 3.0)).collect();
            let d: Vec<f64> = e.iter().zip(&model.mean).map(|(a, b)| a - b).collect();
            let mut q = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    q += d[i] * inv[i * dim + j] * d[j];
                }
            }
            let oracle = q.sqrt();
            let got = mahalanobis(&model, &e).unwrap();
            worst = worst.max((got - oracle).abs() / oracle);
        }
        if mahalanobis(&model, &model.mean).unwrap() != 0.0 {
            zero_ok = false;
        }
    }
    let m = GaussianErrorModel {
        modality: "identity".into(),
        mean: vec![0.0, 0.0],
        factor: cholesky(&Array::new(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap()).unwrap(),
        ridge: 0.0,
    };
    let euclid = mahalanobis(&m, &[3.0, 4.0]).unwrap();
    let pass = worst < 1e-6 && zero_ok && euclid == 5.0;
    outcome(
        pass,
        format!("worst rel err vs explicit inverse {worst:.2e} over 100 models (dim <= 50); e=mu gives 0: {zero_ok}; identity (3,4) -> {euclid}"),
    )
}

// ---------------------------------------------------------------------------
// 3. Gaussian fit recovery

fn gaussian_recovery() -> Outcome {
    let mut rng = SeededRng::new(77);
    let mu0 = [1.0, -2.0, 0.5, 3.0];
    let sigma0 = [
        2.0, 0.6, -0.4, 0.2, //
        0.6, 1.5, 0.3, 0.0, //
        -0.4, 0.3, 1.0, -0.2, //
        0.2, 0.0, -0.2, 0.8,
    ];
    let l = cholesky(&Array::new(&[4, 4], sigma0.to_vec()).unwrap()).unwrap();
    let l = l.lower_triangular().data().to_vec();
    let samples: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            let z: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            (0..4).map(|i| mu0[i] + (0..=i).map(|j| l[i * 4 + j] * z[j]).sum::<f64>()).collect()
        })
        .collect();
    let m = fit_error_model(&samples, Ridge::None).unwrap();
    let mu_err = m.mean.iter().zip(&mu0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let cov = m.factor.reconstruct();
    let sig_err = cov.data().iter().zip(&sigma0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let wide: Vec<Vec<f64>> = (0..250).map(|_| (0..300).map(|_| rng.normal()).collect()).collect();
    let with_ridge = fit_error_model(&wide, Ridge::Auto);
    let without = fit_error_model(&wide, Ridge::None);
    let pass = mu_err < 0.05 && sig_err < 0.1 && with_ridge.is_ok() && without.is_err();
    outcome(
        pass,
        format!(
            "dim 4, N=10^4: max |mu err| {mu_err:.4}, max |Sigma err| {sig_err:.4}; dim 300, N=250: ridge {}, no ridge {}",
            if with_ridge.is_ok() { "fits" } else { "fails" },
            match &without {
                Ok(_) => "fits".to_string(),
                Err(e) => format!("errors ({e})"),
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Pipeline arithmetic

fn pipeline_arithmetic() -> Outcome {
    let mut rng = SeededRng::new(4);
    let cfg = SegmentConfig::default();
    let mut count_ok = 0;
    let mut shape_ok = true;
    for _ in 0..100 {
        let n = rng.below(400);
        let samples = vec![[1.0, 0.0, 10.0, 0.0, 10.0, 0.0]; n];
        let labels: Vec<Maneuver> = (0..n).map(|_| Maneuver::ALL[rng.below(NUM_MANEUVERS)]).collect();
        let trace = Trace::new(0, 5.0, samples, labels, vec![false; n]).unwrap();
        let windows = segment(&trace, &cfg, 0).unwrap();
        // Closed form: 25 input + 15 horizon steps, 2.5-step stride.
        let expected = if n < 40 { 0 } else { ((n - 40) as f64 / 2.5).floor() as usize + 1 };
        if windows.len() == expected {
            count_ok += 1;
        }
        for w in &windows {
            shape_ok &= w.input.shape() == [25, 6]
                && w.targets.len() == 16
                && w.targets[15] == EOS
                && w.targets[..15].iter().all(|&t| t < NUM_MANEUVERS);
        }
    }
    let mut split_ok = true;
    for _ in 0..50 {
        let n = 1 + rng.below(3000);
        let ws: Vec<Window> = (0..n as u64)
            .map(|id| Window {
                id,
                input: Array::zeros(&[25, 6]),
                targets: vec![0; 15].into_iter().chain([EOS]).collect(),
                majority_label: Maneuver::Background,
                max_speed: 10.0,
                trace_id: 0,
                start: 0,
                anomaly_fraction: 0.0,
            })
            .collect();
        let (tr, te) = split(ws, 0.7, SplitMode::Chronological).unwrap();
        let expected = (n as f64 * 0.7 + 1e-9).floor() as usize;
        split_ok &= tr.len() == expected && te.len() == n - expected && tr.len() == train_count(n, 0.7);
    }
    split_ok &= train_count(762_671, 0.7) == 533_869;
    let pass = count_ok == 100 && shape_ok && split_ok;
    outcome(
        pass,
        format!("window counts match closed form on {count_ok}/100 lengths; 25x6 inputs with 15+EOS targets: {shape_ok}; 70/30 split sizes exact: {split_ok}"),
    )
}

// ---------------------------------------------------------------------------
// 5. Weight formula

fn weight_formula() -> Outcome {
    let freqs: Vec<f64> = HDD_LABEL_PERCENT.iter().map(|p| p / 100.0).collect();
    let w = class_weights(&freqs, 0.5).unwrap();
    let bg = w[Maneuver::Background.index()];
    let ut = w[Maneuver::UTurn.index()];
    let formula_ok = w.iter().zip(&freqs).all(|(w, f)| (w - f.powf(-0.5)).abs() < 1e-12);
    // The reference values are quoted to four and two decimals; each is
    // checked at 1e-3 against its exact value and at half a unit of its
    // last quoted digit against the quoted figure.
    let exact_bg = 0.8715f64.powf(-0.5);
    let exact_ut = 0.0023f64.powf(-0.5);
    let pass = (bg - exact_bg).abs() < 1e-3
        && (ut - exact_ut).abs() < 1e-3
        && (bg - 1.0712).abs() <= 5e-5
        && (ut - 20.85).abs() <= 5e-3
        && formula_ok;
    outcome(
        pass,
        format!("background {bg:.6} (quoted 1.0712), u_turn {ut:.6} (quoted 20.85), w = f^-k on all classes: {formula_ok}"),
    )
}

// ---------------------------------------------------------------------------
// 6 and 7 share one experiment per seed.

const DIRECTION_SEEDS: [u64; 3] = [11, 12, 13];

struct DirectionRun {
    multitask_mse: f64,
    autoencoder_mse: f64,
    rare_raw: f64,
    rare_scaled: f64,
    anomaly_scaled: f64,
    anomaly_ensemble: f64,
    windows: usize,
    rare_targets: usize,
    anomaly_targets: usize,
}

fn direction_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.synth = fixtures::generator(seed, 1, 3000.0);
    cfg.synth.p.insert(Maneuver::UTurn.name().into(), 0.03);
    cfg.prepare.exclude_label = Some(Maneuver::UTurn.name().into());
    cfg.model.hidden_size = 16;
    cfg.model.loss_weights.regularization = 0.0;
    cfg.train = TrainConfig {
        epochs: 20,
        batch_size: 32,
        adam: AdamConfig {
            learning_rate: 0.005,
            ..AdamConfig::default()
        },
        seed,
        ..TrainConfig::default()
    };
    cfg
}

fn direction_run(seed: u64) -> DirectionRun {
    let cfg = direction_config(seed);
    let store = fixtures::prepared(&cfg.synth, cfg.excluded_label().unwrap());
    let fit = |v: Variant| {
        let mut m = TrainedModel::init(v, &cfg.model, &store.train, seed).unwrap();
        m.fit(&store, &cfg, |_| {}).unwrap();
        score_windows(m.detector(), &store.train, &store.test, &store.stats, cfg.score.ridge, DEFAULT_DELTA).unwrap()
    };
    let mt = fit(Variant::Multitask);
    let ae = fit(Variant::BaselineAe);
    let ens = fit(Variant::Ensemble);
    let rare = label_targets(&store.test, Maneuver::UTurn);
    let anomalies = anomaly_targets(&store.test);
    let recall = |scores: Vec<(u64, f64)>, targets: &HashSet<u64>| {
        detection_report(&scores, targets, &[0.1]).unwrap().rows[0].recall()
    };
    DirectionRun {
        multitask_mse: *mt.test_mse.last().unwrap(),
        autoencoder_mse: *ae.test_mse.last().unwrap(),
        rare_raw: recall(mt.raw_scores(COMBINED), &rare),
        rare_scaled: recall(mt.scaled_scores(COMBINED), &rare),
        anomaly_scaled: recall(mt.scaled_scores(COMBINED), &anomalies),
        anomaly_ensemble: recall(ens.raw_scores(MIN_LOSS), &anomalies),
        windows: store.train.len() + store.test.len(),
        rare_targets: rare.len(),
        anomaly_targets: anomalies.len(),
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn regularization_direction(runs: &[DirectionRun]) -> Outcome {
    let mt = mean(runs.iter().map(|r| r.multitask_mse));
    let ae = mean(runs.iter().map(|r| r.autoencoder_mse));
    let per_seed: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.5}/{:.5}", r.multitask_mse, r.autoencoder_mse))
        .collect();
    let windows: Vec<usize> = runs.iter().map(|r| r.windows).collect();
    outcome(
        mt <= ae,
        format!("mean test MSE multitask {mt:.5} vs autoencoder {ae:.5} over {} seeds (per seed {per_seed:?}; windows {windows:?})", runs.len()),
    )
}

fn scaled_direction(runs: &[DirectionRun]) -> Outcome {
    let raw = mean(runs.iter().map(|r| r.rare_raw));
    let scaled = mean(runs.iter().map(|r| r.rare_scaled));
    let an_scaled = mean(runs.iter().map(|r| r.anomaly_scaled));
    let an_ens = mean(runs.iter().map(|r| r.anomaly_ensemble));
    let targets: Vec<(usize, usize)> = runs.iter().map(|r| (r.rare_targets, r.anomaly_targets)).collect();
    outcome(
        scaled < raw && an_scaled >= an_ens,
        format!(
            "top 0.1%: (a) held-out u_turn flagged raw {:.2}% vs scaled {:.2}%; (b) anomaly recall scaled {:.2}% vs ensemble {:.2}% (targets per seed {targets:?})",
            100.0 * raw,
            100.0 * scaled,
            100.0 * an_scaled,
            100.0 * an_ens
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Ensemble contract

fn ensemble_contract() -> Outcome {
    let gen = fixtures::generator(8, 1, 1300.0);
    let store = fixtures::prepared(&gen, None);
    let config = ModelConfig {
        hidden_size: 8,
        ..ModelConfig::default()
    };
    let mut present: Vec<Maneuver> = store.train.iter().map(|w| w.majority_label).collect();
    present.sort_by_key(|m| m.index());
    present.dedup();
    let mut ens = EnsembleModel::<f32>::new(&config, &present, &mut SeededRng::new(8)).unwrap();
    let tc = TrainConfig {
        epochs: 1,
        batch_size: 32,
        ..TrainConfig::default()
    };
    train_ensemble(&mut ens, &store.train, &store.test[..50], &tc, |_| {}).unwrap();
    let windows: Vec<&Window> = store.train.iter().chain(&store.test).take(1000).collect();
    let mut mismatches = 0;
    for w in &windows {
        let (min, label) = ensemble_loss(&ens, &w.input).unwrap();
        let mut best = (f64::INFINITY, Maneuver::Background);
        for (l, member) in &ens.members {
            let loss = baseline_autoencoder_loss(member, &w.input).unwrap();
            if loss < best.0 {
                best = (loss, *l);
            }
        }
        if (min, label) != best {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && windows.len() == 1000,
        format!("{} members; ensemble loss equals brute-force minimum on {}/{} windows", ens.members.len(), windows.len() - mismatches, windows.len()),
    )
}

// ---------------------------------------------------------------------------
// 9. Determinism and persistence

fn determinism() -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.synth.duration_s = 400.0;
    cfg.model.hidden_size = 8;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 32;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut artifacts = Vec::new();
    for d in &dirs {
        let out = d.path();
        cmd_synth(&cfg, out).unwrap();
        cmd_prepare(&cfg, out).unwrap();
        let mut files = Vec::new();
        for v in [Variant::Multitask, Variant::Ensemble] {
            cmd_train(&cfg, out, v).unwrap();
            cmd_score(&cfg, out, v).unwrap();
            for f in [METRICS_FILE, SCORES_FILE, CHECKPOINT_FILE] {
                files.push(fs::read(run_dir(out, v).join(f)).unwrap());
            }
        }
        artifacts.push(files);
    }
    let identical = artifacts[0] == artifacts[1];

    let model = MultiTaskModel::<f32>::new(ModelConfig::default(), &mut SeededRng::new(3)).unwrap();
    let bytes = encode_checkpoint(model.params());
    let mut other = MultiTaskModel::<f32>::new(ModelConfig::default(), &mut SeededRng::new(4)).unwrap();
    restore(&mut other, &decode_checkpoint(&bytes).unwrap()).unwrap();
    let bits = |m: &MultiTaskModel<f32>| -> Vec<u32> {
        m.params().iter().flat_map(|p| p.value.data().iter().map(|v| v.to_bits())).collect()
    };
    let round_trip = bits(&model) == bits(&other) && encode_checkpoint(other.params()) == bytes;
    outcome(
        identical && round_trip,
        format!("two seeded runs give byte-identical metrics/scores/checkpoints: {identical}; checkpoint round-trip bit-exact: {round_trip}"),
    )
}

// ---------------------------------------------------------------------------
// 10. Symbol decoding contract

/// Windows whose future maneuvers are a fixed function of a level pattern
/// in the input: class `c` continues for `split_at(c)` steps and then
/// switches to `next(c)`.
fn mapping_windows(n: usize, rng: &mut SeededRng) -> Vec<Window> {
    let classes = [Maneuver::Background, Maneuver::LeftTurn, Maneuver::RightLaneChange, Maneuver::Merge];
    (0..n)
        .map(|i| {
            let c = rng.below(classes.len());
            let level = 0.15 + 0.23 * c as f64;
            let data: Vec<f32> = (0..25 * 6)
                .map(|k| {
                    let ch = k % 6;
                    let base = if ch == 2 || ch == 4 { level } else { 0.5 };
                    (base + 0.03 * rng.normal()) as f32
                })
                .collect();
            let split_at = 5 + 2 * c;
            let next = classes[(c + 1) % classes.len()];
            let mut targets: Vec<usize> = (0..15)
                .map(|t| if t < split_at { classes[c].index() } else { next.index() })
                .collect();
            targets.push(EOS);
            Window {
                id: i as u64,
                input: Array::new(&[25, 6], data).unwrap(),
                targets,
                majority_label: classes[c],
                max_speed: 10.0,
                trace_id: 0,
                start: i,
                anomaly_fraction: 0.0,
            }
        })
        .collect()
}

fn symbol_contract() -> Outcome {
    let mut rng = SeededRng::new(10);
    // Length and tie-breaking on untrained and rigged models.
    let cfg = ModelConfig {
        hidden_size: 8,
        ..ModelConfig::default()
    };
    let mut model = MultiTaskModel::<f32>::new(cfg.clone(), &mut rng).unwrap();
    let mut lengths_ok = true;
    for w in mapping_windows(50, &mut rng) {
        let (_, s) = model.infer(&w.input).unwrap();
        lengths_ok &= s.len() == cfg.horizon_steps + 1 && !s.contains(&SOS);
    }
    model.symbol_proj.weight.value.fill(0.0);
    model.symbol_proj.bias.value.fill(0.0);
    let w0 = mapping_windows(1, &mut rng).remove(0);
    let ties_ok = model.infer(&w0.input).unwrap().1 == vec![0; cfg.horizon_steps + 1];

    // Trained accuracy on a deterministic mapping, measured on held-out windows.
    let cfg = ModelConfig {
        hidden_size: 16,
        loss_weights: LossWeights {
            reconstruction: 1.0,
            symbols: 1.0,
            regularization: 0.0,
        },
        ..ModelConfig::default()
    };
    let train_set = mapping_windows(400, &mut rng);
    let eval = mapping_windows(200, &mut rng);
    let mut model = MultiTaskModel::<f32>::new(cfg, &mut SeededRng::new(10)).unwrap();
    let tc = TrainConfig {
        epochs: 25,
        batch_size: 16,
        adam: AdamConfig {
            learning_rate: 0.005,
            ..AdamConfig::default()
        },
        seed: 10,
        ..TrainConfig::default()
    };
    let history = train(&mut model, &train_set, &eval, &vec![1.0; VOCAB_SIZE], &tc, |_| {}).unwrap();
    let acc = history.last().unwrap().symbol_accuracy.unwrap();
    let (mut hits, mut total) = (0, 0);
    for w in &eval {
        let (h, t) = model.symbol_hits(w).unwrap().unwrap();
        hits += h;
        total += t;
    }
    let pass = lengths_ok && ties_ok && acc > 0.9 && hits as f64 / total as f64 == acc;
    outcome(
        pass,
        format!("always horizon+1 symbols: {lengths_ok}; constant logits decode to lowest index: {ties_ok}; held-out accuracy on deterministic mapping {:.2}%", 100.0 * acc),
    )
}

// ---------------------------------------------------------------------------

fn run(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (
            false,
            format!(
                "panicked: {}",
                e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            ),
        ),
    };
    println!("{} [{id:>2}] {name}: {detail} ({secs:.1}s)", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("MTAD_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().map_or(true, |o| o.contains(&id));
    let start = Instant::now();
    let mut all = true;
    let mut ran = 0;
    let simple: [(u32, &str, fn() -> Outcome); 5] = [
        (1, "gradient correctness", gradients),
        (2, "mahalanobis oracle", mahalanobis_oracle),
        (3, "gaussian fit recovery", gaussian_recovery),
        (4, "pipeline arithmetic", pipeline_arithmetic),
        (5, "weight formula", weight_formula),
    ];
    for (id, name, f) in simple {
        if wanted(id) {
            all &= run(id, name, f);
            ran += 1;
        }
    }
    if wanted(6) || wanted(7) {
        let t = Instant::now();
        let runs = catch_unwind(|| DIRECTION_SEEDS.iter().map(|&s| direction_run(s)).collect::<Vec<_>>());
        let secs = t.elapsed().as_secs_f64();
        println!("     direction experiments: {} seeds trained in {secs:.1}s", DIRECTION_SEEDS.len());
        for (id, name, f) in [
            (6, "regularization direction", regularization_direction as fn(&[DirectionRun]) -> Outcome),
            (7, "scaled-score direction", scaled_direction),
        ] {
            if wanted(id) {
                all &= match &runs {
                    Ok(r) => run(id, name, || f(r)),
                    Err(_) => run(id, name, || outcome(false, "direction experiment panicked")),
                };
                ran += 1;
            }
        }
    }
    let rest: [(u32, &str, fn() -> Outcome); 3] = [
        (8, "ensemble contract", ensemble_contract),
        (9, "determinism and persistence", determinism),
        (10, "symbol decoding contract", symbol_contract),
    ];
    for (id, name, f) in rest {
        if wanted(id) {
            all &= run(id, name, f);
            ran += 1;
        }
    }
    println!(
        "acceptance: {ran} criteria, {} in {:.1}s",
        if all { "all passed" } else { "FAILURES" },
        start.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
