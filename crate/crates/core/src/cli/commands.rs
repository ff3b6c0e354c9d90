//! The five pipeline commands. Every command works inside one output
//! directory:
//!
//! ```text
//! <out>/traces/            synth
//! <out>/store/             prepare
//! <out>/runs/<variant>/    train, score
//! <out>/compare/           compare
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cli::config::{RunConfig, Variant};
use crate::cli::manifest::{EpochSummary, Manifest};
use crate::data::maneuver::Maneuver;
use crate::data::pipeline::{downsample, exclude_label, label_stats, segment, speed_filter, split, ScalerParams, Window};
use crate::data::store::{file_sha256, store_hash, Counts, PreparedStore};
use crate::data::synth::synth_traces;
use crate::data::trace::{csv_io, export_csv, read_csv, Trace};
use crate::error::{Error, Result};
use crate::model::{
    load_into, save_checkpoint, symbol_class_weights, train, train_ensemble, EnsembleModel, EpochMetrics,
    LstmAutoencoder, ModelConfig, MultiTaskModel, METRICS_HEADER,
};
use crate::numeric::SeededRng;
use crate::scoring::{
    anomaly_targets, detection_report, label_targets, modality_names, score_windows, write_detection_table,
    write_scores_file, DetectionReport, Detector, ScoreRun, COMBINED, MIN_LOSS,
};

pub const TRACES_DIR: &str = "traces";
pub const STORE_DIR: &str = "store";
pub const RUNS_DIR: &str = "runs";
pub const COMPARE_DIR: &str = "compare";
pub const RESOLVED_CONFIG: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const DIVERGED_CHECKPOINT: &str = "diverged.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const MSE_FILE: &str = "reconstruction_mse.csv";
pub const DETECTION_FILE: &str = "detection.csv";
pub const ANOMALY_DETECTION_FILE: &str = "anomaly_detection.csv";

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(RESOLVED_CONFIG);
    fs::write(&path, cfg.to_toml())?;
    Ok(path)
}

pub fn run_dir(out: &Path, variant: Variant) -> PathBuf {
    out.join(RUNS_DIR).join(variant.name())
}

/// Writes `cfg.synth.num_traces` trace CSVs plus the generator config.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let dir = out.join(TRACES_DIR);
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for t in synth_traces(&cfg.synth)? {
        let path = dir.join(format!("trace_{:04}.csv", t.id));
        export_csv(&t, &path)?;
        written.push(path);
    }
    let gen = dir.join("generator.toml");
    fs::write(&gen, cfg.synth.to_toml())?;
    written.push(gen);
    written.push(write_config(cfg, &dir)?);
    let mut m = Manifest::new("synth", None, &cfg.hash());
    m.add_outputs(&dir, &written)?;
    m.save(&dir)?;
    Ok(written)
}

/// Reads every `*.csv` in `dir`, sorted by file name; trace ids follow
/// that order.
pub fn load_traces(dir: &Path) -> Result<Vec<(PathBuf, Trace)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::data(format!("cannot read trace directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::data(format!("no trace CSVs in {}", dir.display())));
    }
    paths
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let file = fs::File::open(&p).map_err(|e| Error::data(format!("cannot open {}: {e}", p.display())))?;
            let t = read_csv(file, i as u32).map_err(|e| Error::data(format!("{}: {e}", p.display())))?;
            Ok((p, t))
        })
        .collect()
}

/// Runs the window pipeline over in-memory traces.
pub fn prepare_windows(cfg: &RunConfig, traces: &[Trace]) -> Result<PreparedStore> {
    let p = &cfg.prepare;
    let mut windows = Vec::new();
    let mut next_id = 0u64;
    for t in traces {
        let ds = downsample(t, p.target_hz)?;
        let ws = segment(&ds, &p.segment, next_id)?;
        next_id += ws.len() as u64;
        windows.extend(ws);
    }
    let segmented = windows.len();
    let windows = speed_filter(windows, p.min_speed_mph);
    let speed_filtered = windows.len();
    if windows.is_empty() {
        return Err(Error::data(format!(
            "no windows left after the {:.1} mph speed filter ({segmented} segmented)",
            p.min_speed_mph
        )));
    }
    let (mut train_set, mut test) = split(windows, p.train_fraction, p.split)?;
    let before = train_set.len();
    if let Some(label) = cfg.excluded_label()? {
        train_set = exclude_label(train_set, label);
    }
    if train_set.is_empty() || test.is_empty() {
        return Err(Error::data(format!(
            "split left {} training and {} test windows",
            train_set.len(),
            test.len()
        )));
    }
    let scaler = ScalerParams::fit(&train_set)?;
    scaler.apply_all(&mut train_set)?;
    scaler.apply_all(&mut test)?;
    let stats = label_stats(&train_set);
    Ok(PreparedStore {
        counts: Counts {
            traces: traces.len(),
            segmented,
            speed_filtered,
            train: train_set.len(),
            test: test.len(),
            excluded_from_train: before - train_set.len(),
        },
        train: train_set,
        test,
        scaler,
        stats,
    })
}

pub fn cmd_prepare(cfg: &RunConfig, out: &Path) -> Result<PreparedStore> {
    let traces_dir = out.join(&cfg.prepare.traces_dir);
    let loaded = load_traces(&traces_dir)?;
    let traces: Vec<Trace> = loaded.iter().map(|(_, t)| t.clone()).collect();
    let store = prepare_windows(cfg, &traces)?;
    let dir = out.join(STORE_DIR);
    let mut written = store.save(&dir)?;
    written.push(write_config(cfg, &dir)?);
    let mut m = Manifest::new("prepare", None, &cfg.hash());
    for (p, _) in &loaded {
        m.inputs.insert(p.file_name().unwrap_or_default().to_string_lossy().into_owned(), file_sha256(p)?);
    }
    m.store_hash = Some(store_hash(&dir)?);
    m.add_outputs(&dir, &written)?;
    m.save(&dir)?;
    Ok(store)
}

/// A trained model of any variant.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    MultiTask(MultiTaskModel),
    Autoencoder(LstmAutoencoder),
    Ensemble(EnsembleModel),
}

impl TrainedModel {
    /// Fresh, untrained model for `variant`. Ensemble members are created
    /// for the labels present in `train_set`, in label order.
    pub fn init(variant: Variant, cfg: &ModelConfig, train_set: &[Window], seed: u64) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        let config = ModelConfig {
            loss_weights: variant.loss_weights(cfg.loss_weights),
            ..cfg.clone()
        };
        Ok(match variant {
            Variant::Multitask | Variant::SymbolOnly => TrainedModel::MultiTask(MultiTaskModel::new(config, &mut rng)?),
            Variant::BaselineAe => TrainedModel::Autoencoder(LstmAutoencoder::new(config, "ae", &mut rng)?),
            Variant::Ensemble => {
                let present: HashSet<Maneuver> = train_set.iter().map(|w| w.majority_label).collect();
                let labels: Vec<Maneuver> = Maneuver::ALL.into_iter().filter(|l| present.contains(l)).collect();
                TrainedModel::Ensemble(EnsembleModel::new(&config, &labels, &mut rng)?)
            }
        })
    }

    pub fn detector(&self) -> Detector<'_> {
        match self {
            TrainedModel::MultiTask(m) => Detector::MultiTask(m),
            TrainedModel::Autoencoder(m) => Detector::Autoencoder(m),
            TrainedModel::Ensemble(m) => Detector::Ensemble(m),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            TrainedModel::MultiTask(m) => save_checkpoint(m, path),
            TrainedModel::Autoencoder(m) => save_checkpoint(m, path),
            TrainedModel::Ensemble(m) => save_checkpoint(m, path),
        }
    }

    pub fn load(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::data(format!("missing checkpoint {}", path.display())));
        }
        match self {
            TrainedModel::MultiTask(m) => load_into(m, path),
            TrainedModel::Autoencoder(m) => load_into(m, path),
            TrainedModel::Ensemble(m) => load_into(m, path),
        }
    }

    /// Trains in place. `on_epoch` sees each epoch's evaluation metrics.
    pub fn fit(
        &mut self,
        store: &PreparedStore,
        cfg: &RunConfig,
        on_epoch: impl FnMut(&EpochMetrics),
    ) -> Result<Vec<EpochMetrics>> {
        match self {
            TrainedModel::MultiTask(m) => {
                let cw = symbol_class_weights(&store.stats, m.config.vocab_size(), m.config.class_weight_power)?;
                train(m, &store.train, &store.test, &cw, &cfg.train, on_epoch)
            }
            TrainedModel::Autoencoder(m) => train(m, &store.train, &store.test, &[], &cfg.train, on_epoch),
            TrainedModel::Ensemble(m) => train_ensemble(m, &store.train, &store.test, &cfg.train, on_epoch),
        }
    }
}

fn metrics_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(METRICS_HEADER).map_err(csv_io)?;
    w.flush()?;
    Ok(w)
}

/// Trains one variant on the prepared store and writes its checkpoint and
/// per-epoch metrics. On divergence the partially trained state and a
/// manifest describing the failure are written before the error returns.
pub fn cmd_train(cfg: &RunConfig, out: &Path, variant: Variant) -> Result<Vec<EpochMetrics>> {
    let store_dir = out.join(STORE_DIR);
    let store = PreparedStore::load(&store_dir)?;
    let dir = run_dir(out, variant);
    fs::create_dir_all(&dir)?;
    let config_path = write_config(cfg, &dir)?;
    let mut manifest = Manifest::new("train", Some(variant.name()), &cfg.hash());
    manifest.store_hash = Some(store_hash(&store_dir)?);
    let mut model = TrainedModel::init(variant, &cfg.model, &store.train, cfg.train.seed)?;

    let metrics_path = dir.join(METRICS_FILE);
    let mut writer = metrics_writer(&metrics_path)?;
    let mut write_err = None;
    let result = model.fit(&store, cfg, |m| {
        let r = writer.write_record(m.csv_record()).map_err(csv_io).and_then(|_| Ok(writer.flush()?));
        if let Err(e) = r {
            write_err.get_or_insert(e);
        }
        manifest.epochs.push(EpochSummary::from(m));
    });
    drop(writer);
    if let Some(e) = write_err {
        return Err(e);
    }
    match result {
        Ok(history) => {
            let ckpt = dir.join(CHECKPOINT_FILE);
            model.save(&ckpt)?;
            manifest.checkpoints.push(CHECKPOINT_FILE.to_string());
            manifest.add_outputs(&dir, &[config_path, metrics_path, ckpt])?;
            manifest.save(&dir)?;
            Ok(history)
        }
        Err(e) => {
            let ckpt = dir.join(DIVERGED_CHECKPOINT);
            model.save(&ckpt)?;
            manifest.checkpoints.push(DIVERGED_CHECKPOINT.to_string());
            manifest.status = e.to_string();
            manifest.add_outputs(&dir, &[config_path, metrics_path, ckpt])?;
            manifest.save(&dir)?;
            Err(e)
        }
    }
}

/// Loads a trained variant from its run directory.
pub fn load_trained(cfg: &RunConfig, out: &Path, variant: Variant, store: &PreparedStore) -> Result<TrainedModel> {
    let mut model = TrainedModel::init(variant, &cfg.model, &store.train, cfg.train.seed)?;
    model.load(&run_dir(out, variant).join(CHECKPOINT_FILE))?;
    Ok(model)
}

/// Targets for the detection tables: windows of the rare maneuver and
/// windows overlapping injected anomalies.
pub fn detection_reports(
    run: &ScoreRun,
    test: &[Window],
    cfg: &RunConfig,
) -> Result<Vec<(String, DetectionReport, DetectionReport)>> {
    let rare = label_targets(test, cfg.rare_label()?);
    let anomalies = anomaly_targets(test);
    let mut kinds: Vec<(String, Vec<(u64, f64)>)> = Vec::new();
    let modality = cfg.score.modality.as_str();
    kinds.push(("raw".to_string(), run.raw_scores(modality)));
    let scaled = run.scaled_scores(modality);
    if !scaled.is_empty() {
        kinds.push(("scaled".to_string(), scaled));
    }
    let min_loss = run.raw_scores(MIN_LOSS);
    if !min_loss.is_empty() {
        kinds.push((MIN_LOSS.to_string(), min_loss));
    }
    kinds
        .into_iter()
        .map(|(name, s)| {
            Ok((
                name,
                detection_report(&s, &rare, &cfg.score.percentiles)?,
                detection_report(&s, &anomalies, &cfg.score.percentiles)?,
            ))
        })
        .collect()
}

fn write_mse(path: &Path, names: &[&str], columns: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = vec!["feature"];
    header.extend(columns.iter().map(|(n, _)| *n));
    w.write_record(&header).map_err(csv_io)?;
    for (i, name) in names.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(columns.iter().map(|(_, v)| v[i].to_string()));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn write_table(path: &Path, columns: &[(String, &DetectionReport)]) -> Result<()> {
    let cols: Vec<(&str, &DetectionReport)> = columns.iter().map(|(n, r)| (n.as_str(), *r)).collect();
    write_detection_table(fs::File::create(path)?, &cols)
}

/// Fits error models on training reconstructions and scores the test split.
pub fn cmd_score(cfg: &RunConfig, out: &Path, variant: Variant) -> Result<ScoreRun> {
    let store_dir = out.join(STORE_DIR);
    let store = PreparedStore::load(&store_dir)?;
    let dir = run_dir(out, variant);
    let hash = store_hash(&store_dir)?;
    if let Ok(train_manifest) = Manifest::load(&dir) {
        if train_manifest.store_hash.as_deref() != Some(hash.as_str()) {
            return Err(Error::data(format!(
                "{} was trained on a different store than {}",
                dir.display(),
                store_dir.display()
            )));
        }
    }
    let model = load_trained(cfg, out, variant, &store)?;
    let run = score_windows(model.detector(), &store.train, &store.test, &store.stats, cfg.score.ridge, cfg.score.delta)?;

    let scores_path = dir.join(SCORES_FILE);
    write_scores_file(&scores_path, &run.scored)?;
    let mse_path = dir.join(MSE_FILE);
    write_mse(&mse_path, &modality_names(), &[(variant.name(), &run.test_mse)])?;
    let reports = detection_reports(&run, &store.test, cfg)?;
    let rare: Vec<(String, &DetectionReport)> = reports.iter().map(|(n, r, _)| (n.clone(), r)).collect();
    let anomalies: Vec<(String, &DetectionReport)> = reports.iter().map(|(n, _, a)| (n.clone(), a)).collect();
    let det_path = dir.join(DETECTION_FILE);
    write_table(&det_path, &rare)?;
    let anom_path = dir.join(ANOMALY_DETECTION_FILE);
    write_table(&anom_path, &anomalies)?;

    let mut m = Manifest::new("score", Some(variant.name()), &cfg.hash());
    m.store_hash = Some(hash);
    m.inputs.insert(CHECKPOINT_FILE.to_string(), file_sha256(dir.join(CHECKPOINT_FILE))?);
    m.checkpoints.push(CHECKPOINT_FILE.to_string());
    m.add_outputs(&dir, &[scores_path, mse_path, det_path, anom_path])?;
    fs::write(dir.join("score_manifest.json"), crate::data::store::to_json(&m)?)?;
    Ok(run)
}

/// Tables produced by [`cmd_compare`].
#[derive(Debug, Clone)]
pub struct Comparison {
    pub variants: Vec<Variant>,
    /// Per variant, test MSE for each modality.
    pub mse: Vec<Vec<f64>>,
    /// Column name and report, rare-maneuver targets.
    pub rare: Vec<(String, DetectionReport)>,
    /// Column name and report, injected-anomaly targets.
    pub anomalies: Vec<(String, DetectionReport)>,
}

/// Compares trained variants on one store: a per-feature reconstruction
/// MSE table and recall-at-percentile tables. Refuses runs whose store
/// hashes differ.
pub fn cmd_compare(cfg: &RunConfig, out: &Path, variants: &[Variant]) -> Result<Comparison> {
    let store_dir = out.join(STORE_DIR);
    let hash = store_hash(&store_dir)?;
    let variants: Vec<Variant> = if variants.is_empty() {
        Variant::ALL.into_iter().filter(|v| run_dir(out, *v).join(CHECKPOINT_FILE).exists()).collect()
    } else {
        variants.to_vec()
    };
    if variants.len() < 2 {
        return Err(Error::config(format!("compare needs at least 2 trained variants, found {}", variants.len())));
    }
    for v in &variants {
        let m = Manifest::load(&run_dir(out, *v))?;
        if m.store_hash.as_deref() != Some(hash.as_str()) {
            return Err(Error::data(format!(
                "variant {v} was trained on store {} but {} has {hash}",
                m.store_hash.as_deref().unwrap_or("<none>"),
                store_dir.display()
            )));
        }
    }
    let store = PreparedStore::load(&store_dir)?;
    let mut mse = Vec::new();
    let mut rare = Vec::new();
    let mut anomalies = Vec::new();
    for &v in &variants {
        let model = load_trained(cfg, out, v, &store)?;
        let run = score_windows(model.detector(), &store.train, &store.test, &store.stats, cfg.score.ridge, cfg.score.delta)?;
        mse.push(run.test_mse.clone());
        for (kind, r, a) in detection_reports(&run, &store.test, cfg)? {
            rare.push((format!("{v}:{kind}"), r));
            anomalies.push((format!("{v}:{kind}"), a));
        }
    }
    let dir = out.join(COMPARE_DIR);
    fs::create_dir_all(&dir)?;
    let names: Vec<&str> = modality_names()
        .into_iter()
        .map(|n| if n == COMBINED { "Combined" } else { n })
        .collect();
    let cols: Vec<(&str, &[f64])> = variants.iter().zip(&mse).map(|(v, m)| (v.name(), m.as_slice())).collect();
    let mse_path = dir.join(MSE_FILE);
    write_mse(&mse_path, &names, &cols)?;
    let det_path = dir.join(DETECTION_FILE);
    write_table(&det_path, &rare.iter().map(|(n, r)| (n.clone(), r)).collect::<Vec<_>>())?;
    let anom_path = dir.join(ANOMALY_DETECTION_FILE);
    write_table(&anom_path, &anomalies.iter().map(|(n, r)| (n.clone(), r)).collect::<Vec<_>>())?;
    let config_path = write_config(cfg, &dir)?;
    let mut m = Manifest::new("compare", None, &cfg.hash());
    m.store_hash = Some(hash);
    for v in &variants {
        m.inputs.insert(format!("{v}/{CHECKPOINT_FILE}"), file_sha256(run_dir(out, *v).join(CHECKPOINT_FILE))?);
    }
    m.add_outputs(&dir, &[mse_path, det_path, anom_path, config_path])?;
    m.save(&dir)?;
    Ok(Comparison {
        variants,
        mse,
        rare,
        anomalies,
    })
}
