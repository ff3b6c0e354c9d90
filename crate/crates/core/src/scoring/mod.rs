//! Anomaly scores: Gaussian error models, Mahalanobis distance, maneuver
//! likelihood scaling and percentile reports.

pub mod gaussian;
pub mod rank;
pub mod score;

pub use gaussian::{
    error_vectors, fit_error_model, mahalanobis, modality_names, ErrorModelSet, GaussianErrorModel, Ridge, COMBINED,
    NUM_MODALITIES,
};
pub use rank::{
    detection_report, rank_and_select, scaled_score, sequence_nll, top_count, write_detection_table, write_scores,
    write_scores_file, DetectionReport, DetectionRow, ScoredWindow, DEFAULT_DELTA, REPORT_PERCENTILES,
};
pub use score::{
    anomaly_targets, label_targets, modality_mse, score_windows, Detector, Reconstruction, ScoreRun,
    ANOMALY_TARGET_FRACTION, DEFAULT_MODALITY, MIN_LOSS,
};
