//! Multivariate Gaussian fits of reconstruction-error vectors and the
//! Mahalanobis distance under them.

use serde::{Deserialize, Serialize};

use crate::data::trace::{CHANNEL_NAMES, NUM_CHANNELS};
use crate::error::{Error, Result};
use crate::numeric::{cholesky, Array, SpdFactor};

/// Diagonal loading added to the sample covariance before factorizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ridge {
    /// `1e-4 · trace(Σ) / dim`, floored at `1e-12`.
    Auto,
    Fixed(f64),
    None,
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Auto
    }
}

pub const AUTO_RIDGE_SCALE: f64 = 1e-4;
const AUTO_RIDGE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GaussianErrorModel {
    pub modality: String,
    pub mean: Vec<f64>,
    pub factor: SpdFactor,
    /// Ridge actually added to the diagonal.
    pub ridge: f64,
}

impl GaussianErrorModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn with_modality(mut self, name: impl Into<String>) -> Self {
        self.modality = name.into();
        self
    }
}

/// Sample mean and unbiased covariance (`N − 1`) of equally sized vectors.
pub fn mean_and_covariance(samples: &[Vec<f64>]) -> Result<(Vec<f64>, Array<f64>)> {
    if samples.len() < 2 {
        return Err(Error::data(format!(
            "a Gaussian fit needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if dim == 0 {
        return Err(Error::Empty("error vector"));
    }
    let mut mean = vec![0.0; dim];
    for s in samples {
        if s.len() != dim {
            return Err(Error::ShapeMismatch {
                op: "fit_error_model",
                expected: vec![dim],
                found: vec![s.len()],
            });
        }
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    let n = samples.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    // Upper triangle first, then mirrored.
    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for s in samples {
        for ((c, v), m) in centered.iter_mut().zip(s).zip(&mean) {
            *c = v - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            let row = &mut cov[i * dim..(i + 1) * dim];
            for j in i..dim {
                row[j] += ci * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / (n - 1.0);
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    Ok((mean, Array::new(&[dim, dim], cov)?))
}

/// Fits `N(μ, Σ + εI)` to error vectors and factorizes the covariance.
pub fn fit_error_model(errors: &[Vec<f64>], ridge: Ridge) -> Result<GaussianErrorModel> {
    let (mean, mut cov) = mean_and_covariance(errors)?;
    let dim = mean.len();
    let eps = match ridge {
        Ridge::Auto => {
            let trace: f64 = (0..dim).map(|i| cov.data()[i * dim + i]).sum();
            (AUTO_RIDGE_SCALE * trace / dim as f64).max(AUTO_RIDGE_FLOOR)
        }
        Ridge::Fixed(e) if e >= 0.0 && e.is_finite() => e,
        Ridge::Fixed(e) => return Err(Error::config(format!("invalid ridge {e}"))),
        Ridge::None => 0.0,
    };
    for i in 0..dim {
        cov.data_mut()[i * dim + i] += eps;
    }
    let factor = cholesky(&cov)?;
    Ok(GaussianErrorModel {
        modality: String::new(),
        mean,
        factor,
        ridge: eps,
    })
}

/// `sqrt((e − μ)ᵀ Σ⁻¹ (e − μ))`. With `Σ = L·Lᵀ` this is `‖L⁻¹(e − μ)‖`,
/// so a single forward substitution suffices.
pub fn mahalanobis(m: &GaussianErrorModel, e: &[f64]) -> Result<f64> {
    if e.len() != m.dim() {
        return Err(Error::ShapeMismatch {
            op: "mahalanobis",
            expected: vec![m.dim()],
            found: vec![e.len()],
        });
    }
    let diff: Vec<f64> = e.iter().zip(&m.mean).map(|(a, b)| a - b).collect();
    let z = m.factor.forward_substitute(&diff)?;
    Ok(z.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Scoring modalities: the six channels, then all channels combined.
pub const NUM_MODALITIES: usize = NUM_CHANNELS + 1;
pub const COMBINED: &str = "combined";

pub fn modality_names() -> [&'static str; NUM_MODALITIES] {
    let mut names = [COMBINED; NUM_MODALITIES];
    names[..NUM_CHANNELS].copy_from_slice(&CHANNEL_NAMES);
    names
}

/// Error vectors `x − x̂` of one window for every modality. Per-channel
/// vectors are time series of length `window_steps`; the combined vector is
/// their channel-major concatenation.
pub fn error_vectors(input: &Array<f32>, recon: &Array<f32>) -> Result<Vec<Vec<f64>>> {
    if input.shape() != recon.shape() || input.cols() != NUM_CHANNELS {
        return Err(Error::ShapeMismatch {
            op: "error_vectors",
            expected: input.shape().to_vec(),
            found: recon.shape().to_vec(),
        });
    }
    let steps = input.rows();
    let mut out = vec![Vec::with_capacity(steps); NUM_CHANNELS];
    for (x, r) in input.data().chunks_exact(NUM_CHANNELS).zip(recon.data().chunks_exact(NUM_CHANNELS)) {
        for c in 0..NUM_CHANNELS {
            out[c].push(f64::from(x[c]) - f64::from(r[c]));
        }
    }
    let combined = out.concat();
    out.push(combined);
    Ok(out)
}

/// One fitted Gaussian per modality.
#[derive(Debug, Clone)]
pub struct ErrorModelSet {
    pub models: Vec<GaussianErrorModel>,
}

impl ErrorModelSet {
    /// Fits every modality from per-window error vectors as returned by
    /// [`error_vectors`].
    pub fn fit(errors: &[Vec<Vec<f64>>], ridge: Ridge) -> Result<Self> {
        let names = modality_names();
        let mut models = Vec::with_capacity(NUM_MODALITIES);
        for (k, name) in names.iter().enumerate() {
            let samples: Vec<Vec<f64>> = errors.iter().map(|e| e[k].clone()).collect();
            models.push(fit_error_model(&samples, ridge)?.with_modality(*name));
        }
        Ok(Self { models })
    }

    /// Mahalanobis score of one window for every modality.
    pub fn score(&self, errors: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.models.iter().zip(errors).map(|(m, e)| mahalanobis(m, e)).collect()
    }
}
