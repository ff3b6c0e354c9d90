use serde::{Deserialize, Serialize};

use crate::data::maneuver::VOCAB_SIZE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel_width: usize,
    pub stride: usize,
}

/// Weights of the reconstruction, symbol and L2 terms in the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub reconstruction: f64,
    pub symbols: f64,
    pub regularization: f64,
}

impl LossWeights {
    pub const PAPER: LossWeights = LossWeights {
        reconstruction: 1.0,
        symbols: 0.001,
        regularization: 0.0001,
    };

    /// `w_A·L_A + w_B·L_B + w_R·L_R`, evaluated left to right.
    pub fn combine(&self, reconstruction: f64, symbols: f64, regularization: f64) -> f64 {
        self.reconstruction * reconstruction
            + self.symbols * symbols
            + self.regularization * regularization
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::PAPER
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub channels: usize,
    /// Input steps per window (5 s at 5 Hz).
    pub window_steps: usize,
    /// Predicted maneuver symbols per window (3 s at 5 Hz); one EOS follows.
    pub horizon_steps: usize,
    pub conv_specs: Vec<ConvSpec>,
    pub lstm_layers: usize,
    pub hidden_size: usize,
    pub embedding_dim: usize,
    pub loss_weights: LossWeights,
    /// Exponent `k` in the class weights `f_s^(−k)`.
    pub class_weight_power: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: 6,
            window_steps: 25,
            horizon_steps: 15,
            conv_specs: vec![
                ConvSpec {
                    out_channels: 16,
                    kernel_width: 3,
                    stride: 1,
                },
                ConvSpec {
                    out_channels: 32,
                    kernel_width: 3,
                    stride: 1,
                },
            ],
            lstm_layers: 2,
            hidden_size: 64,
            embedding_dim: 16,
            loss_weights: LossWeights::PAPER,
            class_weight_power: 0.5,
        }
    }
}

impl ModelConfig {
    /// Full-size network (hidden size 256).
    pub fn paper_scale() -> Self {
        Self {
            hidden_size: 256,
            ..Self::default()
        }
    }

    pub fn vocab_size(&self) -> usize {
        VOCAB_SIZE
    }

    /// Length of one target sequence: the horizon plus EOS.
    pub fn target_len(&self) -> usize {
        self.horizon_steps + 1
    }

    /// Per-layer `(in_len, out_len)` through the convolution stack.
    pub fn conv_lengths(&self) -> Result<Vec<(usize, usize)>> {
        let mut t = self.window_steps;
        let mut out = Vec::with_capacity(self.conv_specs.len());
        for (i, spec) in self.conv_specs.iter().enumerate() {
            if spec.kernel_width == 0 || spec.stride == 0 || spec.out_channels == 0 {
                return Err(Error::config(format!("conv layer {i} has a zero extent")));
            }
            if t < spec.kernel_width {
                return Err(Error::config(format!(
                    "conv layer {i}: {t} steps is shorter than kernel width {}",
                    spec.kernel_width
                )));
            }
            let next = (t - spec.kernel_width) / spec.stride + 1;
            if (next - 1) * spec.stride + spec.kernel_width != t {
                return Err(Error::config(format!(
                    "conv layer {i}: transposed convolution cannot restore {t} steps \
                     (width {}, stride {})",
                    spec.kernel_width, spec.stride
                )));
            }
            out.push((t, next));
            t = next;
        }
        Ok(out)
    }

    /// Steps seen by the recurrent layers.
    pub fn recurrent_steps(&self) -> usize {
        self.conv_lengths()
            .ok()
            .and_then(|v| v.last().map(|&(_, t)| t))
            .unwrap_or(self.window_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.window_steps == 0 || self.horizon_steps == 0 {
            return Err(Error::config("channels, window_steps and horizon_steps must be positive"));
        }
        if self.lstm_layers == 0 || self.hidden_size == 0 || self.embedding_dim == 0 {
            return Err(Error::config("lstm_layers, hidden_size and embedding_dim must be positive"));
        }
        if !(self.class_weight_power >= 0.0) {
            return Err(Error::config("class_weight_power must be non-negative"));
        }
        self.conv_lengths().map(|_| ())
    }
}
