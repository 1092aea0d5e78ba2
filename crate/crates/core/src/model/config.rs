use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// Global layer norm over all channels and frames.
    Gln,
    /// Cumulative layer norm over all channels and frames up to `t`.
    Cln,
    /// Identity; no learnable gain or bias.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesMode {
    /// Concatenate the skip outputs of every block.
    Multiscale,
    /// Use only the final block's skip output.
    LastLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Sigmoid,
    Softmax,
}

/// Network hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Encoder filter length `L` in samples.
    pub filter_len: usize,
    /// Encoder hop in samples.
    pub stride: usize,
    /// Encoder filter count `N`.
    pub filters: usize,
    /// Bottleneck and residual channels `E`.
    pub bottleneck_channels: usize,
    /// Skip-path channels `P`.
    pub skip_channels: usize,
    /// Channels inside each block `H`.
    pub hidden_channels: usize,
    /// Depthwise kernel size `K`.
    pub kernel_size: usize,
    /// Blocks per repeat `M`; dilations run 1, 2, …, 2^(M−1).
    pub blocks_per_repeat: usize,
    /// Repeat count `R`.
    pub repeats: usize,
    /// Classifier hidden sizes `F1`, `F2`.
    pub hidden1: usize,
    pub hidden2: usize,
    /// Output classes `C` (assistant, expert).
    pub classes: usize,
    /// Per-class decision threshold `G_th`.
    pub threshold: f32,
    pub sample_rate: u32,
    pub norm_mode: NormMode,
    pub causal: bool,
    pub features_mode: FeaturesMode,
    pub output_activation: OutputActivation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl ModelConfig {
    /// L=160, N=512, E=128, H=512, K=3, R=3, M=8, P=128, F1=F2=2048, C=2,
    /// G_th=0.5, causal with cLN.
    pub fn full() -> Self {
        Self {
            filter_len: 160,
            stride: 80,
            filters: 512,
            bottleneck_channels: 128,
            skip_channels: 128,
            hidden_channels: 512,
            kernel_size: 3,
            blocks_per_repeat: 8,
            repeats: 3,
            hidden1: 2048,
            hidden2: 2048,
            classes: 2,
            threshold: 0.5,
            sample_rate: 16_000,
            norm_mode: NormMode::Cln,
            causal: true,
            features_mode: FeaturesMode::Multiscale,
            output_activation: OutputActivation::Sigmoid,
        }
    }

    /// Desk-scale variant: N=64, E=32, H=64, P=32, M=4, R=2, F1=F2=128.
    pub fn reduced() -> Self {
        Self {
            filters: 64,
            bottleneck_channels: 32,
            hidden_channels: 64,
            skip_channels: 32,
            blocks_per_repeat: 4,
            repeats: 2,
            hidden1: 128,
            hidden2: 128,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("filter_len", self.filter_len),
            ("stride", self.stride),
            ("filters", self.filters),
            ("bottleneck_channels", self.bottleneck_channels),
            ("skip_channels", self.skip_channels),
            ("hidden_channels", self.hidden_channels),
            ("kernel_size", self.kernel_size),
            ("blocks_per_repeat", self.blocks_per_repeat),
            ("repeats", self.repeats),
            ("hidden1", self.hidden1),
            ("hidden2", self.hidden2),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.stride > self.filter_len {
            return Err(Error::Config(format!(
                "stride {} exceeds filter_len {}",
                self.stride, self.filter_len
            )));
        }
        if self.classes != 2 {
            return Err(Error::Config(format!(
                "classes must be 2, got {}",
                self.classes
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold {} not in (0, 1)",
                self.threshold
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if self.blocks_per_repeat > 24 {
            return Err(Error::Config(
                "blocks_per_repeat above 24 overflows dilation".into(),
            ));
        }
        if self.causal && self.norm_mode == NormMode::Gln {
            return Err(Error::Config("causal models cannot use gLN".into()));
        }
        Ok(())
    }

    pub fn block_count(&self) -> usize {
        self.blocks_per_repeat * self.repeats
    }

    /// Dilation of block `index` in repeat-major order.
    pub fn dilation(&self, index: usize) -> usize {
        1 << (index % self.blocks_per_repeat)
    }

    /// `(left, right)` zero padding that keeps the frame count of block `index`.
    pub fn block_padding(&self, index: usize) -> (usize, usize) {
        let total = (self.kernel_size - 1) * self.dilation(index);
        if self.causal {
            (total, 0)
        } else {
            (total / 2, total - total / 2)
        }
    }

    /// Channel count entering the classifier.
    pub fn feature_channels(&self) -> usize {
        match self.features_mode {
            FeaturesMode::Multiscale => self.block_count() * self.skip_channels,
            FeaturesMode::LastLayer => self.skip_channels,
        }
    }

    /// Encoder frames produced from `samples` samples.
    pub fn frames(&self, samples: usize) -> Option<usize> {
        (samples >= self.filter_len).then(|| (samples - self.filter_len) / self.stride + 1)
    }

    pub fn seconds_to_samples(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate as f64).round() as usize
    }
}

/// Span in frames that can influence one extractor output frame:
/// `1 + R·(K−1)·(2^M − 1)`.
pub fn receptive_field(config: &ModelConfig) -> usize {
    1 + config.repeats * (config.kernel_size - 1) * ((1usize << config.blocks_per_repeat) - 1)
}

/// Trainable scalars implied by `config`.
pub fn param_count(config: &ModelConfig) -> usize {
    let norm = |c: usize| {
        if config.norm_mode == NormMode::None {
            0
        } else {
            2 * c
        }
    };
    let (n, e, h, p, k) = (
        config.filters,
        config.bottleneck_channels,
        config.hidden_channels,
        config.skip_channels,
        config.kernel_size,
    );
    let encoder = n * config.filter_len;
    let bottleneck = norm(n) + n * e + e;
    let block = (e * h + h) + 1 + norm(h) + (h * k + h) + 1 + norm(h) + (h * e + e) + (h * p + p);
    let d = config.feature_channels();
    let classifier = (d * config.hidden1 + config.hidden1)
        + (config.hidden1 * config.hidden2 + config.hidden2)
        + (config.hidden2 * config.classes + config.classes);
    encoder + bottleneck + config.block_count() * block + classifier
}
