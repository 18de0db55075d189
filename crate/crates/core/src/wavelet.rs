//! Continuous-wavelet band filter used by the cyclicity detector.
//!
//! The filter correlates an input sequence with Ricker (Mexican hat)
//! wavelets at dyadic scales `base_scale^m`, evaluates one coefficient per
//! input position (translation centers step by `base_translation` samples),
//! and averages the coefficients across the scale set. Each kernel row is
//! mean-corrected over the window extent before the `1/sqrt(a)` scaling, so
//! the filter maps constant inputs to zero everywhere, including at the
//! window boundaries where a truncated wavelet would otherwise leave a DC
//! residue. The operator is linear and its output has the input's length.
//!
//! With the defaults (`base_scale` 2, indices {2, 3, 4}) the passband covers
//! roughly 0.7-2.8 Hz at a 50 Hz sample rate, bracketing walking cadence.

use crate::detect::DetectError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MotherWavelet {
    #[default]
    #[serde(rename = "ricker")]
    Ricker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveletConfig {
    /// Scale base `a0`; scales are `a0^m` for each index `m`. Must be > 1.
    #[serde(default = "default_base_scale")]
    pub base_scale: f64,
    /// Translation step `b0` in samples. Must be > 0.
    #[serde(default = "default_base_translation")]
    pub base_translation: f64,
    /// Scale exponents `m`; the transform is averaged across them.
    #[serde(default = "default_scale_indices")]
    pub scale_indices: Vec<u32>,
    #[serde(default)]
    pub mother_wavelet: MotherWavelet,
}

fn default_base_scale() -> f64 {
    2.0
}

fn default_base_translation() -> f64 {
    1.0
}

fn default_scale_indices() -> Vec<u32> {
    vec![2, 3, 4]
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            base_scale: default_base_scale(),
            base_translation: default_base_translation(),
            scale_indices: default_scale_indices(),
            mother_wavelet: MotherWavelet::Ricker,
        }
    }
}

impl WaveletConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.base_scale.is_finite() && self.base_scale > 1.0) {
            return Err(DetectError::InvalidParams(format!(
                "wavelet base_scale {} must be > 1",
                self.base_scale
            )));
        }
        if !(self.base_translation.is_finite() && self.base_translation > 0.0) {
            return Err(DetectError::InvalidParams(format!(
                "wavelet base_translation {} must be > 0",
                self.base_translation
            )));
        }
        if self.scale_indices.is_empty() {
            return Err(DetectError::InvalidParams(
                "wavelet scale_indices must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// Ricker (Mexican hat) mother wavelet, L2-normalized. Real-valued, so the
/// conjugate in the transform is the identity.
pub fn ricker(t: f64) -> f64 {
    let norm = 2.0 / (3.0f64.sqrt() * std::f64::consts::PI.powf(0.25));
    norm * (1.0 - t * t) * (-0.5 * t * t).exp()
}

/// A filter bank precomputed for one window length.
///
/// Building the kernel costs O(len^2 * scales); applying it costs O(len^2).
/// The detector builds one per window size and reuses it for every window,
/// which is what keeps corpus-scale grid searches cheap.
#[derive(Debug, Clone)]
pub struct WaveletFilter {
    len: usize,
    // Row-major [translation][input] combined kernel, already averaged
    // across scales and mean-corrected per row.
    kernel: Vec<f64>,
}

impl WaveletFilter {
    pub fn new(cfg: &WaveletConfig, len: usize) -> Result<Self, DetectError> {
        cfg.validate()?;
        if len < 2 {
            return Err(DetectError::SequenceTooShort { len });
        }
        let mut scales: Vec<u32> = cfg.scale_indices.clone();
        scales.sort_unstable();
        scales.dedup();

        let mut kernel = vec![0.0f64; len * len];
        let mut row_values = vec![0.0f64; len];
        for &m in &scales {
            let a = cfg.base_scale.powi(m as i32);
            let norm = 1.0 / (a.sqrt() * scales.len() as f64);
            for n in 0..len {
                let center = n as f64 * cfg.base_translation;
                let mut sum = 0.0;
                for (i, value) in row_values.iter_mut().enumerate() {
                    let v = ricker((i as f64 - center) / a);
                    *value = v;
                    sum += v;
                }
                let mean = sum / len as f64;
                let row = &mut kernel[n * len..(n + 1) * len];
                for (slot, value) in row.iter_mut().zip(&row_values) {
                    *slot += (value - mean) * norm;
                }
            }
        }
        Ok(Self { len, kernel })
    }

    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn apply(&self, seq: &[f64]) -> Result<Vec<f64>, DetectError> {
        if seq.len() != self.len {
            return Err(DetectError::SequenceLengthMismatch {
                expected: self.len,
                got: seq.len(),
            });
        }
        Ok((0..self.len)
            .map(|n| {
                self.kernel[n * self.len..(n + 1) * self.len]
                    .iter()
                    .zip(seq)
                    .map(|(k, x)| k * x)
                    .sum()
            })
            .collect())
    }
}

/// One-shot filter application; builds the kernel for `seq.len()` and
/// applies it. Prefer [`WaveletFilter`] when filtering many windows of the
/// same length.
pub fn wavelet_filter(seq: &[f64], cfg: &WaveletConfig) -> Result<Vec<f64>, DetectError> {
    WaveletFilter::new(cfg, seq.len())?.apply(seq)
}
