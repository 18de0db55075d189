//! Joint volatility + cyclicity check-out detection over sample windows.
//!
//! Per window the detector derives the per-sample powered magnitude
//! `ax^k + ay^k + az^k` (k even, so the statistic is non-negative and
//! orientation-robust) and classifies along two independent axes:
//!
//! * volatility: the powered average of the window must exceed
//!   `volatility_threshold`;
//! * cyclicity: the wavelet-filtered powered sequence must contain more than
//!   `crest_threshold` crests (strict local maxima above `peak_value`,
//!   thinned to a minimum spacing of `peak_interval` samples).
//!
//! A window counts as a check-out window only when both fire. A check-out
//! event triggers at the first window where the run of consecutive check-out
//! windows strictly exceeds `continuation_threshold`; an in-venue window
//! resets the run to zero.
//!
//! Two equivalent drive modes exist: [`detect_trace`] classifies a segmented
//! trace in one pass, while [`DetectorState::step`] consumes one sample at a
//! time. They must produce structurally identical results.

use crate::trace::{
    segment_windows, window_sample_count, AccelSample, AccelTrace, TraceError, Window,
};
use crate::wavelet::{WaveletConfig, WaveletFilter};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("power {0} must be even")]
    OddPower(u32),
    #[error("window is empty")]
    EmptyWindow,
    #[error("sequence of length {len} is too short to filter; need at least 2")]
    SequenceTooShort { len: usize },
    #[error("filter was built for length {expected}, got {got}")]
    SequenceLengthMismatch { expected: usize, got: usize },
    #[error("sample at {t_ms} ms arrived out of order (last was {last_ms} ms)")]
    OutOfOrderSample { t_ms: i64, last_ms: i64 },
    #[error("invalid detector parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Every tunable of the window classifier and trigger logic.
///
/// Serialized as JSON with exactly these keys; `power` and `wavelet` default
/// when omitted. Volatility thresholds are relative to the sensor's units
/// and normalization (here m/s^2 with gravity included), so values tuned on
/// one corpus do not transfer to another convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    /// Window width `l` in seconds.
    pub window_seconds: f64,
    /// Even power `k` applied per axis reading. 4 works well in practice.
    #[serde(default = "default_power")]
    pub power: u32,
    /// Volatility threshold `L_a` on the powered average.
    pub volatility_threshold: f64,
    /// Crest-count threshold `L_p`; cyclicity fires when the count exceeds it.
    pub crest_threshold: u32,
    /// Trigger threshold `L_w` on the run of consecutive check-out windows.
    pub continuation_threshold: u32,
    /// Minimum crest height `p_v` on the filtered sequence.
    pub peak_value: f64,
    /// Minimum spacing `p_i` between kept crests, in samples.
    pub peak_interval: u32,
    #[serde(default)]
    pub wavelet: WaveletConfig,
}

pub(crate) fn default_power() -> u32 {
    4
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        validate_power(self.power)?;
        if !(self.window_seconds.is_finite() && self.window_seconds > 0.0) {
            return Err(DetectError::InvalidParams(format!(
                "window_seconds {} must be > 0",
                self.window_seconds
            )));
        }
        if !(self.volatility_threshold.is_finite() && self.volatility_threshold > 0.0) {
            return Err(DetectError::InvalidParams(format!(
                "volatility_threshold {} must be > 0",
                self.volatility_threshold
            )));
        }
        if self.continuation_threshold < 1 {
            return Err(DetectError::InvalidParams(
                "continuation_threshold must be >= 1".into(),
            ));
        }
        if !(self.peak_value.is_finite() && self.peak_value > 0.0) {
            return Err(DetectError::InvalidParams(format!(
                "peak_value {} must be > 0",
                self.peak_value
            )));
        }
        if self.peak_interval < 1 {
            return Err(DetectError::InvalidParams(
                "peak_interval must be >= 1".into(),
            ));
        }
        self.wavelet.validate()
    }

    /// Default evaluation tolerance after a true label: the trigger needs
    /// `continuation_threshold + 1` full windows plus up to one window of
    /// phase misalignment, so allow `(L_w + 2) * l`.
    pub fn default_tolerance_ms(&self) -> i64 {
        ((self.continuation_threshold as f64 + 2.0) * self.window_seconds * 1000.0).round() as i64
    }

    /// Operating point reported for instrumented taxi rides (50 Hz).
    /// The volatility threshold presumes that study's sensor normalization;
    /// re-tune before applying to data with a different convention.
    pub fn taxi_reference() -> Self {
        Self {
            window_seconds: 2.0,
            power: 4,
            volatility_threshold: 120.0,
            crest_threshold: 2,
            continuation_threshold: 3,
            peak_value: 10.0,
            peak_interval: 10,
            wavelet: WaveletConfig::default(),
        }
    }

    /// Operating point reported for instrumented canteen visits (50 Hz).
    /// Same normalization caveat as [`DetectorParams::taxi_reference`].
    pub fn canteen_reference() -> Self {
        Self {
            window_seconds: 4.0,
            power: 4,
            volatility_threshold: 20.0,
            crest_threshold: 2,
            continuation_threshold: 6,
            peak_value: 10.0,
            peak_interval: 10,
            wavelet: WaveletConfig::default(),
        }
    }
}

fn validate_power(power: u32) -> Result<(), DetectError> {
    if !power.is_multiple_of(2) {
        return Err(DetectError::OddPower(power));
    }
    if power < 2 {
        return Err(DetectError::InvalidParams(format!(
            "power {power} must be >= 2"
        )));
    }
    Ok(())
}

/// Powered average of a window: mean over samples of
/// `ax^k + ay^k + az^k`. Non-negative for even `k`.
pub fn powered_average(window: &Window<'_>, power: u32) -> Result<f64, DetectError> {
    validate_power(power)?;
    if window.samples.is_empty() {
        return Err(DetectError::EmptyWindow);
    }
    let k = power as i32;
    let sum: f64 = window
        .samples
        .iter()
        .map(|s| s.ax.powi(k) + s.ay.powi(k) + s.az.powi(k))
        .sum();
    Ok(sum / window.samples.len() as f64)
}

/// Per-sample powered magnitude sequence `ax^k + ay^k + az^k`, the input of
/// the cyclicity path.
pub fn powered_magnitudes(samples: &[AccelSample], power: u32) -> Result<Vec<f64>, DetectError> {
    validate_power(power)?;
    if samples.is_empty() {
        return Err(DetectError::EmptyWindow);
    }
    let k = power as i32;
    Ok(samples
        .iter()
        .map(|s| s.ax.powi(k) + s.ay.powi(k) + s.az.powi(k))
        .collect())
}

/// Count crests: strict local maxima above `peak_value`, thinned so that no
/// two kept crests are closer than `peak_interval` samples. When maxima
/// conflict, the larger one wins (greedy by descending height, ties broken
/// toward the earlier index).
pub fn count_crests(seq: &[f64], peak_value: f64, peak_interval: u32) -> usize {
    let mut maxima: Vec<(usize, f64)> = Vec::new();
    for i in 1..seq.len().saturating_sub(1) {
        if seq[i] > peak_value && seq[i] > seq[i - 1] && seq[i] > seq[i + 1] {
            maxima.push((i, seq[i]));
        }
    }
    maxima.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let min_gap = i64::from(peak_interval.max(1));
    let mut kept: Vec<i64> = Vec::new();
    for (index, _) in maxima {
        let index = index as i64;
        if kept.iter().all(|&k| (index - k).abs() >= min_gap) {
            kept.push(index);
        }
    }
    kept.len()
}

/// Outcome of classifying one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVerdict {
    pub window_index: usize,
    /// The volatility statistic (powered average).
    pub powered_average: f64,
    /// The cyclicity statistic (crest count on the filtered sequence).
    pub crest_count: usize,
    pub volatility_positive: bool,
    pub cyclicity_positive: bool,
    /// Conjunction of the two detectors.
    pub is_checkout: bool,
}

/// Classify one window against `params`, building the wavelet kernel for
/// this window's length. Batch and streaming paths use
/// [`classify_window_with`] with a cached kernel instead.
pub fn classify_window(
    window: &Window<'_>,
    params: &DetectorParams,
) -> Result<WindowVerdict, DetectError> {
    params.validate()?;
    let filter = WaveletFilter::new(&params.wavelet, window.samples.len())?;
    classify_window_with(window, params, &filter)
}

/// Classification core with a prebuilt filter.
pub fn classify_window_with(
    window: &Window<'_>,
    params: &DetectorParams,
    filter: &WaveletFilter,
) -> Result<WindowVerdict, DetectError> {
    let powered = powered_magnitudes(window.samples, params.power)?;
    let powered_average = powered.iter().sum::<f64>() / powered.len() as f64;
    let filtered = filter.apply(&powered)?;
    let crest_count = count_crests(&filtered, params.peak_value, params.peak_interval);
    let volatility_positive = powered_average > params.volatility_threshold;
    let cyclicity_positive = crest_count > params.crest_threshold as usize;
    Ok(WindowVerdict {
        window_index: window.index,
        powered_average,
        crest_count,
        volatility_positive,
        cyclicity_positive,
        is_checkout: volatility_positive && cyclicity_positive,
    })
}

/// The one-shot check-out event emitted by the streaming detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckoutEvent {
    /// Index of the window whose classification made the run exceed the
    /// continuation threshold.
    pub window_index: usize,
    /// Nominal end time of that window.
    pub trigger_time_ms: i64,
}

/// Streaming detector state: buffers samples into one window at a time,
/// classifies when the buffer fills, and tracks the consecutive check-out
/// run. Emits at most one [`CheckoutEvent`] per lifetime; [`DetectorState::reset`]
/// re-arms it for the next venue session. One stream per instance; instances
/// are independent and may live on different threads.
#[derive(Debug, Clone)]
pub struct DetectorState {
    params: DetectorParams,
    filter: WaveletFilter,
    window_samples: usize,
    period_ms: i64,
    buffer: Vec<AccelSample>,
    consecutive_out: u32,
    triggered: bool,
    windows_emitted: usize,
    last_t_ms: Option<i64>,
    last_verdict: Option<WindowVerdict>,
}

impl DetectorState {
    pub fn new(params: DetectorParams, sample_rate_hz: f64) -> Result<Self, DetectError> {
        params.validate()?;
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DetectError::InvalidParams(format!(
                "sample rate {sample_rate_hz} must be > 0"
            )));
        }
        let window_samples = window_sample_count(params.window_seconds, sample_rate_hz)?;
        let filter = WaveletFilter::new(&params.wavelet, window_samples)?;
        Ok(Self {
            params,
            filter,
            window_samples,
            period_ms: (1000.0 / sample_rate_hz).round() as i64,
            buffer: Vec::with_capacity(window_samples),
            consecutive_out: 0,
            triggered: false,
            windows_emitted: 0,
            last_t_ms: None,
            last_verdict: None,
        })
    }

    /// Feed one sample. Returns the check-out event exactly once, at the
    /// first window where the consecutive run strictly exceeds the
    /// continuation threshold.
    pub fn step(&mut self, sample: AccelSample) -> Result<Option<CheckoutEvent>, DetectError> {
        if let Some(last_ms) = self.last_t_ms {
            if sample.t_ms <= last_ms {
                return Err(DetectError::OutOfOrderSample {
                    t_ms: sample.t_ms,
                    last_ms,
                });
            }
        }
        self.last_t_ms = Some(sample.t_ms);
        self.buffer.push(sample);
        if self.buffer.len() < self.window_samples {
            return Ok(None);
        }

        let (verdict, end_ms) = {
            let window = Window {
                index: self.windows_emitted,
                samples: &self.buffer,
                start_ms: self.buffer[0].t_ms,
                end_ms: self.buffer[self.window_samples - 1].t_ms + self.period_ms,
            };
            (
                classify_window_with(&window, &self.params, &self.filter)?,
                window.end_ms,
            )
        };
        self.buffer.clear();
        self.windows_emitted += 1;
        if verdict.is_checkout {
            self.consecutive_out += 1;
        } else {
            self.consecutive_out = 0;
        }
        let window_index = verdict.window_index;
        self.last_verdict = Some(verdict);

        if !self.triggered && self.consecutive_out > self.params.continuation_threshold {
            self.triggered = true;
            return Ok(Some(CheckoutEvent {
                window_index,
                trigger_time_ms: end_ms,
            }));
        }
        Ok(None)
    }

    /// Re-arm the detector for a new session.
    pub fn reset(&mut self) {
        self.buffer.clear();
        self.consecutive_out = 0;
        self.triggered = false;
        self.windows_emitted = 0;
        self.last_t_ms = None;
        self.last_verdict = None;
    }

    pub fn params(&self) -> &DetectorParams {
        &self.params
    }

    pub fn window_samples(&self) -> usize {
        self.window_samples
    }

    /// Current consecutive check-out run `C_w`.
    pub fn consecutive_out(&self) -> u32 {
        self.consecutive_out
    }

    pub fn triggered(&self) -> bool {
        self.triggered
    }

    pub fn windows_emitted(&self) -> usize {
        self.windows_emitted
    }

    /// Verdict of the most recently completed window.
    pub fn last_verdict(&self) -> Option<&WindowVerdict> {
        self.last_verdict.as_ref()
    }
}

/// Full detection outcome over a trace: the per-window boolean sequence plus
/// the trigger, if any. `trigger_time_ms` is present iff `triggered`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub verdicts: Vec<WindowVerdict>,
    pub triggered: bool,
    pub trigger_time_ms: Option<i64>,
}

impl DetectionResult {
    pub const CSV_SUMMARY_HEADER: &'static str =
        "triggered,trigger_time_ms,windows,checkout_windows";

    /// One-line CSV summary for corpus runs.
    pub fn csv_summary(&self) -> String {
        format!(
            "{},{},{},{}",
            self.triggered,
            self.trigger_time_ms
                .map(|t| t.to_string())
                .unwrap_or_default(),
            self.verdicts.len(),
            self.verdicts.iter().filter(|v| v.is_checkout).count()
        )
    }
}

/// Index of the first window at which the consecutive check-out run strictly
/// exceeds `continuation_threshold`, scanning the boolean verdict sequence.
pub fn first_trigger_index(
    flags: impl IntoIterator<Item = bool>,
    continuation_threshold: u32,
) -> Option<usize> {
    let mut run = 0u32;
    for (i, flag) in flags.into_iter().enumerate() {
        if flag {
            run += 1;
            if run > continuation_threshold {
                return Some(i);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Batch detection: segment the trace, classify every complete window, and
/// locate the trigger from the verdict sequence. Structurally equal to
/// folding [`DetectorState::step`] over the samples
/// ([`detect_trace_streaming`]).
pub fn detect_trace(
    trace: &AccelTrace,
    params: &DetectorParams,
) -> Result<DetectionResult, DetectError> {
    params.validate()?;
    let window_samples = window_sample_count(params.window_seconds, trace.sample_rate_hz())?;
    let windows = segment_windows(trace, params.window_seconds)?;
    let filter = WaveletFilter::new(&params.wavelet, window_samples)?;
    let verdicts = windows
        .iter()
        .map(|w| classify_window_with(w, params, &filter))
        .collect::<Result<Vec<_>, _>>()?;
    let trigger_index = first_trigger_index(
        verdicts.iter().map(|v| v.is_checkout),
        params.continuation_threshold,
    );
    Ok(DetectionResult {
        triggered: trigger_index.is_some(),
        trigger_time_ms: trigger_index.map(|i| windows[i].end_ms),
        verdicts,
    })
}

/// Streaming route of [`detect_trace`]: fold `step` over all samples.
pub fn detect_trace_streaming(
    trace: &AccelTrace,
    params: &DetectorParams,
) -> Result<DetectionResult, DetectError> {
    let mut state = DetectorState::new(params.clone(), trace.sample_rate_hz())?;
    let mut verdicts = Vec::new();
    let mut trigger: Option<CheckoutEvent> = None;
    for &sample in trace.samples() {
        let before = state.windows_emitted();
        let event = state.step(sample)?;
        if state.windows_emitted() > before {
            if let Some(v) = state.last_verdict() {
                verdicts.push(v.clone());
            }
        }
        if let Some(event) = event {
            trigger.get_or_insert(event);
        }
    }
    Ok(DetectionResult {
        triggered: trigger.is_some(),
        trigger_time_ms: trigger.map(|e| e.trigger_time_ms),
        verdicts,
    })
}
