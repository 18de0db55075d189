//! Accelerometer trace ingestion: sample and trace types, the CSV trace
//! format, and window segmentation.
//!
//! The on-disk trace format is a one-line metadata prologue, a fixed column
//! header, and decimal data rows:
//!
//! ```text
//! # rate_hz=50,label_ms=21000
//! t_ms,ax,ay,az
//! 0,0.012000000,-0.034000000,9.810000000
//! 20,0.008000000,-0.031000000,9.812000000
//! ```
//!
//! `label_ms` is optional and marks the ground-truth check-out time of a
//! labeled trace. A trace without it is treated as a no-check-out recording.

use thiserror::Error;

/// Fractional tolerance on inter-sample gaps relative to the nominal period.
/// Real phone sensors jitter; exact spacing would reject genuine recordings.
pub const JITTER_TOLERANCE: f64 = 0.20;

/// Exact column header of the trace CSV format.
pub const TRACE_CSV_HEADER: &str = "t_ms,ax,ay,az";

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("trace is not valid UTF-8")]
    NotUtf8,
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("sample {index}: t_ms not strictly increasing")]
    NonMonotonicTime { index: usize },
    #[error("sample {index}: negative timestamp")]
    NegativeTime { index: usize },
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("sample {index}: gap of {gap_ms} ms outside +/-20% of nominal {nominal_ms} ms")]
    RateMismatch {
        index: usize,
        gap_ms: i64,
        nominal_ms: f64,
    },
    #[error("sample {index}: non-finite acceleration")]
    NonFiniteSample { index: usize },
    #[error("invalid sample rate {0} Hz")]
    InvalidRate(f64),
    #[error("label {label_ms} ms lies outside the trace time range")]
    LabelOutOfRange { label_ms: i64 },
    #[error("window of {samples} samples is too short; need at least 2")]
    WindowTooShort { samples: usize },
}

/// One tri-axial accelerometer reading in m/s^2, gravity included (raw
/// device convention), timestamped in milliseconds since trace start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSample {
    pub t_ms: i64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl AccelSample {
    pub fn new(t_ms: i64, ax: f64, ay: f64, az: f64) -> Self {
        Self { t_ms, ax, ay, az }
    }
}

/// A validated accelerometer recording at a fixed nominal sample rate.
///
/// Invariants enforced at construction: timestamps non-negative and strictly
/// increasing, consecutive gaps within [`JITTER_TOLERANCE`] of the nominal
/// period, all accelerations finite, and the label (when present) inside the
/// recorded time range. Instances are immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelTrace {
    sample_rate_hz: f64,
    samples: Vec<AccelSample>,
    label_ms: Option<i64>,
}

impl AccelTrace {
    pub fn new(
        sample_rate_hz: f64,
        samples: Vec<AccelSample>,
        label_ms: Option<i64>,
    ) -> Result<Self, TraceError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(TraceError::InvalidRate(sample_rate_hz));
        }
        if samples.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        let nominal_ms = 1000.0 / sample_rate_hz;
        let lo = nominal_ms * (1.0 - JITTER_TOLERANCE) - 1e-9;
        let hi = nominal_ms * (1.0 + JITTER_TOLERANCE) + 1e-9;
        for (index, s) in samples.iter().enumerate() {
            if !(s.ax.is_finite() && s.ay.is_finite() && s.az.is_finite()) {
                return Err(TraceError::NonFiniteSample { index });
            }
            if s.t_ms < 0 {
                return Err(TraceError::NegativeTime { index });
            }
            if index > 0 {
                let gap_ms = s.t_ms - samples[index - 1].t_ms;
                if gap_ms <= 0 {
                    return Err(TraceError::NonMonotonicTime { index });
                }
                if (gap_ms as f64) < lo || (gap_ms as f64) > hi {
                    return Err(TraceError::RateMismatch {
                        index,
                        gap_ms,
                        nominal_ms,
                    });
                }
            }
        }
        if let Some(label_ms) = label_ms {
            let first = samples[0].t_ms;
            let last = samples[samples.len() - 1].t_ms;
            if label_ms < first || label_ms > last {
                return Err(TraceError::LabelOutOfRange { label_ms });
            }
        }
        Ok(Self {
            sample_rate_hz,
            samples,
            label_ms,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &[AccelSample] {
        &self.samples
    }

    /// Ground-truth check-out time, if this trace is labeled.
    pub fn label_ms(&self) -> Option<i64> {
        self.label_ms
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        // Construction rejects empty traces.
        false
    }

    /// Nominal milliseconds between consecutive samples.
    pub fn nominal_period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }

    pub fn first_ms(&self) -> i64 {
        self.samples[0].t_ms
    }

    pub fn last_ms(&self) -> i64 {
        self.samples[self.samples.len() - 1].t_ms
    }

    /// Copy of the trace keeping only samples strictly before `t_ms`, with
    /// the label cleared. Used to derive no-check-out recordings from
    /// labeled ones.
    pub fn truncated_before(&self, t_ms: i64) -> Result<AccelTrace, TraceError> {
        let samples = self
            .samples
            .iter()
            .copied()
            .take_while(|s| s.t_ms < t_ms)
            .collect();
        AccelTrace::new(self.sample_rate_hz, samples, None)
    }
}

/// A contiguous view over one detector window of samples.
///
/// `end_ms` is the nominal exclusive end (`t_ms` of the last sample plus one
/// nominal period), so consecutive windows tile the timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub index: usize,
    pub samples: &'a [AccelSample],
    pub start_ms: i64,
    pub end_ms: i64,
}

/// Number of samples in a window of `l_seconds` at `sample_rate_hz`.
pub fn window_sample_count(l_seconds: f64, sample_rate_hz: f64) -> Result<usize, TraceError> {
    let w = (l_seconds * sample_rate_hz).round();
    if !w.is_finite() || w < 2.0 {
        return Err(TraceError::WindowTooShort {
            samples: if w.is_finite() && w > 0.0 {
                w as usize
            } else {
                0
            },
        });
    }
    Ok(w as usize)
}

/// Tile the trace prefix with consecutive, non-overlapping windows of width
/// `l_seconds`. A trailing partial window is discarded rather than padded,
/// since padding would bias the powered average downward.
pub fn segment_windows(trace: &AccelTrace, l_seconds: f64) -> Result<Vec<Window<'_>>, TraceError> {
    segment_windows_strided(trace, l_seconds, None)
}

/// As [`segment_windows`] but with an explicit stride in samples
/// (`None` means stride = window width). Overlapping strides exist for
/// experimentation only; the detector always tiles.
pub fn segment_windows_strided(
    trace: &AccelTrace,
    l_seconds: f64,
    stride: Option<usize>,
) -> Result<Vec<Window<'_>>, TraceError> {
    let width = window_sample_count(l_seconds, trace.sample_rate_hz())?;
    let stride = stride.unwrap_or(width).max(1);
    let period_ms = trace.nominal_period_ms().round() as i64;
    let samples = trace.samples();
    let mut windows = Vec::with_capacity(samples.len() / stride + 1);
    let mut start = 0usize;
    let mut index = 0usize;
    while start + width <= samples.len() {
        let slice = &samples[start..start + width];
        windows.push(Window {
            index,
            samples: slice,
            start_ms: slice[0].t_ms,
            end_ms: slice[width - 1].t_ms + period_ms,
        });
        index += 1;
        start += stride;
    }
    Ok(windows)
}

/// Parse a trace from the CSV format documented at module level.
pub fn parse_trace_csv(bytes: &[u8]) -> Result<AccelTrace, TraceError> {
    let text = std::str::from_utf8(bytes).map_err(|_| TraceError::NotUtf8)?;
    let mut lines = text.lines();

    let prologue = lines.next().ok_or(TraceError::MalformedHeader {
        line: 1,
        reason: "missing prologue line".into(),
    })?;
    let (sample_rate_hz, label_ms) = parse_prologue(prologue)?;

    let header = lines.next().ok_or(TraceError::MalformedHeader {
        line: 2,
        reason: "missing column header".into(),
    })?;
    if header.trim() != TRACE_CSV_HEADER {
        return Err(TraceError::MalformedHeader {
            line: 2,
            reason: format!("expected `{TRACE_CSV_HEADER}`, got `{}`", header.trim()),
        });
    }

    let mut samples = Vec::new();
    for (offset, row) in lines.enumerate() {
        let line = offset + 3;
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(TraceError::MalformedRow {
                line,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let t_ms: i64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| TraceError::MalformedRow {
                line,
                reason: format!("t_ms `{}` is not an integer", fields[0].trim()),
            })?;
        let mut axes = [0.0f64; 3];
        for (k, axis) in axes.iter_mut().enumerate() {
            *axis = fields[k + 1]
                .trim()
                .parse()
                .map_err(|_| TraceError::MalformedRow {
                    line,
                    reason: format!("field `{}` is not numeric", fields[k + 1].trim()),
                })?;
        }
        samples.push(AccelSample::new(t_ms, axes[0], axes[1], axes[2]));
    }

    AccelTrace::new(sample_rate_hz, samples, label_ms)
}

fn parse_prologue(line: &str) -> Result<(f64, Option<i64>), TraceError> {
    let err = |reason: String| TraceError::MalformedHeader { line: 1, reason };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| err("prologue must start with `#`".into()))?
        .trim();
    let mut rate = None;
    let mut label = None;
    for entry in body.split(',') {
        let (key, value) = entry
            .trim()
            .split_once('=')
            .ok_or_else(|| err(format!("entry `{}` is not key=value", entry.trim())))?;
        match key.trim() {
            "rate_hz" => {
                let v: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("rate_hz `{}` is not numeric", value.trim())))?;
                rate = Some(v);
            }
            "label_ms" => {
                let v: i64 = value
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("label_ms `{}` is not an integer", value.trim())))?;
                label = Some(v);
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    let rate = rate.ok_or_else(|| err("missing rate_hz".into()))?;
    Ok((rate, label))
}

/// Serialize a trace to the CSV format. Timestamps are exact; accelerations
/// are written with 9 decimal digits, which is what the round-trip contract
/// guarantees.
pub fn serialize_trace_csv(trace: &AccelTrace) -> String {
    use std::fmt::Write;

    let mut out = String::with_capacity(trace.len() * 48 + 64);
    match trace.label_ms() {
        Some(label) => {
            let _ = writeln!(
                out,
                "# rate_hz={},label_ms={}",
                trace.sample_rate_hz(),
                label
            );
        }
        None => {
            let _ = writeln!(out, "# rate_hz={}", trace.sample_rate_hz());
        }
    }
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for s in trace.samples() {
        let _ = writeln!(out, "{},{:.9},{:.9},{:.9}", s.t_ms, s.ax, s.ay, s.az);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows(n: usize, gap_ms: i64) -> Vec<AccelSample> {
        (0..n)
            .map(|i| AccelSample::new(i as i64 * gap_ms, 0.1 * i as f64, -0.2, 9.81))
            .collect()
    }

    #[test]
    fn parse_rejects_empty_trace() {
        let text = "# rate_hz=50\nt_ms,ax,ay,az\n";
        assert_eq!(
            parse_trace_csv(text.as_bytes()),
            Err(TraceError::EmptyTrace)
        );
    }

    #[test]
    fn parse_rejects_duplicate_timestamp() {
        let text = "# rate_hz=50\nt_ms,ax,ay,az\n20,0,0,9.81\n20,0,0,9.81\n";
        assert_eq!(
            parse_trace_csv(text.as_bytes()),
            Err(TraceError::NonMonotonicTime { index: 1 })
        );
    }

    #[test]
    fn parse_rejects_non_numeric_field() {
        let text = "# rate_hz=50\nt_ms,ax,ay,az\n0,zero,0,9.81\n";
        assert!(matches!(
            parse_trace_csv(text.as_bytes()),
            Err(TraceError::MalformedRow { line: 3, .. })
        ));
    }

    #[test]
    fn parse_rejects_gap_outside_jitter_tolerance() {
        // 40 ms gap against a 20 ms nominal period.
        let text = "# rate_hz=50\nt_ms,ax,ay,az\n0,0,0,9.81\n40,0,0,9.81\n";
        assert!(matches!(
            parse_trace_csv(text.as_bytes()),
            Err(TraceError::RateMismatch {
                index: 1,
                gap_ms: 40,
                ..
            })
        ));
    }

    #[test]
    fn parse_recovers_programmatic_trace_field_by_field() {
        // Independent construction of the file text, then a field-by-field
        // comparison of the parse result against the constructor inputs.
        let mut text = String::from("# rate_hz=50,label_ms=1200\nt_ms,ax,ay,az\n");
        let rows: Vec<(i64, f64, f64, f64)> = (0..100)
            .map(|i| {
                (
                    20 * i as i64,
                    0.25 * i as f64,
                    -1.5,
                    9.81 + 0.001 * i as f64,
                )
            })
            .collect();
        for (t, ax, ay, az) in &rows {
            text.push_str(&format!("{t},{ax},{ay},{az}\n"));
        }
        let trace = parse_trace_csv(text.as_bytes()).unwrap();
        assert_eq!(trace.sample_rate_hz(), 50.0);
        assert_eq!(trace.label_ms(), Some(1200));
        assert_eq!(trace.len(), 100);
        for (s, (t, ax, ay, az)) in trace.samples().iter().zip(&rows) {
            assert_eq!(s.t_ms, *t);
            assert_eq!(s.ax, *ax);
            assert_eq!(s.ay, *ay);
            assert_eq!(s.az, *az);
        }
    }

    #[test]
    fn trace_rejects_label_outside_range() {
        let err = AccelTrace::new(50.0, sample_rows(10, 20), Some(500)).unwrap_err();
        assert_eq!(err, TraceError::LabelOutOfRange { label_ms: 500 });
    }

    #[test]
    fn round_trip_preserves_trace() {
        let trace = AccelTrace::new(50.0, sample_rows(64, 20), Some(600)).unwrap();
        let parsed = parse_trace_csv(serialize_trace_csv(&trace).as_bytes()).unwrap();
        assert_eq!(parsed.sample_rate_hz(), trace.sample_rate_hz());
        assert_eq!(parsed.label_ms(), trace.label_ms());
        for (a, b) in parsed.samples().iter().zip(trace.samples()) {
            assert_eq!(a.t_ms, b.t_ms);
            assert!((a.ax - b.ax).abs() <= 5e-10);
            assert!((a.ay - b.ay).abs() <= 5e-10);
            assert!((a.az - b.az).abs() <= 5e-10);
        }
    }

    #[test]
    fn segment_exact_tiling_single_window() {
        let trace = AccelTrace::new(50.0, sample_rows(100, 20), None).unwrap();
        let windows = segment_windows(&trace, 2.0).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].samples.len(), 100);
        assert_eq!(windows[0].start_ms, 0);
        assert_eq!(windows[0].end_ms, 2000);
    }

    #[test]
    fn segment_discards_trailing_partial_window() {
        let trace = AccelTrace::new(50.0, sample_rows(250, 20), None).unwrap();
        let windows = segment_windows(&trace, 2.0).unwrap();
        assert_eq!(windows.len(), 2);
        assert!(windows.iter().all(|w| w.samples.len() == 100));
    }

    #[test]
    fn segment_start_times_follow_index_arithmetic() {
        let trace = AccelTrace::new(50.0, sample_rows(10_000, 20), None).unwrap();
        let windows = segment_windows(&trace, 4.0).unwrap();
        assert_eq!(windows.len(), 50);
        // Oracle: start_ms must be the arithmetic progression i * 4000.
        for (i, w) in windows.iter().enumerate() {
            assert_eq!(w.start_ms, 4000 * i as i64);
            assert_eq!(w.index, i);
        }
    }

    #[test]
    fn segment_rejects_sub_two_sample_windows() {
        let trace = AccelTrace::new(50.0, sample_rows(100, 20), None).unwrap();
        assert!(matches!(
            segment_windows(&trace, 0.02),
            Err(TraceError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn strided_windows_can_overlap() {
        let trace = AccelTrace::new(50.0, sample_rows(200, 20), None).unwrap();
        let windows = segment_windows_strided(&trace, 2.0, Some(50)).unwrap();
        assert_eq!(windows.len(), 3);
        assert_eq!(windows[1].start_ms, 1000);
    }

    #[test]
    fn truncated_before_drops_label_and_tail() {
        let trace = AccelTrace::new(50.0, sample_rows(100, 20), Some(1000)).unwrap();
        let head = trace.truncated_before(1000).unwrap();
        assert_eq!(head.label_ms(), None);
        assert_eq!(head.len(), 50);
        assert!(head.last_ms() < 1000);
    }
}
