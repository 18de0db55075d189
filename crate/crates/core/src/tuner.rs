//! Corpus evaluation metrics and exhaustive parameter grid search.
//!
//! A labeled trace counts as correct when the detector triggers inside
//! `[label, label + tolerance]`; a no-check-out trace counts as correct when
//! the detector stays silent. A false positive is a trigger strictly before
//! the label, or any trigger on a no-check-out trace. Both rates are
//! per-record ratios over the whole dataset.

use crate::detect::{default_power, detect_trace, DetectError, DetectorParams};
use crate::trace::AccelTrace;
use crate::wavelet::WaveletConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TunerError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("tolerance must be non-negative, got {0} ms")]
    NegativeTolerance(i64),
    #[error("grid axis `{0}` has no values")]
    EmptyGridAxis(&'static str),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// A named evaluation corpus. Traces with a label carry a ground-truth
/// check-out time; traces without one are no-check-out recordings.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    name: String,
    traces: Vec<AccelTrace>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, traces: Vec<AccelTrace>) -> Result<Self, TunerError> {
        if traces.is_empty() {
            return Err(TunerError::EmptyDataset);
        }
        Ok(Self {
            name: name.into(),
            traces,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn traces(&self) -> &[AccelTrace] {
        &self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        // Construction rejects empty datasets.
        false
    }
}

/// Per-trace evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOutcome {
    pub trace_index: usize,
    pub predicted_ms: Option<i64>,
    pub correct: bool,
    pub false_positive: bool,
}

/// Dataset-level accuracy and false-positive rate, both in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub fpr: f64,
    pub per_trace: Vec<TraceOutcome>,
}

/// Evaluate one parameter set over the dataset.
pub fn evaluate(
    params: &DetectorParams,
    dataset: &LabeledDataset,
    tolerance_ms: i64,
) -> Result<Metrics, TunerError> {
    if tolerance_ms < 0 {
        return Err(TunerError::NegativeTolerance(tolerance_ms));
    }
    let mut per_trace = Vec::with_capacity(dataset.len());
    let mut correct_count = 0usize;
    let mut false_positive_count = 0usize;
    for (trace_index, trace) in dataset.traces().iter().enumerate() {
        let result = detect_trace(trace, params)?;
        let predicted_ms = result.trigger_time_ms;
        let (correct, false_positive) = match trace.label_ms() {
            Some(label) => (
                matches!(predicted_ms, Some(t) if t >= label && t <= label + tolerance_ms),
                matches!(predicted_ms, Some(t) if t < label),
            ),
            None => (predicted_ms.is_none(), predicted_ms.is_some()),
        };
        correct_count += usize::from(correct);
        false_positive_count += usize::from(false_positive);
        per_trace.push(TraceOutcome {
            trace_index,
            predicted_ms,
            correct,
            false_positive,
        });
    }
    let total = dataset.len() as f64;
    Ok(Metrics {
        acc: correct_count as f64 / total,
        fpr: false_positive_count as f64 / total,
        per_trace,
    })
}

/// Value lists for the searched parameters; `power` and the wavelet are
/// fixed per run. Serialized as JSON with exactly these keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub window_seconds: Vec<f64>,
    pub volatility_threshold: Vec<f64>,
    pub crest_threshold: Vec<u32>,
    pub continuation_threshold: Vec<u32>,
    pub peak_value: Vec<f64>,
    pub peak_interval: Vec<u32>,
    #[serde(default = "default_power")]
    pub power: u32,
    #[serde(default)]
    pub wavelet: WaveletConfig,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), TunerError> {
        if self.window_seconds.is_empty() {
            return Err(TunerError::EmptyGridAxis("window_seconds"));
        }
        if self.volatility_threshold.is_empty() {
            return Err(TunerError::EmptyGridAxis("volatility_threshold"));
        }
        if self.crest_threshold.is_empty() {
            return Err(TunerError::EmptyGridAxis("crest_threshold"));
        }
        if self.continuation_threshold.is_empty() {
            return Err(TunerError::EmptyGridAxis("continuation_threshold"));
        }
        if self.peak_value.is_empty() {
            return Err(TunerError::EmptyGridAxis("peak_value"));
        }
        if self.peak_interval.is_empty() {
            return Err(TunerError::EmptyGridAxis("peak_interval"));
        }
        Ok(())
    }

    pub fn cardinality(&self) -> usize {
        self.window_seconds.len()
            * self.volatility_threshold.len()
            * self.crest_threshold.len()
            * self.continuation_threshold.len()
            * self.peak_value.len()
            * self.peak_interval.len()
    }

    /// Deterministic enumeration of every grid point, `window_seconds`
    /// outermost and `peak_interval` innermost. Tie-breaking during search
    /// follows this order.
    pub fn enumerate(&self) -> Vec<DetectorParams> {
        let mut points = Vec::with_capacity(self.cardinality());
        for &window_seconds in &self.window_seconds {
            for &volatility_threshold in &self.volatility_threshold {
                for &crest_threshold in &self.crest_threshold {
                    for &continuation_threshold in &self.continuation_threshold {
                        for &peak_value in &self.peak_value {
                            for &peak_interval in &self.peak_interval {
                                points.push(DetectorParams {
                                    window_seconds,
                                    power: self.power,
                                    volatility_threshold,
                                    crest_threshold,
                                    continuation_threshold,
                                    peak_value,
                                    peak_interval,
                                    wavelet: self.wavelet.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        points
    }
}

/// Result of [`grid_search`]: the full evaluation table in enumeration order
/// plus the winning parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    pub best: DetectorParams,
    pub table: Vec<(DetectorParams, Metrics)>,
}

/// Exhaustively evaluate every grid point. Points are independent pure
/// evaluations and run in parallel, but the output table keeps the
/// deterministic enumeration order.
///
/// Best selection: maximal accuracy, then minimal false-positive rate, then
/// minimal detection latency `continuation_threshold * window_seconds`, then
/// earliest in enumeration order.
pub fn grid_search(
    grid: &GridSpec,
    dataset: &LabeledDataset,
    tolerance_ms: i64,
) -> Result<GridSearchOutcome, TunerError> {
    grid.validate()?;
    let points = grid.enumerate();
    let table: Vec<(DetectorParams, Metrics)> = points
        .into_par_iter()
        .map(|params| evaluate(&params, dataset, tolerance_ms).map(|m| (params, m)))
        .collect::<Result<_, _>>()?;

    let mut best_index = 0usize;
    for i in 1..table.len() {
        if ranks_better(&table[i], &table[best_index]) {
            best_index = i;
        }
    }
    Ok(GridSearchOutcome {
        best: table[best_index].0.clone(),
        table,
    })
}

fn latency_seconds(params: &DetectorParams) -> f64 {
    params.continuation_threshold as f64 * params.window_seconds
}

/// Strictly-better predicate; equal candidates keep the earlier point.
fn ranks_better(
    candidate: &(DetectorParams, Metrics),
    incumbent: &(DetectorParams, Metrics),
) -> bool {
    let (cp, cm) = candidate;
    let (ip, im) = incumbent;
    if cm.acc != im.acc {
        return cm.acc > im.acc;
    }
    if cm.fpr != im.fpr {
        return cm.fpr < im.fpr;
    }
    latency_seconds(cp) < latency_seconds(ip)
}

/// CSV table of a grid-search result: one row per grid point, all searched
/// parameters plus both metrics.
pub fn grid_results_csv(table: &[(DetectorParams, Metrics)]) -> String {
    use std::fmt::Write;

    let mut out = String::from(
        "window_seconds,power,volatility_threshold,crest_threshold,continuation_threshold,peak_value,peak_interval,acc,fpr\n",
    );
    for (p, m) in table {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p.window_seconds,
            p.power,
            p.volatility_threshold,
            p.crest_threshold,
            p.continuation_threshold,
            p.peak_value,
            p.peak_interval,
            m.acc,
            m.fpr
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_corpus, generate_synthetic_trace, SynthScenario, VenueKind};
    use crate::trace::{AccelSample, AccelTrace};
    use crate::wavelet::WaveletConfig;

    fn never_triggering_params() -> DetectorParams {
        DetectorParams {
            window_seconds: 2.0,
            power: 4,
            volatility_threshold: 1e18,
            crest_threshold: 2,
            continuation_threshold: 3,
            peak_value: 1e18,
            peak_interval: 8,
            wavelet: WaveletConfig::default(),
        }
    }

    fn detecting_params() -> DetectorParams {
        DetectorParams {
            window_seconds: 2.0,
            power: 4,
            volatility_threshold: 11_000.0,
            crest_threshold: 2,
            continuation_threshold: 3,
            peak_value: 2_000.0,
            peak_interval: 8,
            wavelet: WaveletConfig::default(),
        }
    }

    fn still_trace(seconds: f64, label: Option<i64>) -> AccelTrace {
        let n = (seconds * 50.0) as usize;
        let samples: Vec<AccelSample> = (0..n)
            .map(|i| AccelSample::new(20 * i as i64, 0.0, 0.0, 9.81))
            .collect();
        AccelTrace::new(50.0, samples, label).unwrap()
    }

    fn labeled_walk_trace(in_venue: f64, seed: u64) -> AccelTrace {
        generate_synthetic_trace(&SynthScenario {
            in_venue_seconds: in_venue,
            walking_seconds: 12.0,
            venue_kind: VenueKind::CanteenLike,
            noise_level: 0.1,
            step_frequency_hz: 2.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn never_triggering_detector_is_perfect_on_no_checkout_dataset() {
        let dataset = LabeledDataset::new(
            "stills",
            vec![still_trace(20.0, None), still_trace(30.0, None)],
        )
        .unwrap();
        let metrics = evaluate(&never_triggering_params(), &dataset, 10_000).unwrap();
        assert_eq!(metrics.acc, 1.0);
        assert_eq!(metrics.fpr, 0.0);
    }

    #[test]
    fn never_triggering_detector_misses_every_labeled_trace() {
        let dataset = LabeledDataset::new(
            "walks",
            vec![labeled_walk_trace(10.0, 1), labeled_walk_trace(14.0, 2)],
        )
        .unwrap();
        let metrics = evaluate(&never_triggering_params(), &dataset, 10_000).unwrap();
        assert_eq!(metrics.acc, 0.0);
        assert_eq!(metrics.fpr, 0.0);
    }

    #[test]
    fn hand_built_dataset_yields_half_acc_quarter_fpr() {
        // Two hits, one miss, one early fire: acc 2/4, fpr 1/4.
        let hit_a = labeled_walk_trace(10.0, 11);
        let hit_b = labeled_walk_trace(16.0, 12);
        // Labeled but still throughout: the detector misses it.
        let miss = still_trace(30.0, Some(20_000));
        // Walking long before the (late) label: the trigger fires early.
        let mut early = labeled_walk_trace(6.0, 13);
        let last = early.last_ms();
        early = AccelTrace::new(50.0, early.samples().to_vec(), Some(last)).unwrap();

        let dataset = LabeledDataset::new("mixed", vec![hit_a, hit_b, miss, early]).unwrap();
        let metrics = evaluate(&detecting_params(), &dataset, 10_000).unwrap();
        assert_eq!(metrics.acc, 0.5, "{:?}", metrics.per_trace);
        assert_eq!(metrics.fpr, 0.25, "{:?}", metrics.per_trace);
    }

    #[test]
    fn evaluate_rejects_negative_tolerance() {
        let dataset = LabeledDataset::new("d", vec![still_trace(10.0, None)]).unwrap();
        assert_eq!(
            evaluate(&detecting_params(), &dataset, -1),
            Err(TunerError::NegativeTolerance(-1))
        );
    }

    #[test]
    fn dataset_rejects_empty() {
        assert_eq!(
            LabeledDataset::new("empty", vec![]).unwrap_err(),
            TunerError::EmptyDataset
        );
    }

    fn singleton_grid(params: &DetectorParams) -> GridSpec {
        GridSpec {
            window_seconds: vec![params.window_seconds],
            volatility_threshold: vec![params.volatility_threshold],
            crest_threshold: vec![params.crest_threshold],
            continuation_threshold: vec![params.continuation_threshold],
            peak_value: vec![params.peak_value],
            peak_interval: vec![params.peak_interval],
            power: params.power,
            wavelet: params.wavelet.clone(),
        }
    }

    #[test]
    fn singleton_grid_returns_that_point() {
        let params = detecting_params();
        let dataset = LabeledDataset::new("d", vec![labeled_walk_trace(8.0, 4)]).unwrap();
        let outcome = grid_search(&singleton_grid(&params), &dataset, 10_000).unwrap();
        assert_eq!(outcome.best, params);
        assert_eq!(outcome.table.len(), 1);
    }

    #[test]
    fn grid_best_matches_independent_exhaustive_argmax() {
        let corpus = generate_corpus(VenueKind::CanteenLike, 8, 71).unwrap();
        let dataset = LabeledDataset::new("c", corpus).unwrap();
        let grid = GridSpec {
            window_seconds: vec![2.0],
            volatility_threshold: vec![9_500.0, 11_000.0, 1e18],
            crest_threshold: vec![1, 2, 5],
            continuation_threshold: vec![3],
            peak_value: vec![2_000.0],
            peak_interval: vec![8],
            power: 4,
            wavelet: WaveletConfig::default(),
        };
        let tolerance = 10_000;
        let outcome = grid_search(&grid, &dataset, tolerance).unwrap();

        // Oracle: a second, independent exhaustive pass over the same grid.
        let mut best: Option<(DetectorParams, Metrics)> = None;
        for params in grid.enumerate() {
            let metrics = evaluate(&params, &dataset, tolerance).unwrap();
            let better = match &best {
                None => true,
                Some((bp, bm)) => {
                    metrics.acc > bm.acc
                        || (metrics.acc == bm.acc && metrics.fpr < bm.fpr)
                        || (metrics.acc == bm.acc
                            && metrics.fpr == bm.fpr
                            && params.continuation_threshold as f64 * params.window_seconds
                                < bp.continuation_threshold as f64 * bp.window_seconds)
                }
            };
            if better {
                best = Some((params, metrics));
            }
        }
        assert_eq!(outcome.best, best.unwrap().0);
        assert_eq!(outcome.table.len(), grid.cardinality());
    }

    #[test]
    fn grid_enumeration_is_complete_and_duplicate_free() {
        let grid = GridSpec {
            window_seconds: vec![2.0, 4.0],
            volatility_threshold: vec![100.0, 200.0],
            crest_threshold: vec![1],
            continuation_threshold: vec![3, 6],
            peak_value: vec![10.0],
            peak_interval: vec![8, 10],
            power: 4,
            wavelet: WaveletConfig::default(),
        };
        let points = grid.enumerate();
        assert_eq!(points.len(), grid.cardinality());
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                assert_ne!(points[i], points[j]);
            }
        }
    }

    #[test]
    fn grid_rejects_empty_axes() {
        let mut grid = singleton_grid(&detecting_params());
        grid.peak_value.clear();
        assert_eq!(
            grid.validate().unwrap_err(),
            TunerError::EmptyGridAxis("peak_value")
        );
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let corpus = generate_corpus(VenueKind::CanteenLike, 6, 5).unwrap();
        let mut shuffled = corpus.clone();
        shuffled.reverse();
        let params = detecting_params();
        let a = evaluate(&params, &LabeledDataset::new("a", corpus).unwrap(), 10_000).unwrap();
        let b = evaluate(
            &params,
            &LabeledDataset::new("b", shuffled).unwrap(),
            10_000,
        )
        .unwrap();
        assert_eq!(a.acc, b.acc);
        assert_eq!(a.fpr, b.fpr);
    }

    #[test]
    fn csv_table_has_header_and_one_row_per_point() {
        let params = detecting_params();
        let dataset = LabeledDataset::new("d", vec![still_trace(10.0, None)]).unwrap();
        let outcome = grid_search(&singleton_grid(&params), &dataset, 0).unwrap();
        let csv = grid_results_csv(&outcome.table);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("window_seconds,"));
        assert!(lines[1].starts_with("2,4,11000,"));
    }
}
