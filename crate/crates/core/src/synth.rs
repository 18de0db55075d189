//! Seeded synthetic trace generator with ground-truth transition labels.
//!
//! Each trace is an in-venue phase followed by a walking phase; the phase
//! boundary is recorded as the trace label. Two venue profiles are modeled:
//! `TaxiLike` rides have band-limited vibration plus sparse aperiodic bumps
//! (volatile but not periodic), `CanteenLike` visits are nearly still. The
//! walking phase is a vertical stride sinusoid with a harmonic, lateral sway,
//! and noise. Identical scenarios (including the seed) produce bit-identical
//! traces.

use crate::trace::{AccelSample, AccelTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Sample rate of every generated trace, Hz.
pub const GENERATOR_RATE_HZ: f64 = 50.0;

const GRAVITY_MS2: f64 = 9.81;

// Walking model: vertical stride sinusoid + second harmonic + lateral sway.
const WALK_VERTICAL_AMP: f64 = 6.0;
const WALK_HARMONIC_AMP: f64 = 1.2;
const WALK_SWAY_AMP: f64 = 1.0;
const WALK_NOISE_SCALE: f64 = 0.4;

// Canteen model: gentle white noise around gravity.
const CANTEEN_NOISE_SCALE: f64 = 0.3;

// Taxi model: low-passed vibration plus sparse half-sine bumps.
const TAXI_NOISE_SCALE: f64 = 1.2;
const TAXI_LOWPASS_ALPHA: f64 = 0.3;
const TAXI_BUMPS_PER_SECOND: f64 = 0.25;
const TAXI_BUMP_SAMPLES: usize = 12;
const TAXI_BUMP_MIN_AMP: f64 = 3.0;
const TAXI_BUMP_MAX_AMP: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VenueKind {
    #[serde(rename = "taxi-like")]
    TaxiLike,
    #[serde(rename = "canteen-like")]
    CanteenLike,
}

/// Input of the generator; serialized as JSON with exactly these keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthScenario {
    pub in_venue_seconds: f64,
    pub walking_seconds: f64,
    pub venue_kind: VenueKind,
    pub noise_level: f64,
    #[serde(default = "default_step_frequency")]
    pub step_frequency_hz: f64,
    pub seed: u64,
}

fn default_step_frequency() -> f64 {
    2.0
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

impl SynthScenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidScenario(msg));
        if !(self.in_venue_seconds.is_finite() && self.in_venue_seconds > 0.0) {
            return fail(format!(
                "in_venue_seconds {} must be > 0",
                self.in_venue_seconds
            ));
        }
        if !(self.walking_seconds.is_finite() && self.walking_seconds > 0.0) {
            return fail(format!(
                "walking_seconds {} must be > 0",
                self.walking_seconds
            ));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return fail(format!("noise_level {} must be >= 0", self.noise_level));
        }
        if !(1.0..=3.0).contains(&self.step_frequency_hz) {
            return fail(format!(
                "step_frequency_hz {} outside [1.0, 3.0]",
                self.step_frequency_hz
            ));
        }
        Ok(())
    }
}

/// Generate a labeled two-phase trace at [`GENERATOR_RATE_HZ`].
///
/// The label is the phase-boundary time `round(in_venue_seconds * 1000)`;
/// samples strictly before it belong to the in-venue phase, the rest walk.
pub fn generate_synthetic_trace(scenario: &SynthScenario) -> Result<AccelTrace, SynthError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let label_ms = (scenario.in_venue_seconds * 1000.0).round() as i64;
    let total_seconds = scenario.in_venue_seconds + scenario.walking_seconds;
    let n = (total_seconds * GENERATOR_RATE_HZ).round() as usize;
    let period_ms = 1000.0 / GENERATOR_RATE_HZ;

    // Walking phase offsets, drawn up front so the stream layout is fixed.
    let phase_vertical = rng.gen_range(0.0..TAU);
    let phase_harmonic = rng.gen_range(0.0..TAU);
    let phase_sway = rng.gen_range(0.0..TAU);

    let bump_prob = (TAXI_BUMPS_PER_SECOND / GENERATOR_RATE_HZ).min(1.0);
    let mut lowpass = [0.0f64; 3];
    let mut bumps: Vec<(usize, f64)> = Vec::new();

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t_ms = (i as f64 * period_ms).round() as i64;
        let (ax, ay, az) = if t_ms < label_ms {
            match scenario.venue_kind {
                VenueKind::CanteenLike => {
                    let sigma = CANTEEN_NOISE_SCALE * scenario.noise_level;
                    (
                        sigma * std_normal.sample(&mut rng),
                        sigma * std_normal.sample(&mut rng),
                        GRAVITY_MS2 + sigma * std_normal.sample(&mut rng),
                    )
                }
                VenueKind::TaxiLike => {
                    let sigma = TAXI_NOISE_SCALE * scenario.noise_level;
                    for state in lowpass.iter_mut() {
                        let white = sigma * std_normal.sample(&mut rng);
                        *state += TAXI_LOWPASS_ALPHA * (white - *state);
                    }
                    if rng.gen_bool(bump_prob) {
                        let amp = rng.gen_range(TAXI_BUMP_MIN_AMP..TAXI_BUMP_MAX_AMP)
                            * scenario.noise_level;
                        bumps.push((i, amp));
                    }
                    let mut bump_x = 0.0;
                    let mut bump_z = 0.0;
                    bumps.retain(|&(start, amp)| {
                        let j = i - start;
                        if j < TAXI_BUMP_SAMPLES {
                            let shape = (PI * j as f64 / TAXI_BUMP_SAMPLES as f64).sin();
                            bump_x += 0.4 * amp * shape;
                            bump_z += amp * shape;
                            true
                        } else {
                            false
                        }
                    });
                    (
                        lowpass[0] + bump_x,
                        lowpass[1],
                        GRAVITY_MS2 + lowpass[2] + bump_z,
                    )
                }
            }
        } else {
            let t_rel = (t_ms - label_ms) as f64 / 1000.0;
            let omega = TAU * scenario.step_frequency_hz;
            let sigma = WALK_NOISE_SCALE * scenario.noise_level;
            let ax = WALK_SWAY_AMP * (0.5 * omega * t_rel + phase_sway).sin()
                + sigma * std_normal.sample(&mut rng);
            let ay = sigma * std_normal.sample(&mut rng);
            let az = GRAVITY_MS2
                + WALK_VERTICAL_AMP * (omega * t_rel + phase_vertical).sin()
                + WALK_HARMONIC_AMP * (2.0 * omega * t_rel + phase_harmonic).sin()
                + sigma * std_normal.sample(&mut rng);
            (ax, ay, az)
        };
        samples.push(AccelSample::new(t_ms, ax, ay, az));
    }

    AccelTrace::new(GENERATOR_RATE_HZ, samples, Some(label_ms))
        .map_err(|e| SynthError::InvalidScenario(e.to_string()))
}

/// Scenario parameter ranges used when building corpora.
const CORPUS_IN_VENUE_MS: std::ops::RangeInclusive<i64> = 20_000..=40_000;
const CORPUS_WALKING_MS: std::ops::RangeInclusive<i64> = 10_000..=20_000;
const CORPUS_STEP_HZ: std::ops::Range<f64> = 1.6..2.4;
const CORPUS_TAXI_NOISE: std::ops::Range<f64> = 0.8..1.5;
const CORPUS_CANTEEN_NOISE: std::ops::Range<f64> = 0.05..0.30;

/// Deterministic labeled corpus for evaluation: even indices keep their
/// transition label, odd indices are truncated at the transition and become
/// no-check-out recordings. Scenario parameters are drawn from `seed`.
pub fn generate_corpus(
    kind: VenueKind,
    count: usize,
    seed: u64,
) -> Result<Vec<AccelTrace>, SynthError> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = Vec::with_capacity(count);
    for i in 0..count {
        let in_venue_ms = seeder.gen_range(CORPUS_IN_VENUE_MS);
        let walking_ms = seeder.gen_range(CORPUS_WALKING_MS);
        let noise_level = match kind {
            VenueKind::TaxiLike => seeder.gen_range(CORPUS_TAXI_NOISE),
            VenueKind::CanteenLike => seeder.gen_range(CORPUS_CANTEEN_NOISE),
        };
        let step_frequency_hz = seeder.gen_range(CORPUS_STEP_HZ);
        let trace_seed = seeder.gen::<u64>();
        let scenario = SynthScenario {
            in_venue_seconds: in_venue_ms as f64 / 1000.0,
            walking_seconds: walking_ms as f64 / 1000.0,
            venue_kind: kind,
            noise_level,
            step_frequency_hz,
            seed: trace_seed,
        };
        let trace = generate_synthetic_trace(&scenario)?;
        if i % 2 == 0 {
            traces.push(trace);
        } else {
            let label = trace.label_ms().expect("generated traces are labeled");
            let truncated = trace
                .truncated_before(label)
                .map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
            traces.push(truncated);
        }
    }
    Ok(traces)
}
