//! Check-out behavior detection over accelerometer streams, plus a
//! decentralized hash-based exposure-notification protocol simulator.
//!
//! The detection side ([`trace`], [`wavelet`], [`detect`], [`tuner`])
//! ingests 50 Hz tri-axial accelerometer recordings, classifies fixed-width
//! windows jointly by volatility (powered average) and cyclicity
//! (wavelet-filtered crest counting), and raises a check-out event after a
//! long enough run of positive windows. [`synth`] generates seeded traces
//! with ground-truth transition labels for desk-scale evaluation, and the
//! tuner grid-searches detector parameters against labeled corpora.
//!
//! The protocol side ([`protocol`], [`sim`]) keeps plaintext venue visits
//! device-local, moves only SHA-256 digests over the wire, and matches
//! exposures on-device; the simulator drives the whole exchange
//! deterministically from a seed and ships a plaintext brute-force oracle
//! for equivalence testing.

pub mod detect;
pub mod protocol;
pub mod sim;
pub mod synth;
pub mod trace;
pub mod tuner;
pub mod wavelet;

pub use detect::{
    classify_window, count_crests, detect_trace, detect_trace_streaming, first_trigger_index,
    powered_average, powered_magnitudes, CheckoutEvent, DetectError, DetectionResult,
    DetectorParams, DetectorState, WindowVerdict,
};
pub use protocol::{
    authority_broadcast, hash_venue, Alert, Broadcast, ClientId, ClientLog, ExposurePolicy,
    HashedVisit, ProtocolError, Upload, VenueDigest, VenueId, VisitRecord,
};
pub use sim::{
    brute_force_match_oracle, generate_world, run_simulation, sim_venue_id, Message, MessageKind,
    MessageStats, SimScenario, SimWorld, SimulationReport,
};
pub use synth::{
    generate_corpus, generate_synthetic_trace, SynthError, SynthScenario, VenueKind,
    GENERATOR_RATE_HZ,
};
pub use trace::{
    parse_trace_csv, segment_windows, segment_windows_strided, serialize_trace_csv,
    window_sample_count, AccelSample, AccelTrace, TraceError, Window,
};
pub use tuner::{
    evaluate, grid_results_csv, grid_search, GridSearchOutcome, GridSpec, LabeledDataset, Metrics,
    TraceOutcome, TunerError,
};
pub use wavelet::{ricker, wavelet_filter, MotherWavelet, WaveletConfig, WaveletFilter};
