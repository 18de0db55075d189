use checkout_core::detect::{detect_trace, powered_average, DetectorParams};
use checkout_core::synth::{generate_synthetic_trace, SynthScenario, VenueKind};
use checkout_core::trace::{segment_windows, AccelTrace};
use checkout_core::wavelet::{WaveletConfig, WaveletFilter};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_trace(seconds: f64) -> AccelTrace {
    generate_synthetic_trace(&SynthScenario {
        in_venue_seconds: seconds * 0.7,
        walking_seconds: seconds * 0.3,
        venue_kind: VenueKind::TaxiLike,
        noise_level: 1.0,
        step_frequency_hz: 2.0,
        seed: 7,
    })
    .expect("bench scenario is valid")
}

fn bench_params() -> DetectorParams {
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

fn powered_average_bench(c: &mut Criterion) {
    let trace = bench_trace(60.0);
    let windows = segment_windows(&trace, 2.0).unwrap();
    c.bench_function("powered_average/100-sample window", |b| {
        b.iter(|| powered_average(std::hint::black_box(&windows[0]), 4).unwrap())
    });
}

fn wavelet_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("wavelet");
    for len in [100usize, 200] {
        let cfg = WaveletConfig::default();
        let seq: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin() * 1e4).collect();
        group.bench_with_input(BenchmarkId::new("build", len), &len, |b, &len| {
            b.iter(|| WaveletFilter::new(&cfg, len).unwrap())
        });
        let filter = WaveletFilter::new(&cfg, len).unwrap();
        group.bench_with_input(BenchmarkId::new("apply", len), &seq, |b, seq| {
            b.iter(|| filter.apply(std::hint::black_box(seq)).unwrap())
        });
    }
    group.finish();
}

fn detect_trace_bench(c: &mut Criterion) {
    let params = bench_params();
    let mut group = c.benchmark_group("detect_trace");
    for seconds in [30.0f64, 120.0] {
        let trace = bench_trace(seconds);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{seconds}s")),
            &trace,
            |b, trace| b.iter(|| detect_trace(std::hint::black_box(trace), &params).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(
    benches,
    powered_average_bench,
    wavelet_bench,
    detect_trace_bench
);
criterion_main!(benches);
