//! `checkout` command-line tool.
//!
//! Exit codes: 0 success, 1 check failure (oracle mismatch), 2 usage or
//! validation error. Every subcommand is deterministic: identical inputs and
//! seeds produce byte-identical outputs.

use anyhow::{bail, Context, Result};
use checkout_core::detect::{detect_trace, DetectionResult, DetectorParams};
use checkout_core::sim::{brute_force_match_oracle, generate_world, run_simulation, SimScenario};
use checkout_core::synth::{generate_corpus, generate_synthetic_trace, SynthScenario, VenueKind};
use checkout_core::trace::{parse_trace_csv, serialize_trace_csv, AccelTrace};
use checkout_core::tuner::{grid_results_csv, grid_search, GridSpec, LabeledDataset};
use clap::{Parser, Subcommand, ValueEnum};
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "checkout",
    version,
    about = "Accelerometer check-out detection and hash-based exposure-notification simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over a trace CSV with a parameter JSON.
    Detect {
        /// Trace CSV file.
        #[arg(long)]
        trace: PathBuf,
        /// Detector parameters JSON.
        #[arg(long)]
        params: PathBuf,
        /// Write the result JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the one-line CSV summary on stdout instead of JSON.
        #[arg(long)]
        summary: bool,
    },
    /// Grid-search detector parameters over a corpus directory.
    Tune {
        /// Directory of trace CSV files.
        #[arg(long)]
        corpus: PathBuf,
        /// Grid specification JSON.
        #[arg(long)]
        grid: PathBuf,
        /// Acceptance window after the label for a correct detection, ms.
        #[arg(long)]
        tolerance_ms: i64,
        /// Output prefix; writes <prefix>best_params.json and
        /// <prefix>grid_results.csv.
        #[arg(long)]
        out_prefix: String,
    },
    /// Generate one synthetic trace from a scenario JSON.
    GenTrace {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a corpus of trace CSVs (even indices labeled, odd indices
    /// truncated to no-check-out recordings).
    GenCorpus {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Run the protocol simulation for a scenario JSON.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also export the message log as newline-delimited JSON.
        #[arg(long)]
        log_ndjson: Option<PathBuf>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the protocol pipeline's alerts against the plaintext oracle.
    OracleCheck {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Taxi,
    Canteen,
}

impl From<KindArg> for VenueKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Taxi => VenueKind::TaxiLike,
            KindArg::Canteen => VenueKind::CanteenLike,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Detect {
            trace,
            params,
            out,
            summary,
        } => detect(&trace, &params, out.as_deref(), summary),
        Command::Tune {
            corpus,
            grid,
            tolerance_ms,
            out_prefix,
        } => tune(&corpus, &grid, tolerance_ms, &out_prefix),
        Command::GenTrace {
            scenario,
            out,
            seed,
        } => gen_trace(&scenario, &out, seed),
        Command::GenCorpus {
            count,
            seed,
            out_dir,
            kind,
        } => gen_corpus(count, seed, &out_dir, kind.into()),
        Command::Simulate {
            scenario,
            out,
            log_ndjson,
            seed,
        } => simulate(&scenario, &out, log_ndjson.as_deref(), seed),
        Command::OracleCheck { scenario, seed } => oracle_check(&scenario, seed),
    }
}

fn read_trace(path: &Path) -> Result<AccelTrace> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_trace_csv(&bytes).with_context(|| format!("parsing trace {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {what} {}", path.display()))
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pretty_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn detect(
    trace_path: &Path,
    params_path: &Path,
    out: Option<&Path>,
    summary: bool,
) -> Result<ExitCode> {
    let trace = read_trace(trace_path)?;
    let params: DetectorParams = read_json(params_path, "detector params")?;
    let result = detect_trace(&trace, &params)?;
    let json = pretty_json(&result)?;
    match out {
        Some(path) => write_output(path, &json)?,
        None if !summary => print!("{json}"),
        None => {}
    }
    if summary {
        println!("{}", DetectionResult::CSV_SUMMARY_HEADER);
        println!("{}", result.csv_summary());
    }
    Ok(ExitCode::SUCCESS)
}

fn load_corpus(dir: &Path) -> Result<LabeledDataset> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading corpus directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    paths.sort();
    let mut traces = Vec::with_capacity(paths.len());
    for path in &paths {
        traces.push(read_trace(path)?);
    }
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    LabeledDataset::new(name, traces).context("corpus directory holds no trace CSVs")
}

fn tune(
    corpus_dir: &Path,
    grid_path: &Path,
    tolerance_ms: i64,
    out_prefix: &str,
) -> Result<ExitCode> {
    let dataset = load_corpus(corpus_dir)?;
    let grid: GridSpec = read_json(grid_path, "grid spec")?;
    let outcome = grid_search(&grid, &dataset, tolerance_ms)?;

    let params_path = PathBuf::from(format!("{out_prefix}best_params.json"));
    let table_path = PathBuf::from(format!("{out_prefix}grid_results.csv"));
    write_output(&params_path, &pretty_json(&outcome.best)?)?;
    write_output(&table_path, &grid_results_csv(&outcome.table))?;

    let best_metrics = outcome
        .table
        .iter()
        .find(|(p, _)| *p == outcome.best)
        .map(|(_, m)| m)
        .expect("best point is in the table");
    println!(
        "tune: {} traces, {} grid points, best acc={} fpr={} -> {}",
        dataset.len(),
        outcome.table.len(),
        best_metrics.acc,
        best_metrics.fpr,
        params_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn gen_trace(scenario_path: &Path, out: &Path, seed: Option<u64>) -> Result<ExitCode> {
    let mut scenario: SynthScenario = read_json(scenario_path, "scenario")?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let trace = generate_synthetic_trace(&scenario)?;
    write_output(out, &serialize_trace_csv(&trace))?;
    Ok(ExitCode::SUCCESS)
}

fn gen_corpus(count: usize, seed: u64, out_dir: &Path, kind: VenueKind) -> Result<ExitCode> {
    if count == 0 {
        bail!("count must be >= 1");
    }
    let traces = generate_corpus(kind, count, seed)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating directory {}", out_dir.display()))?;
    for (i, trace) in traces.iter().enumerate() {
        let path = out_dir.join(format!("trace_{i:03}.csv"));
        write_output(&path, &serialize_trace_csv(trace))?;
    }
    println!("gen-corpus: wrote {count} traces to {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn simulate(
    scenario_path: &Path,
    out: &Path,
    log_ndjson: Option<&Path>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let mut scenario: SimScenario = read_json(scenario_path, "scenario")?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let report = run_simulation(&scenario)?;
    write_output(out, &pretty_json(&report)?)?;
    if let Some(path) = log_ndjson {
        write_output(path, &report.message_log_ndjson()?)?;
    }
    println!(
        "simulate: {} alerts, {} messages -> {}",
        report.alerts.len(),
        report.message_log.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn oracle_check(scenario_path: &Path, seed: Option<u64>) -> Result<ExitCode> {
    let mut scenario: SimScenario = read_json(scenario_path, "scenario")?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let report = run_simulation(&scenario)?;
    let world = generate_world(&scenario)?;
    let oracle = brute_force_match_oracle(&world, scenario.confirmation_time_ms, &scenario.policy);
    let pipeline: BTreeSet<_> = report.alerts.iter().copied().collect();

    if pipeline == oracle {
        println!("oracle-check: OK ({} alerts)", oracle.len());
        return Ok(ExitCode::SUCCESS);
    }
    println!("oracle-check: MISMATCH");
    for alert in pipeline.difference(&oracle) {
        println!("  only in pipeline: {}", serde_json::to_string(alert)?);
    }
    for alert in oracle.difference(&pipeline) {
        println!("  only in oracle:   {}", serde_json::to_string(alert)?);
    }
    Ok(ExitCode::from(1))
}
