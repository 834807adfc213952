//! Command-line surface: `run`, `eval`, `synth`, and `gradcheck`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use salad_core::evaluation::{score, EvalConfig};

use crate::error::{Error, Result};
use crate::formats;
use crate::gradcheck::{gradient_check, GRADCHECK_TOLERANCE};
use crate::pipeline::{Engine, Mode, PipelineConfig};
use crate::synth::{self, AnomalySpec, Pattern, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "salad",
    version,
    about = "Streaming self-adaptive anomaly detection for recurrent time series",
    after_help = "Exit codes: 0 success, 1 failed check, 2 configuration error, \
                  3 parse error, 4 IO/runtime error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// Two-stage detector: conversion feeding detection.
    Salad,
    /// Short-look-back baseline on raw values.
    Repad,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PatternArg {
    Sine,
    DoubleSine,
    Constant,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a detector over a point CSV, emitting one alert record per
    /// decided point (JSONL to --alerts or stdout).
    Run {
        /// Input series (`timestamp,value` CSV).
        input: PathBuf,
        /// Conversion training-window length (e.g. 288 for 30-minute data,
        /// 42 for hourly data).
        #[arg(long)]
        b: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Salad)]
        mode: ModeArg,
        /// Alert output path; stdout when omitted.
        #[arg(long)]
        alerts: Option<PathBuf>,
        /// Optional per-point trace CSV (predictions, AARE values,
        /// thresholds) for plotting.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Record decision times as 0 so files from identical runs compare
        /// byte for byte.
        #[arg(long)]
        no_timing: bool,
    },
    /// Score an alert file against labeled anomaly windows.
    Eval {
        /// Alert JSONL produced by `run`.
        alerts: PathBuf,
        /// Label JSON (`{"windows":[{"s":..,"e":..}]}`).
        labels: PathBuf,
        /// Valid-detection slack in points on each side of a window
        /// (3 for hourly data, 6 for 30-minute data).
        #[arg(long, default_value_t = 3)]
        slack: usize,
    },
    /// Generate a recurrent series with injected anomalies, plus its label
    /// file.
    Synth {
        #[arg(long, value_enum)]
        pattern: PatternArg,
        #[arg(long)]
        period: usize,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 50.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 100.0)]
        offset: f64,
        /// Gaussian noise sigma as a fraction of the amplitude.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Comma-separated anomaly specs: `spike@1500x3,dip@1700,shift@2400-2419x1.5`.
        #[arg(long, value_delimiter = ',')]
        anomalies: Vec<AnomalySpec>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output series path.
        #[arg(long)]
        out: PathBuf,
        /// Label file path; defaults to the series path with a
        /// `.labels.json` extension.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Verify the analytic training gradient against central finite
    /// differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        hidden: usize,
    },
}

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Run one parsed command; the returned code is the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run {
            input,
            b,
            seed,
            mode,
            alerts,
            trace,
            no_timing,
        } => cmd_run(&input, b, seed, mode, alerts.as_deref(), trace.as_deref(), no_timing),
        Command::Eval {
            alerts,
            labels,
            slack,
        } => cmd_eval(&alerts, &labels, slack),
        Command::Synth {
            pattern,
            period,
            length,
            amplitude,
            offset,
            noise,
            anomalies,
            seed,
            out,
            labels,
        } => {
            let config = SynthConfig {
                pattern: match pattern {
                    PatternArg::Sine => Pattern::Sine,
                    PatternArg::DoubleSine => Pattern::DoubleSine,
                    PatternArg::Constant => Pattern::Constant,
                },
                period,
                length,
                amplitude,
                offset,
                noise,
                seed,
                anomalies,
            };
            let label_path = labels.unwrap_or_else(|| out.with_extension("labels.json"));
            cmd_synth(&config, &out, &label_path)
        }
        Command::Gradcheck { seed, hidden } => cmd_gradcheck(seed, hidden),
    }
}

fn cmd_run(
    input: &Path,
    b: usize,
    seed: u64,
    mode: ModeArg,
    alerts_path: Option<&Path>,
    trace_path: Option<&Path>,
    no_timing: bool,
) -> Result<i32> {
    let points = formats::read_points(open_reader(input)?)?;
    let config = PipelineConfig {
        b,
        slack: 3,
        seed,
        mode: match mode {
            ModeArg::Salad => Mode::Salad,
            ModeArg::Repad => Mode::RepadBaseline,
        },
    };
    let mut engine = Engine::new(&config)?;
    if points.len() <= engine.min_series_len() {
        return Err(Error::SeriesTooShort {
            len: points.len(),
            min: engine.min_series_len(),
        });
    }

    let stdout = io::stdout();
    let mut alert_sink: Box<dyn Write> = match alerts_path {
        Some(path) => Box::new(open_writer(path)?),
        None => Box::new(stdout.lock()),
    };
    let mut trace_sink = match trace_path {
        Some(path) => {
            let mut w = open_writer(path)?;
            formats::write_trace_header(&mut w)?;
            Some(w)
        }
        None => None,
    };

    let mut decided = 0usize;
    let mut anomalies = 0usize;
    let mut times = Vec::new();
    for point in &points {
        let outcome = engine.step(point)?;
        if let Some(alert) = &outcome.alert {
            decided += 1;
            if alert.is_anomaly() {
                anomalies += 1;
            }
            times.push(alert.decision_time);
            formats::write_alert(&mut alert_sink, alert, !no_timing)?;
        }
        if let (Some(w), Some(row)) = (trace_sink.as_mut(), &outcome.trace) {
            formats::write_trace_row(w, row)?;
        }
    }
    alert_sink.flush()?;
    if let Some(mut w) = trace_sink {
        w.flush()?;
    }

    let timing = salad_core::TimingStats::from_values(&times);
    eprintln!(
        "{} points, {} decided, {} anomalies, mean decision time {:.6}s",
        points.len(),
        decided,
        anomalies,
        timing.mean
    );
    Ok(0)
}

fn cmd_eval(alerts_path: &Path, labels_path: &Path, slack: usize) -> Result<i32> {
    let alerts = formats::read_alerts(open_reader(alerts_path)?)?;
    let labels = formats::read_labels(open_reader(labels_path)?)?;
    let report = score(&alerts, &labels, &EvalConfig { slack })?;
    println!("tp: {}", report.true_positives);
    println!("fp: {}", report.false_positives);
    println!("fn: {}", report.false_negatives);
    println!("precision: {:.4}", report.precision);
    println!("recall: {:.4}", report.recall);
    println!("fscore: {:.4}", report.fscore);
    println!("timing_mean_seconds: {:.6}", report.timing.mean);
    println!("timing_std_seconds: {:.6}", report.timing.std);
    println!("false_positive_points: {}", report.false_positive_points);
    Ok(0)
}

fn cmd_synth(config: &SynthConfig, out: &Path, labels_path: &Path) -> Result<i32> {
    let (points, labels) = synth::generate(config)?;
    formats::write_points(open_writer(out)?, &points)?;
    let notes: Vec<Option<String>> = config
        .anomalies
        .iter()
        .map(|a| Some(format!("{:?} x{}", a.kind, a.factor).to_lowercase()))
        .collect();
    formats::write_labels(open_writer(labels_path)?, &labels, &notes)?;
    eprintln!(
        "wrote {} points to {} and {} label window(s) to {}",
        points.len(),
        out.display(),
        labels.len(),
        labels_path.display()
    );
    Ok(0)
}

fn cmd_gradcheck(seed: u64, hidden: usize) -> Result<i32> {
    let report = gradient_check(hidden, seed)?;
    println!(
        "hidden units: {}, seed: {}, parameters checked: {}",
        report.hidden_units, report.seed, report.params_checked
    );
    println!(
        "max relative gradient gap: {:.3e} (tolerance {:.0e})",
        report.max_relative_gap, GRADCHECK_TOLERANCE
    );
    if report.passed() {
        println!("PASS");
        Ok(0)
    } else {
        println!("FAIL");
        Ok(1)
    }
}

