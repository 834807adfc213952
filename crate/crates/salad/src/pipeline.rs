//! Wires conversion into detection and drives whole series through, in batch
//! or from a line feed, with per-point wall-clock decision timing.
//!
//! The baseline mode reuses the detection state machine directly on raw
//! values with its three-point look-back, so both detectors share one code
//! path from ingestion to verdict.

use std::io::BufRead;
use std::time::Instant;

use salad_core::conversion::ConversionState;
use salad_core::detection::{DetectionState, WARMUP_STEPS};
use salad_core::evaluation::{AnomalyAlert, TimingStats};
use salad_core::model::NetworkConfig;
use salad_core::RawPoint;

use crate::error::{Error, Result};
use crate::formats::{self, TraceRow};

/// Which detector to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Conversion stage feeding the detection stage.
    Salad,
    /// Detection state machine applied directly to raw values (look-back 3).
    RepadBaseline,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Conversion training-window length.
    pub b: usize,
    /// Evaluation slack carried alongside for scoring runs.
    pub slack: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl PipelineConfig {
    pub fn new(b: usize, mode: Mode) -> Self {
        Self {
            b,
            slack: 3,
            seed: 0,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 4 {
            return Err(Error::Config(format!(
                "window length b must be at least 4, got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// What one ingested point produced.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub alert: Option<AnomalyAlert>,
    pub trace: Option<TraceRow>,
}

#[derive(Debug)]
enum Stages {
    Salad {
        conversion: ConversionState,
        detection: DetectionState,
    },
    Baseline {
        detection: DetectionState,
    },
}

/// Point-at-a-time driver shared by the batch and streaming entry points.
#[derive(Debug)]
pub struct Engine {
    stages: Stages,
    mode: Mode,
    b: usize,
}

impl Engine {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let stages = match config.mode {
            Mode::Salad => Stages::Salad {
                conversion: ConversionState::new(config.b, NetworkConfig::conversion(config.seed))?,
                detection: DetectionState::new(NetworkConfig::detection(config.seed))?,
            },
            Mode::RepadBaseline => Stages::Baseline {
                detection: DetectionState::new(NetworkConfig::detection(config.seed))?,
            },
        };
        Ok(Self {
            stages,
            mode: config.mode,
            b: config.b,
        })
    }

    /// Index of the first point that can carry a verdict.
    pub fn first_decision_t(&self) -> usize {
        match self.mode {
            Mode::Salad => 2 * self.b + 1 + WARMUP_STEPS,
            Mode::RepadBaseline => WARMUP_STEPS,
        }
    }

    /// Minimum series length for the run preconditions.
    pub fn min_series_len(&self) -> usize {
        match self.mode {
            Mode::Salad => 2 * self.b + 10,
            Mode::RepadBaseline => 20,
        }
    }

    /// Feed the next point. Timing covers exactly the ingest work for this
    /// point, retraining included.
    pub fn step(&mut self, point: &RawPoint) -> Result<StepOutcome> {
        match &mut self.stages {
            Stages::Salad {
                conversion,
                detection,
            } => {
                let started = Instant::now();
                let calibrated = conversion.ingest(point)?;
                let verdict = match &calibrated {
                    Some(a) => detection.ingest_aare(a)?,
                    None => None,
                };
                let decision_time = started.elapsed().as_secs_f64();
                let Some(verdict) = verdict else {
                    return Ok(StepOutcome {
                        alert: None,
                        trace: None,
                    });
                };
                let alert = AnomalyAlert {
                    t: point.t,
                    timestamp: point.timestamp.clone(),
                    raw_value: point.value,
                    verdict,
                    decision_time,
                };
                let trace = TraceRow {
                    t: point.t,
                    timestamp: point.timestamp.clone(),
                    value: point.value,
                    predicted_value: conversion.prediction(point.t),
                    aare: calibrated.map(|a| a.value),
                    predicted_aare: detection.predicted_value(point.t),
                    detection_aare: verdict.aare_first,
                    threshold: verdict.threshold,
                    verdict: verdict.kind,
                };
                Ok(StepOutcome {
                    alert: Some(alert),
                    trace: Some(trace),
                })
            }
            Stages::Baseline { detection } => {
                let started = Instant::now();
                let verdict = detection.ingest(point.t, point.value)?;
                let decision_time = started.elapsed().as_secs_f64();
                let Some(verdict) = verdict else {
                    return Ok(StepOutcome {
                        alert: None,
                        trace: None,
                    });
                };
                let alert = AnomalyAlert {
                    t: point.t,
                    timestamp: point.timestamp.clone(),
                    raw_value: point.value,
                    verdict,
                    decision_time,
                };
                let trace = TraceRow {
                    t: point.t,
                    timestamp: point.timestamp.clone(),
                    value: point.value,
                    predicted_value: detection.predicted_value(point.t),
                    aare: None,
                    predicted_aare: None,
                    detection_aare: verdict.aare_first,
                    threshold: verdict.threshold,
                    verdict: verdict.kind,
                };
                Ok(StepOutcome {
                    alert: Some(alert),
                    trace: Some(trace),
                })
            }
        }
    }
}

fn require_len(points: &[RawPoint], min: usize) -> Result<()> {
    if points.len() <= min {
        return Err(Error::SeriesTooShort {
            len: points.len(),
            min,
        });
    }
    Ok(())
}

fn run(points: &[RawPoint], config: &PipelineConfig) -> Result<(Vec<AnomalyAlert>, TimingStats)> {
    let mut engine = Engine::new(config)?;
    require_len(points, engine.min_series_len())?;
    let mut alerts = Vec::new();
    for point in points {
        if let Some(alert) = engine.step(point)?.alert {
            alerts.push(alert);
        }
    }
    let times: Vec<f64> = alerts.iter().map(|a| a.decision_time).collect();
    Ok((alerts, TimingStats::from_values(&times)))
}

/// Run the full two-stage detector over an in-memory series.
pub fn run_salad(points: &[RawPoint], config: &PipelineConfig) -> Result<(Vec<AnomalyAlert>, TimingStats)> {
    let config = PipelineConfig {
        mode: Mode::Salad,
        ..config.clone()
    };
    run(points, &config)
}

/// Run the short-look-back baseline over an in-memory series.
pub fn run_repad_baseline(
    points: &[RawPoint],
    config: &PipelineConfig,
) -> Result<(Vec<AnomalyAlert>, TimingStats)> {
    let config = PipelineConfig {
        mode: Mode::RepadBaseline,
        ..config.clone()
    };
    run(points, &config)
}

/// End-of-run counters for the streaming driver.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSummary {
    pub points: usize,
    pub decided: usize,
    pub anomalies: usize,
    pub timing: TimingStats,
}

/// Drive the detector from a line feed (`timestamp,value` after the header),
/// handing each alert to `sink` as soon as its point is decided. Points are
/// processed strictly in arrival order; output is never reordered.
pub fn stream<R, F>(reader: R, config: &PipelineConfig, mut sink: F) -> Result<StreamSummary>
where
    R: BufRead,
    F: FnMut(&AnomalyAlert) -> std::io::Result<()>,
{
    let mut engine = Engine::new(config)?;
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        None => {
            return Ok(StreamSummary {
                points: 0,
                decided: 0,
                anomalies: 0,
                timing: TimingStats::zero(),
            })
        }
        Some((_, line)) => {
            let line = line?;
            if line.trim_end_matches('\r').trim() != formats::POINT_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{}`, got `{line}`", formats::POINT_HEADER),
                });
            }
        }
    }

    let mut points = 0usize;
    let mut decided = 0usize;
    let mut anomalies = 0usize;
    let mut times = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (timestamp, value) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected `timestamp,value`".into(),
        })?;
        let value: f64 = value.trim().parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad value `{}`: {e}", value.trim()),
        })?;
        let point = RawPoint {
            t: points,
            value,
            timestamp: Some(timestamp.to_string()),
        };
        points += 1;
        if let Some(alert) = engine.step(&point)?.alert {
            decided += 1;
            if alert.is_anomaly() {
                anomalies += 1;
            }
            times.push(alert.decision_time);
            sink(&alert)?;
        }
    }
    Ok(StreamSummary {
        points,
        decided,
        anomalies,
        timing: TimingStats::from_values(&times),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_points(n: usize) -> Vec<RawPoint> {
        (0..n).map(|t| RawPoint::new(t, 5.0)).collect()
    }

    #[test]
    fn constant_series_produces_no_anomalies() {
        let b = 20;
        let config = PipelineConfig::new(b, Mode::Salad);
        let points = constant_points(3 * b);
        let (alerts, timing) = run_salad(&points, &config).unwrap();
        assert_eq!(timing.count, alerts.len());
        assert!(!alerts.is_empty());
        assert!(alerts.iter().all(|a| !a.is_anomaly()));
        // Alerts start exactly at the first decision index and cover every
        // later point once, in order.
        let first = 2 * b + 1 + WARMUP_STEPS;
        let ts: Vec<usize> = alerts.iter().map(|a| a.t).collect();
        let expected: Vec<usize> = (first..3 * b).collect();
        assert_eq!(ts, expected);
    }

    #[test]
    fn short_series_is_rejected() {
        let config = PipelineConfig::new(10, Mode::Salad);
        let err = run_salad(&constant_points(30), &config).unwrap_err();
        assert!(matches!(err, Error::SeriesTooShort { len: 30, min: 30 }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn baseline_agrees_with_salad_on_constant_series() {
        let config = PipelineConfig::new(8, Mode::Salad);
        let points = constant_points(40);
        let (salad_alerts, _) = run_salad(&points, &config).unwrap();
        let (base_alerts, _) = run_repad_baseline(&points, &config).unwrap();
        assert!(salad_alerts.iter().all(|a| !a.is_anomaly()));
        assert!(base_alerts.iter().all(|a| !a.is_anomaly()));
        assert_eq!(base_alerts.first().unwrap().t, WARMUP_STEPS);
    }

    #[test]
    fn same_seed_same_alerts() {
        let mut rng = salad_core::rng::SplitMix64::new(5);
        let points: Vec<RawPoint> = (0..70)
            .map(|t| RawPoint::new(t, 10.0 + rng.next_f64()))
            .collect();
        let config = PipelineConfig {
            seed: 9,
            ..PipelineConfig::new(6, Mode::Salad)
        };
        let (a, _) = run_salad(&points, &config).unwrap();
        let (b, _) = run_salad(&points, &config).unwrap();
        let strip = |alerts: &[AnomalyAlert]| -> Vec<(usize, String, u64, u64)> {
            alerts
                .iter()
                .map(|al| {
                    (
                        al.t,
                        crate::formats::verdict_kind_str(al.verdict.kind).to_string(),
                        al.verdict.aare_first.to_bits(),
                        al.verdict.threshold.to_bits(),
                    )
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn stream_matches_batch_driver() {
        let mut rng = salad_core::rng::SplitMix64::new(1);
        let points: Vec<RawPoint> = (0..60)
            .map(|t| RawPoint {
                t,
                value: 50.0 + 10.0 * rng.next_f64(),
                timestamp: Some(t.to_string()),
            })
            .collect();
        let mut file = Vec::new();
        crate::formats::write_points(&mut file, &points).unwrap();

        let config = PipelineConfig::new(5, Mode::Salad);
        let (batch_alerts, _) = run_salad(&points, &config).unwrap();
        let mut stream_alerts = Vec::new();
        let summary = stream(std::io::BufReader::new(file.as_slice()), &config, |a| {
            stream_alerts.push(a.clone());
            Ok(())
        })
        .unwrap();

        assert_eq!(summary.points, 60);
        assert_eq!(summary.decided, batch_alerts.len());
        let verdicts = |alerts: &[AnomalyAlert]| -> Vec<(usize, salad_core::VerdictKind)> {
            alerts.iter().map(|a| (a.t, a.verdict.kind)).collect()
        };
        assert_eq!(verdicts(&batch_alerts), verdicts(&stream_alerts));
    }

    #[test]
    fn empty_feed_is_an_empty_summary() {
        let config = PipelineConfig::new(5, Mode::Salad);
        let summary = stream(std::io::BufReader::new("".as_bytes()), &config, |_| Ok(())).unwrap();
        assert_eq!(summary.points, 0);
        assert_eq!(summary.decided, 0);
    }

    #[test]
    fn malformed_stream_line_is_reported_with_its_number() {
        let config = PipelineConfig::new(5, Mode::Salad);
        let feed = "timestamp,value\na,1\nbroken line\n";
        let err = stream(std::io::BufReader::new(feed.as_bytes()), &config, |_| Ok(())).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn tiny_b_is_a_config_error() {
        let config = PipelineConfig::new(2, Mode::Salad);
        let err = Engine::new(&config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
