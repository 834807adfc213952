//! The three on-disk formats: point CSV, label JSON, and alert JSONL, plus
//! the per-point trace CSV behind `run --trace`.
//!
//! Points: a CSV with header `timestamp,value`, one record per interval. The
//! timestamp is an opaque label; a point's index is its row ordinal.
//!
//! Labels: JSON `{ "windows": [ { "s": 100, "e": 110, "note": "..." } ] }`
//! with inclusive index bounds.
//!
//! Alerts: one JSON object per line, one line per decided point. Nothing the
//! scorer needs is lost in the round trip.

use std::io::{BufRead, Write};

use salad_core::detection::{DetectionVerdict, VerdictKind};
use salad_core::evaluation::{AnomalyAlert, LabelWindow};
use salad_core::RawPoint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POINT_HEADER: &str = "timestamp,value";

pub fn verdict_kind_str(kind: VerdictKind) -> &'static str {
    match kind {
        VerdictKind::Normal => "normal",
        VerdictKind::PatternChange => "pattern_change",
        VerdictKind::Anomaly => "anomaly",
    }
}

pub fn parse_verdict_kind(s: &str) -> Option<VerdictKind> {
    match s {
        "normal" => Some(VerdictKind::Normal),
        "pattern_change" => Some(VerdictKind::PatternChange),
        "anomaly" => Some(VerdictKind::Anomaly),
        _ => None,
    }
}

/// Read a point series. An entirely empty input is an empty series; anything
/// else must start with the exact header.
pub fn read_points<R: BufRead>(reader: R) -> Result<Vec<RawPoint>> {
    let mut points = Vec::new();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        None => return Ok(points),
        Some((_, line)) => {
            let line = line?;
            if line.trim_end_matches('\r').trim() != POINT_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{POINT_HEADER}`, got `{line}`"),
                });
            }
        }
    }
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
        if !value.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("non-finite value `{value}`"),
            });
        }
        points.push(RawPoint {
            t: points.len(),
            value,
            timestamp: Some(timestamp.to_string()),
        });
    }
    Ok(points)
}

pub fn write_points<W: Write>(mut writer: W, points: &[RawPoint]) -> Result<()> {
    writeln!(writer, "{POINT_HEADER}")?;
    for p in points {
        match &p.timestamp {
            Some(ts) => writeln!(writer, "{ts},{}", p.value)?,
            None => writeln!(writer, "{},{}", p.t, p.value)?,
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelEntry {
    s: usize,
    e: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelFile {
    windows: Vec<LabelEntry>,
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<LabelWindow>> {
    let file: LabelFile = serde_json::from_reader(reader)?;
    file.windows
        .into_iter()
        .map(|w| LabelWindow::new(w.s, w.e).map_err(Error::from))
        .collect()
}

pub fn write_labels<W: Write>(writer: W, windows: &[LabelWindow], notes: &[Option<String>]) -> Result<()> {
    let file = LabelFile {
        windows: windows
            .iter()
            .enumerate()
            .map(|(i, w)| LabelEntry {
                s: w.s,
                e: w.e,
                note: notes.get(i).cloned().flatten(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(writer, &file)?;
    Ok(())
}

/// One alert line: everything known about a decided point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlertRecord {
    pub t: usize,
    pub timestamp: Option<String>,
    pub value: f64,
    pub verdict: String,
    pub aare_first: f64,
    pub aare_recheck: Option<f64>,
    pub threshold: f64,
    pub decision_time_seconds: f64,
}

impl AlertRecord {
    /// `include_timing = false` zeroes the wall-clock field, which is the
    /// only nondeterministic part of a run; everything else is reproducible
    /// byte for byte under a fixed seed.
    pub fn from_alert(alert: &AnomalyAlert, include_timing: bool) -> Self {
        Self {
            t: alert.t,
            timestamp: alert.timestamp.clone(),
            value: alert.raw_value,
            verdict: verdict_kind_str(alert.verdict.kind).to_string(),
            aare_first: alert.verdict.aare_first,
            aare_recheck: alert.verdict.aare_recheck,
            threshold: alert.verdict.threshold,
            decision_time_seconds: if include_timing { alert.decision_time } else { 0.0 },
        }
    }

    pub fn into_alert(self, line: usize) -> Result<AnomalyAlert> {
        let kind = parse_verdict_kind(&self.verdict).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown verdict kind `{}`", self.verdict),
        })?;
        Ok(AnomalyAlert {
            t: self.t,
            timestamp: self.timestamp,
            raw_value: self.value,
            verdict: DetectionVerdict {
                t: self.t,
                kind,
                aare_first: self.aare_first,
                aare_recheck: self.aare_recheck,
                threshold: self.threshold,
            },
            decision_time: self.decision_time_seconds,
        })
    }
}

pub fn write_alert<W: Write>(mut writer: W, alert: &AnomalyAlert, include_timing: bool) -> Result<()> {
    let record = AlertRecord::from_alert(alert, include_timing);
    serde_json::to_writer(&mut writer, &record)?;
    writeln!(writer)?;
    Ok(())
}

pub fn write_alerts<W: Write>(mut writer: W, alerts: &[AnomalyAlert], include_timing: bool) -> Result<()> {
    for alert in alerts {
        write_alert(&mut writer, alert, include_timing)?;
    }
    Ok(())
}

pub fn read_alerts<R: BufRead>(reader: R) -> Result<Vec<AnomalyAlert>> {
    let mut alerts = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AlertRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        alerts.push(record.into_alert(line_no)?);
    }
    Ok(alerts)
}

/// One trace row per decided point; enough to replot the raw series against
/// its predictions, the calibrated AARE stream against the model's forecasts,
/// and the detection AARE against the moving threshold.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: usize,
    pub timestamp: Option<String>,
    pub value: f64,
    pub predicted_value: Option<f64>,
    pub aare: Option<f64>,
    pub predicted_aare: Option<f64>,
    pub detection_aare: f64,
    pub threshold: f64,
    pub verdict: VerdictKind,
}

pub const TRACE_HEADER: &str =
    "t,timestamp,value,predicted_value,aare,predicted_aare,detection_aare,threshold,verdict";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace_header<W: Write>(mut writer: W) -> Result<()> {
    writeln!(writer, "{TRACE_HEADER}")?;
    Ok(())
}

pub fn write_trace_row<W: Write>(mut writer: W, row: &TraceRow) -> Result<()> {
    writeln!(
        writer,
        "{},{},{},{},{},{},{},{},{}",
        row.t,
        row.timestamp.as_deref().unwrap_or(""),
        row.value,
        opt(row.predicted_value),
        opt(row.aare),
        opt(row.predicted_aare),
        row.detection_aare,
        row.threshold,
        verdict_kind_str(row.verdict),
    )?;
    Ok(())
}
