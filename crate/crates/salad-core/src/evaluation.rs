//! Window-based scoring of alert sequences against labeled anomalies.
//!
//! A labeled window `[s, e]` counts as detected when at least one
//! anomaly-kind alert falls inside `[s - X, e + X]` (the valid detection
//! period). False positives are counted per maximal contiguous run of
//! anomaly alerts lying entirely outside every expanded window, so one
//! sustained false alarm is one mistake; the per-point count is reported
//! alongside for transparency.

use alloc::string::String;
use alloc::vec::Vec;

use crate::detection::{DetectionVerdict, VerdictKind};
use crate::error::{Error, Result};

/// One labeled anomaly period, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelWindow {
    pub s: usize,
    pub e: usize,
}

impl LabelWindow {
    pub fn new(s: usize, e: usize) -> Result<Self> {
        if s > e {
            return Err(Error::InvalidWindow { s, e });
        }
        Ok(Self { s, e })
    }
}

/// Scoring parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    /// Slack `X` in points on each side of a labeled window.
    pub slack: usize,
}

/// Per-point decision-time summary (seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl TimingStats {
    pub fn zero() -> Self {
        Self {
            mean: 0.0,
            std: 0.0,
            count: 0,
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::zero();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: libm::sqrt(var),
            count: values.len(),
        }
    }
}

/// One decided point as it leaves the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyAlert {
    pub t: usize,
    pub timestamp: Option<String>,
    pub raw_value: f64,
    pub verdict: DetectionVerdict,
    /// Wall-clock seconds spent deciding this point, retraining included.
    pub decision_time: f64,
}

impl AnomalyAlert {
    pub fn is_anomaly(&self) -> bool {
        self.verdict.kind == VerdictKind::Anomaly
    }
}

/// Scoring outcome. `true_positives + false_negatives` equals the number of
/// scored windows (overlapping expanded windows merge into one).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Anomaly-flagged points outside every expanded window.
    pub false_positive_points: usize,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub timing: TimingStats,
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn fscore(precision: f64, recall: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&precision) {
        return Err(Error::OutOfRange("precision must be in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&recall) {
        return Err(Error::OutOfRange("recall must be in [0, 1]"));
    }
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

fn expand_and_merge(labels: &[LabelWindow], slack: usize) -> Result<Vec<(usize, usize)>> {
    let mut expanded: Vec<(usize, usize)> = Vec::with_capacity(labels.len());
    for w in labels {
        if w.s > w.e {
            return Err(Error::InvalidWindow { s: w.s, e: w.e });
        }
        expanded.push((w.s.saturating_sub(slack), w.e + slack));
    }
    expanded.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(expanded.len());
    for (lo, hi) in expanded {
        match merged.last_mut() {
            Some((_, last_hi)) if lo <= *last_hi => *last_hi = (*last_hi).max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    Ok(merged)
}

/// Score an alert sequence against labeled windows.
pub fn score(alerts: &[AnomalyAlert], labels: &[LabelWindow], config: &EvalConfig) -> Result<EvalReport> {
    let windows = expand_and_merge(labels, config.slack)?;

    let mut points: Vec<(usize, bool)> = alerts.iter().map(|a| (a.t, a.is_anomaly())).collect();
    points.sort_unstable();

    let inside = |t: usize| windows.iter().any(|&(lo, hi)| lo <= t && t <= hi);

    let mut true_positives = 0usize;
    for &(lo, hi) in &windows {
        let hit = points
            .iter()
            .any(|&(t, anom)| anom && lo <= t && t <= hi);
        if hit {
            true_positives += 1;
        }
    }
    let false_negatives = windows.len() - true_positives;

    // Maximal contiguous runs of anomaly points; a run is a false positive
    // only when none of its points touches a window.
    let mut false_positives = 0usize;
    let mut false_positive_points = 0usize;
    let mut run: Option<(usize, bool)> = None; // (last_t, run_touches_window)
    let mut close_run = |touches: bool| {
        if !touches {
            false_positives += 1;
        }
    };
    for &(t, anom) in &points {
        let in_window = inside(t);
        if anom && !in_window {
            false_positive_points += 1;
        }
        run = match (run, anom) {
            (None, false) => None,
            (None, true) => Some((t, in_window)),
            (Some((last, touches)), true) if t == last + 1 => Some((t, touches || in_window)),
            (Some((_, touches)), true) => {
                close_run(touches);
                Some((t, in_window))
            }
            (Some((_, touches)), false) => {
                close_run(touches);
                None
            }
        };
    }
    if let Some((_, touches)) = run {
        close_run(touches);
    }

    let precision = if true_positives + false_positives > 0 {
        true_positives as f64 / (true_positives + false_positives) as f64
    } else {
        0.0
    };
    let recall = if true_positives + false_negatives > 0 {
        true_positives as f64 / (true_positives + false_negatives) as f64
    } else {
        0.0
    };
    let f = fscore(precision, recall)?;
    let times: Vec<f64> = alerts.iter().map(|a| a.decision_time).collect();

    Ok(EvalReport {
        true_positives,
        false_positives,
        false_negatives,
        false_positive_points,
        precision,
        recall,
        fscore: f,
        timing: TimingStats::from_values(&times),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{DetectionVerdict, VerdictKind};
    use approx::assert_abs_diff_eq;

    fn alert(t: usize, anomalous: bool) -> AnomalyAlert {
        let kind = if anomalous {
            VerdictKind::Anomaly
        } else {
            VerdictKind::Normal
        };
        let verdict = DetectionVerdict {
            t,
            kind,
            aare_first: if anomalous { 1.0 } else { 0.0 },
            aare_recheck: if anomalous { Some(1.0) } else { None },
            threshold: 0.5,
        };
        AnomalyAlert {
            t,
            timestamp: None,
            raw_value: 0.0,
            verdict,
            decision_time: 0.001,
        }
    }

    #[test]
    fn boundary_of_expanded_window_counts() {
        let labels = [LabelWindow::new(100, 110).unwrap()];
        let alerts = [alert(97, true)];
        let report = score(&alerts, &labels, &EvalConfig { slack: 3 }).unwrap();
        assert_eq!(report.true_positives, 1);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.false_negatives, 0);
        assert_abs_diff_eq!(report.fscore, 1.0);
    }

    #[test]
    fn no_alerts_means_missed_window() {
        let labels = [LabelWindow::new(5, 9).unwrap()];
        let report = score(&[], &labels, &EvalConfig { slack: 2 }).unwrap();
        assert_eq!(report.true_positives, 0);
        assert_eq!(report.false_negatives, 1);
        assert_eq!(report.precision, 0.0);
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.fscore, 0.0);
        assert_eq!(report.timing.count, 0);
    }

    #[test]
    fn fscore_matches_reported_values() {
        let f = fscore(0.978, 0.957).unwrap();
        assert_abs_diff_eq!(f, 0.967, epsilon = 0.0005);
        let f = fscore(0.913, 1.0).unwrap();
        assert_abs_diff_eq!(f, 0.955, epsilon = 0.0005);
        assert_eq!(fscore(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(fscore(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn fscore_rejects_out_of_range_inputs() {
        assert!(fscore(1.2, 0.5).is_err());
        assert!(fscore(0.5, -0.1).is_err());
    }

    #[test]
    fn contiguous_false_alarms_count_once() {
        let labels = [LabelWindow::new(100, 110).unwrap()];
        let alerts = [
            alert(20, true),
            alert(21, true),
            alert(22, true),
            alert(23, false),
            alert(40, true),
            alert(105, true),
        ];
        let report = score(&alerts, &labels, &EvalConfig { slack: 0 }).unwrap();
        assert_eq!(report.true_positives, 1);
        assert_eq!(report.false_positives, 2);
        assert_eq!(report.false_positive_points, 4);
    }

    #[test]
    fn run_touching_a_window_is_not_a_false_positive() {
        let labels = [LabelWindow::new(50, 52).unwrap()];
        // Run 48..=51 straddles the window boundary.
        let alerts = [alert(48, true), alert(49, true), alert(50, true), alert(51, true)];
        let report = score(&alerts, &labels, &EvalConfig { slack: 0 }).unwrap();
        assert_eq!(report.true_positives, 1);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.false_positive_points, 2);
    }

    #[test]
    fn overlapping_expanded_windows_merge() {
        let labels = [
            LabelWindow::new(10, 12).unwrap(),
            LabelWindow::new(14, 16).unwrap(),
        ];
        let alerts = [alert(13, true)];
        let report = score(&alerts, &labels, &EvalConfig { slack: 2 }).unwrap();
        // One merged window, one hit, nothing missed.
        assert_eq!(report.true_positives, 1);
        assert_eq!(report.false_negatives, 0);
        assert_eq!(report.false_positives, 0);
    }

    #[test]
    fn alert_order_does_not_matter() {
        let labels = [LabelWindow::new(30, 35).unwrap()];
        let a = [alert(10, true), alert(32, true), alert(11, true)];
        let b = [alert(32, true), alert(11, true), alert(10, true)];
        let cfg = EvalConfig { slack: 1 };
        assert_eq!(score(&a, &labels, &cfg).unwrap(), score(&b, &labels, &cfg).unwrap());
    }

    #[test]
    fn invalid_window_is_rejected() {
        assert_eq!(LabelWindow::new(7, 3), Err(Error::InvalidWindow { s: 7, e: 3 }));
        let bad = LabelWindow { s: 7, e: 3 };
        assert!(score(&[], &[bad], &EvalConfig { slack: 0 }).is_err());
    }

    #[test]
    fn pattern_changes_never_count() {
        let labels = [LabelWindow::new(100, 110).unwrap()];
        let mut a = alert(50, false);
        a.verdict.kind = VerdictKind::PatternChange;
        a.verdict.aare_first = 1.0;
        a.verdict.aare_recheck = Some(0.1);
        let report = score(&[a], &labels, &EvalConfig { slack: 3 }).unwrap();
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.false_positive_points, 0);
        assert_eq!(report.true_positives, 0);
        assert_eq!(report.false_negatives, 1);
    }

    #[test]
    fn timing_summary_is_population_std() {
        let stats = TimingStats::from_values(&[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(stats.mean, 2.0);
        assert_abs_diff_eq!(stats.std, libm::sqrt(2.0 / 3.0), epsilon = 1e-12);
        assert_eq!(stats.count, 3);
    }
}
