//! Property tests for the pure numeric pieces: scaling, error windows,
//! thresholds, and scoring.

use proptest::prelude::*;

use salad_core::conversion::{conversion_threshold, window_aare};
use salad_core::detection::{detection_threshold, short_aare, DetectionVerdict, VerdictKind};
use salad_core::evaluation::{fscore, score, AnomalyAlert, EvalConfig, LabelWindow};
use salad_core::model::MinMaxScaler;

/// Streaming mean/variance, deliberately a different algorithm from the
/// implementation's two-pass sums.
fn welford_mean_std(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    (mean, (m2 / values.len() as f64).sqrt())
}

fn alert(t: usize, anomalous: bool) -> AnomalyAlert {
    AnomalyAlert {
        t,
        timestamp: None,
        raw_value: 1.0,
        verdict: DetectionVerdict {
            t,
            kind: if anomalous {
                VerdictKind::Anomaly
            } else {
                VerdictKind::Normal
            },
            aare_first: 0.1,
            aare_recheck: if anomalous { Some(0.1) } else { None },
            threshold: if anomalous { 0.05 } else { 0.2 },
        },
        decision_time: 0.0,
    }
}

proptest! {
    #[test]
    fn scaler_round_trips(window in prop::collection::vec(-1e6f64..1e6, 1..64), probe in -1e6f64..1e6) {
        let scaler = MinMaxScaler::fit(&window).unwrap();
        let rt = scaler.inverse(scaler.transform(probe));
        if scaler.hi() > scaler.lo() {
            let tol = 1e-12 * probe.abs().max(scaler.hi() - scaler.lo());
            prop_assert!((rt - probe).abs() <= tol, "{probe} -> {rt}");
        } else {
            prop_assert_eq!(rt, scaler.lo());
        }
    }

    #[test]
    fn thresholds_match_independent_oracle(history in prop::collection::vec(0.0f64..1.0, 3..500)) {
        let (mean, std) = welford_mean_std(&history);
        let expected = mean + 3.0 * std;
        let conv = conversion_threshold(&history).unwrap();
        let det = detection_threshold(&history).unwrap();
        prop_assert!((conv - expected).abs() < 1e-9);
        prop_assert!((det - expected).abs() < 1e-9);
    }

    #[test]
    fn window_error_is_nonnegative_and_finite(
        observed in prop::collection::vec(-1e3f64..1e3, 1..64),
        deltas in prop::collection::vec(-10f64..10.0, 1..64),
    ) {
        let n = observed.len().min(deltas.len());
        let observed = &observed[..n];
        let predicted: Vec<f64> = observed.iter().zip(&deltas[..n]).map(|(o, d)| o + d).collect();
        let aare = window_aare(observed, &predicted, 1e-8).unwrap();
        prop_assert!(aare.is_finite());
        prop_assert!(aare >= 0.0);
        let zero = window_aare(observed, observed, 1e-8).unwrap();
        prop_assert_eq!(zero, 0.0);
    }

    #[test]
    fn short_window_error_agrees_with_general_one(
        actual in prop::collection::vec(0.0f64..1.0, 3),
        predicted in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let a = short_aare(&actual, &predicted, 1e-8).unwrap();
        let b = window_aare(&actual, &predicted, 1e-8).unwrap();
        prop_assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn fscore_is_symmetric_and_bounded(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
        let f = fscore(p, r).unwrap();
        let g = fscore(r, p).unwrap();
        prop_assert!((f - g).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&f));
        if p > 0.0 && r > 0.0 {
            prop_assert!(f >= p.min(r) - 1e-12);
            prop_assert!(f <= p.max(r) + 1e-12);
        }
    }

    #[test]
    fn scoring_counts_are_consistent(
        windows in prop::collection::vec((0usize..500, 0usize..20), 1..6),
        anomaly_ts in prop::collection::vec(0usize..600, 0..30),
        slack in 0usize..8,
    ) {
        let labels: Vec<LabelWindow> = windows
            .iter()
            .map(|&(s, len)| LabelWindow::new(s, s + len).unwrap())
            .collect();
        let mut alerts: Vec<AnomalyAlert> = anomaly_ts.iter().map(|&t| alert(t, true)).collect();
        alerts.sort_by_key(|a| a.t);
        alerts.dedup_by_key(|a| a.t);

        let config = EvalConfig { slack };
        let report = score(&alerts, &labels, &config).unwrap();

        // Merged expanded windows are the counting unit.
        let mut expanded: Vec<(usize, usize)> = labels
            .iter()
            .map(|w| (w.s.saturating_sub(slack), w.e + slack))
            .collect();
        expanded.sort_unstable();
        let mut merged = 0usize;
        let mut last_hi: Option<usize> = None;
        for (lo, hi) in expanded {
            match last_hi {
                Some(prev) if lo <= prev => last_hi = Some(prev.max(hi)),
                _ => {
                    merged += 1;
                    last_hi = Some(hi);
                }
            }
        }
        prop_assert_eq!(report.true_positives + report.false_negatives, merged);

        // Widening the slack never creates a miss. True-positive counts can
        // drop only because wider windows merge detected neighbours into one
        // counting unit, so that direction is asserted merge-free.
        let wider = score(&alerts, &labels, &EvalConfig { slack: slack + 3 }).unwrap();
        prop_assert!(wider.false_negatives <= report.false_negatives);
        if wider.true_positives + wider.false_negatives == merged {
            prop_assert!(wider.true_positives >= report.true_positives);
        }

        // Permuting alert order changes nothing.
        let mut shuffled = alerts.clone();
        shuffled.reverse();
        let again = score(&shuffled, &labels, &config).unwrap();
        prop_assert_eq!(report, again);
    }
}
