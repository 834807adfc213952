//! Detection stage: verdicts over the calibrated AARE stream.
//!
//! A second model `M2` is retrained every step on the three most recent
//! values until three consecutive one-step predictions exist; from then on
//! each step folds the last three relative prediction errors into a
//! detection-stage AARE. Once three of those exist (the newest included),
//! every further point is decided: under the mean + 3 sigma threshold over
//! all detection AARE values so far — the value under test included, which
//! keeps a young history from flagging its own spread — it is Normal and
//! `M2` is kept. Over it, a candidate model is trained on the three values
//! *preceding* the suspect point and the AARE is recomputed — if the recheck
//! passes the point is a pattern change and the candidate replaces `M2`; if
//! it fails twice the point is an anomaly and the candidate is discarded.
//! The recomputed value replaces the first-pass one in the history either
//! way.
//!
//! The same state machine doubles as a short-look-back detector over raw
//! values (look-back 3), which is how the baseline mode runs.

use alloc::vec::Vec;

use crate::conversion::CalibratedAare;
use crate::error::{Error, Result};
use crate::model::{train, NetworkConfig, SequenceModel};
use crate::stats;
use crate::window::IndexedWindow;

/// Training and error window shared by this stage and the baseline.
pub const DETECTION_WINDOW: usize = 3;

/// Steps between the first ingested value and the first possible verdict:
/// two to fill the training window, three until predictions line up, two
/// more so the threshold history holds three values once the point under
/// test is counted.
pub const WARMUP_STEPS: usize = 7;

/// Outcome kind for one decided point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    /// First-pass AARE within the threshold.
    Normal,
    /// Breach, but the retrained model explains the point; model replaced.
    PatternChange,
    /// Breach confirmed by the retrained model; model kept.
    Anomaly,
}

/// One decided point with the values behind the decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionVerdict {
    pub t: usize,
    pub kind: VerdictKind,
    pub aare_first: f64,
    pub aare_recheck: Option<f64>,
    pub threshold: f64,
}

impl DetectionVerdict {
    /// The kind/field relations every verdict must satisfy.
    pub fn consistent(&self) -> bool {
        match self.kind {
            VerdictKind::Normal => {
                self.aare_first <= self.threshold && self.aare_recheck.is_none()
            }
            VerdictKind::PatternChange => {
                self.aare_first > self.threshold
                    && self.aare_recheck.is_some_and(|r| r <= self.threshold)
            }
            VerdictKind::Anomaly => {
                self.aare_first > self.threshold
                    && self.aare_recheck.is_some_and(|r| r > self.threshold)
            }
        }
    }
}

/// Three-term AARE between actual and predicted values.
pub fn short_aare(actual: &[f64], predicted: &[f64], epsilon: f64) -> Result<f64> {
    if actual.len() != DETECTION_WINDOW || predicted.len() != DETECTION_WINDOW {
        return Err(Error::LengthMismatch {
            observed: actual.len(),
            predicted: predicted.len(),
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange("epsilon must be > 0"));
    }
    Ok(stats::average_abs_relative_error(actual, predicted, epsilon))
}

/// Detection-stage threshold: mean + 3 population sigma over at least three
/// detection AARE values.
pub fn detection_threshold(history: &[f64]) -> Result<f64> {
    if history.len() < 3 {
        return Err(Error::InsufficientHistory {
            len: history.len(),
            min: 3,
        });
    }
    Ok(stats::mean_plus_three_sigma(history))
}

/// Streaming state for the detection stage.
#[derive(Debug, Clone)]
pub struct DetectionState {
    config: NetworkConfig,
    start_t: Option<usize>,
    next_t: usize,
    values: IndexedWindow,
    predictions: IndexedWindow,
    model: Option<SequenceModel>,
    /// Bumped every time the live model is replaced.
    model_generation: u64,
    det_aare_history: Vec<f64>,
    running_abs_max: f64,
}

impl DetectionState {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            start_t: None,
            next_t: 0,
            values: IndexedWindow::new(DETECTION_WINDOW + 1),
            predictions: IndexedWindow::new(DETECTION_WINDOW + 1),
            model: None,
            model_generation: 0,
            det_aare_history: Vec::new(),
            running_abs_max: 0.0,
        })
    }

    /// First index that can carry a verdict; `None` before the first ingest.
    pub fn first_decision_t(&self) -> Option<usize> {
        self.start_t.map(|t0| t0 + WARMUP_STEPS)
    }

    pub fn det_aare_history(&self) -> &[f64] {
        &self.det_aare_history
    }

    /// The model's one-step AARE prediction for `t`, if still buffered.
    pub fn predicted_value(&self, t: usize) -> Option<f64> {
        self.predictions.get(t)
    }

    pub fn model_generation(&self) -> u64 {
        self.model_generation
    }

    fn epsilon(&self) -> f64 {
        stats::epsilon_floor(self.running_abs_max)
    }

    fn recent(&self, from: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(DETECTION_WINDOW);
        self.values.extract(from, DETECTION_WINDOW, &mut out);
        out
    }

    /// Train on `[from, from+3)`, predict the next index, install the model.
    fn retrain_and_predict(&mut self, from: usize) -> Result<()> {
        let window = self.recent(from);
        let model = train(&window, &self.config)?.model;
        let pred = model.predict_next(&window)?;
        let target = from + DETECTION_WINDOW;
        if !self.predictions.replace(target, pred) {
            self.predictions.push(target, pred);
        }
        self.model = Some(model);
        self.model_generation += 1;
        Ok(())
    }

    fn predict_next_value(&mut self, t: usize) -> Result<()> {
        let recent = self.recent(t + 1 - DETECTION_WINDOW);
        let model = self.model.as_ref().expect("model exists after warm-up");
        let pred = model.predict_next(&recent)?;
        self.predictions.push(t + 1, pred);
        Ok(())
    }

    fn short_aare_at(&self, t: usize) -> Result<f64> {
        let from = t + 1 - DETECTION_WINDOW;
        let actual = self.recent(from);
        let mut predicted = Vec::with_capacity(DETECTION_WINDOW);
        self.predictions.extract(from, DETECTION_WINDOW, &mut predicted);
        short_aare(&actual, &predicted, self.epsilon())
    }

    /// Feed one calibrated AARE value from the conversion stage.
    pub fn ingest_aare(&mut self, a: &CalibratedAare) -> Result<Option<DetectionVerdict>> {
        self.ingest(a.t, a.value)
    }

    /// Advance the stage by one `(index, value)` pair.
    ///
    /// Returns `None` during warm-up and exactly one verdict per point once
    /// `t` reaches [`first_decision_t`](Self::first_decision_t).
    pub fn ingest(&mut self, t: usize, value: f64) -> Result<Option<DetectionVerdict>> {
        match self.start_t {
            None => {
                self.start_t = Some(t);
                self.next_t = t;
            }
            Some(_) => {}
        }
        if t != self.next_t {
            return Err(Error::OutOfOrderPoint {
                expected: self.next_t,
                got: t,
            });
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteInput { t });
        }
        self.values.push(t, value);
        self.running_abs_max = self.running_abs_max.max(value.abs());
        self.next_t += 1;

        let k = t - self.start_t.expect("set above");
        if k + 1 < DETECTION_WINDOW {
            return Ok(None);
        }
        if k + 1 == DETECTION_WINDOW {
            self.retrain_and_predict(t + 1 - DETECTION_WINDOW)?;
            return Ok(None);
        }

        let window_start = t + 1 - DETECTION_WINDOW;
        if !self.predictions.contains_range(window_start, DETECTION_WINDOW) {
            // Predictions do not line up yet; keep retraining forward.
            self.retrain_and_predict(window_start)?;
            return Ok(None);
        }

        let aare = self.short_aare_at(t)?;
        if self.det_aare_history.len() < 2 {
            // Seed the threshold history before any decision is made.
            self.det_aare_history.push(aare);
            self.retrain_and_predict(window_start)?;
            return Ok(None);
        }

        // The value under test is part of its own threshold.
        self.det_aare_history.push(aare);
        let threshold = detection_threshold(&self.det_aare_history)?;
        let verdict = if aare <= threshold {
            self.predict_next_value(t)?;
            DetectionVerdict {
                t,
                kind: VerdictKind::Normal,
                aare_first: aare,
                aare_recheck: None,
                threshold,
            }
        } else {
            // Double check: retrain on the three values preceding t and ask
            // again before calling it an anomaly. The recomputed value is
            // what the history keeps for t.
            let candidate_window = self.recent(t - DETECTION_WINDOW);
            let candidate = train(&candidate_window, &self.config)?.model;
            let new_pred = candidate.predict_next(&candidate_window)?;
            self.predictions.replace(t, new_pred);
            let recheck = self.short_aare_at(t)?;
            self.det_aare_history.pop();
            self.det_aare_history.push(recheck);
            let kind = if recheck <= threshold {
                self.model = Some(candidate);
                self.model_generation += 1;
                VerdictKind::PatternChange
            } else {
                VerdictKind::Anomaly
            };
            self.predict_next_value(t)?;
            DetectionVerdict {
                t,
                kind,
                aare_first: aare,
                aare_recheck: Some(recheck),
                threshold,
            }
        };
        Ok(Some(verdict))
    }
}
