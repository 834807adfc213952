//! Conversion stage: turns the raw series into a calibrated AARE stream.
//!
//! A model `M1` is trained on the first `b` points and from then on predicts
//! every next value one step ahead. Once a full window of predictions exists,
//! each step folds the last `b` relative errors into one AARE value. From
//! index `2b+1` onward the value is tested against a mean + 3 sigma threshold
//! over every AARE value so far, the value under test included (a young
//! history therefore cannot flag its own spread): under the threshold it is
//! emitted as-is; over it, `M1` is replaced by a model trained on the `b`
//! points *preceding* the suspect one, the prediction is redone, and the
//! recomputed AARE is emitted with the `recalibrated` flag set and kept in
//! the history in place of the first-pass value. The emitted `A_t` stream is
//! what the detection stage consumes.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{train, NetworkConfig, SequenceModel};
use crate::stats;
use crate::window::IndexedWindow;

/// One observed value with its position in the stream.
///
/// The timestamp is an opaque label carried through to alerts; all schedule
/// arithmetic runs on `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPoint {
    pub t: usize,
    pub value: f64,
    pub timestamp: Option<String>,
}

impl RawPoint {
    pub fn new(t: usize, value: f64) -> Self {
        Self {
            t,
            value,
            timestamp: None,
        }
    }
}

/// One calibrated AARE value, emitted for every index from `2b+1` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedAare {
    pub t: usize,
    pub value: f64,
    /// True when the emission came from the retrain-and-recompute branch.
    pub recalibrated: bool,
}

/// Windowed average absolute relative error between paired observations and
/// predictions, with each denominator floored at `epsilon`.
pub fn window_aare(observed: &[f64], predicted: &[f64], epsilon: f64) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            observed: observed.len(),
            predicted: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange("epsilon must be > 0"));
    }
    Ok(stats::average_abs_relative_error(observed, predicted, epsilon))
}

/// Conversion-stage threshold: mean + 3 population sigma over the AARE
/// history collected so far (at least two entries).
pub fn conversion_threshold(history: &[f64]) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::InsufficientHistory {
            len: history.len(),
            min: 2,
        });
    }
    Ok(stats::mean_plus_three_sigma(history))
}

/// Streaming state for the conversion stage. Feed points strictly in index
/// order through [`ingest`](Self::ingest).
#[derive(Debug, Clone)]
pub struct ConversionState {
    b: usize,
    config: NetworkConfig,
    raw: IndexedWindow,
    predictions: IndexedWindow,
    model: Option<SequenceModel>,
    aare_history: Vec<f64>,
    next_t: usize,
    running_abs_max: f64,
}

impl ConversionState {
    pub fn new(b: usize, config: NetworkConfig) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidConfig("window length b must be >= 2"));
        }
        config.validate()?;
        Ok(Self {
            b,
            config,
            raw: IndexedWindow::new(b + 1),
            predictions: IndexedWindow::new(b + 1),
            model: None,
            aare_history: Vec::new(),
            next_t: 0,
            running_abs_max: 0.0,
        })
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// First index that can produce a calibrated value.
    pub fn first_emission_t(&self) -> usize {
        2 * self.b + 1
    }

    /// The model's one-step prediction for `t`, if still buffered.
    pub fn prediction(&self, t: usize) -> Option<f64> {
        self.predictions.get(t)
    }

    pub fn aare_history(&self) -> &[f64] {
        &self.aare_history
    }

    fn epsilon(&self) -> f64 {
        stats::epsilon_floor(self.running_abs_max)
    }

    /// Train on `[from, from + b)` and push the prediction for `from + b`.
    fn retrain_and_predict(&mut self, from: usize) -> Result<()> {
        let mut window = Vec::with_capacity(self.b);
        self.raw.extract(from, self.b, &mut window);
        let model = train(&window, &self.config)?.model;
        let pred = model.predict_next(&window)?;
        let target = from + self.b;
        if !self.predictions.replace(target, pred) {
            self.predictions.push(target, pred);
        }
        self.model = Some(model);
        Ok(())
    }

    /// Predict the value at `t + 1` from the most recent `b` points.
    fn predict_next_point(&mut self, t: usize) -> Result<()> {
        let mut recent = Vec::with_capacity(self.b);
        self.raw.extract(t + 1 - self.b, self.b, &mut recent);
        let model = self.model.as_ref().expect("model exists after warm-up");
        let pred = model.predict_next(&recent)?;
        self.predictions.push(t + 1, pred);
        Ok(())
    }

    /// AARE over the window ending at `t`, using buffered predictions.
    fn aare_at(&self, t: usize) -> Result<f64> {
        let from = t + 1 - self.b;
        let mut observed = Vec::with_capacity(self.b);
        let mut predicted = Vec::with_capacity(self.b);
        self.raw.extract(from, self.b, &mut observed);
        self.predictions.extract(from, self.b, &mut predicted);
        window_aare(&observed, &predicted, self.epsilon())
    }

    /// Advance the stage by one point.
    ///
    /// Returns `None` while warming up (`t <= 2b`) and exactly one
    /// [`CalibratedAare`] per point from `2b+1` on.
    pub fn ingest(&mut self, point: &RawPoint) -> Result<Option<CalibratedAare>> {
        if point.t != self.next_t {
            return Err(Error::OutOfOrderPoint {
                expected: self.next_t,
                got: point.t,
            });
        }
        if !point.value.is_finite() {
            return Err(Error::NonFiniteInput { t: point.t });
        }
        let t = point.t;
        self.raw.push(t, point.value);
        self.running_abs_max = self.running_abs_max.max(point.value.abs());
        self.next_t += 1;
        let b = self.b;

        if t < b - 1 {
            // Still collecting the first training window.
            return Ok(None);
        }
        if t == b - 1 {
            self.retrain_and_predict(0)?;
            return Ok(None);
        }
        if t < 2 * b - 1 {
            // Predictions only; the model is reused as-is.
            self.predict_next_point(t)?;
            return Ok(None);
        }
        if t < 2 * b + 1 {
            // First AARE values; retrain on the freshest window each step.
            let aare = self.aare_at(t)?;
            self.aare_history.push(aare);
            self.retrain_and_predict(t + 1 - b)?;
            return Ok(None);
        }

        let aare = self.aare_at(t)?;
        // The value under test is part of its own threshold.
        self.aare_history.push(aare);
        let threshold = conversion_threshold(&self.aare_history)?;
        let out = if aare <= threshold {
            CalibratedAare {
                t,
                value: aare,
                recalibrated: false,
            }
        } else {
            // Likely pattern change: rebuild the model from the b points
            // preceding t, redo the prediction for t, and keep the
            // recomputed value as this step's history entry.
            let mut window = Vec::with_capacity(b);
            self.raw.extract(t - b, b, &mut window);
            let model = train(&window, &self.config)?.model;
            let new_pred = model.predict_next(&window)?;
            self.predictions.replace(t, new_pred);
            self.model = Some(model);
            let recomputed = self.aare_at(t)?;
            self.aare_history.pop();
            self.aare_history.push(recomputed);
            CalibratedAare {
                t,
                value: recomputed,
                recalibrated: true,
            }
        };
        self.predict_next_point(t)?;
        Ok(Some(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant_stream(state: &mut ConversionState, upto: usize, value: f64) -> Vec<CalibratedAare> {
        let mut out = Vec::new();
        for t in 0..=upto {
            if let Some(a) = state.ingest(&RawPoint::new(t, value)).unwrap() {
                out.push(a);
            }
        }
        out
    }

    #[test]
    fn perfect_prediction_has_zero_error() {
        let obs = [3.0, 4.0, 5.0];
        assert_eq!(window_aare(&obs, &obs, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn window_aare_matches_direct_arithmetic() {
        let got = window_aare(&[100.0, 200.0], &[110.0, 180.0], 1e-8).unwrap();
        assert_abs_diff_eq!(got, 0.10, epsilon = 1e-15);
    }

    #[test]
    fn zero_observation_stays_finite() {
        let got = window_aare(&[0.0, 1.0], &[0.5, 1.0], 1e-8).unwrap();
        assert!(got.is_finite());
        assert!(got > 0.0);
    }

    #[test]
    fn mismatched_windows_are_rejected() {
        let err = window_aare(&[1.0, 2.0], &[1.0], 1e-8).unwrap_err();
        assert_eq!(
            err,
            Error::LengthMismatch {
                observed: 2,
                predicted: 1
            }
        );
    }

    #[test]
    fn zero_variance_threshold_is_the_common_value() {
        let got = conversion_threshold(&[0.7, 0.7, 0.7, 0.7]).unwrap();
        assert_abs_diff_eq!(got, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn threshold_matches_hand_computation() {
        let got = conversion_threshold(&[0.1, 0.2, 0.3]).unwrap();
        assert_abs_diff_eq!(got, 0.4449489742783178, epsilon = 1e-12);
    }

    #[test]
    fn short_history_is_rejected() {
        assert_eq!(
            conversion_threshold(&[0.1]),
            Err(Error::InsufficientHistory { len: 1, min: 2 })
        );
    }

    #[test]
    fn emission_starts_at_2b_plus_1() {
        let b = 5;
        let mut state = ConversionState::new(b, NetworkConfig::conversion(1)).unwrap();
        let emitted = constant_stream(&mut state, 2 * b + 4, 7.0);
        let ts: Vec<usize> = emitted.iter().map(|a| a.t).collect();
        assert_eq!(ts, [11, 12, 13, 14]);
        assert_eq!(state.first_emission_t(), 11);
    }

    #[test]
    fn spec_scale_first_emission_is_201() {
        let b = 100;
        let mut state = ConversionState::new(b, NetworkConfig::conversion(1)).unwrap();
        let emitted = constant_stream(&mut state, 2 * b + 1, 5.0);
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].t, 201);
    }

    #[test]
    fn constant_series_yields_zero_aare_without_recalibration() {
        let b = 6;
        let mut state = ConversionState::new(b, NetworkConfig::conversion(3)).unwrap();
        let emitted = constant_stream(&mut state, 2 * b + 10, 42.0);
        assert!(!emitted.is_empty());
        for a in &emitted {
            assert_abs_diff_eq!(a.value, 0.0, epsilon = 1e-9);
            assert!(!a.recalibrated);
        }
    }

    #[test]
    fn repeated_index_is_out_of_order() {
        let mut state = ConversionState::new(4, NetworkConfig::conversion(1)).unwrap();
        state.ingest(&RawPoint::new(0, 1.0)).unwrap();
        let err = state.ingest(&RawPoint::new(0, 1.0)).unwrap_err();
        assert_eq!(err, Error::OutOfOrderPoint { expected: 1, got: 0 });
    }

    #[test]
    fn history_grows_once_per_point_from_2b_minus_1() {
        let b = 4;
        let mut state = ConversionState::new(b, NetworkConfig::conversion(2)).unwrap();
        for t in 0..(2 * b - 1) {
            state.ingest(&RawPoint::new(t, (t % 3) as f64 + 1.0)).unwrap();
            assert_eq!(state.aare_history().len(), 0);
        }
        for t in (2 * b - 1)..(2 * b + 6) {
            state.ingest(&RawPoint::new(t, (t % 3) as f64 + 1.0)).unwrap();
            assert_eq!(state.aare_history().len(), t - (2 * b - 1) + 1);
        }
    }

    #[test]
    fn spike_after_stability_triggers_recalibration() {
        let b = 5;
        let mut state = ConversionState::new(b, NetworkConfig::conversion(4)).unwrap();
        let mut emitted = constant_stream(&mut state, 2 * b + 20, 10.0);
        // A long zero-AARE history pins the threshold near zero, so the
        // prediction miss must take the recalibration branch.
        let t = 2 * b + 21;
        let a = state.ingest(&RawPoint::new(t, 100.0)).unwrap().unwrap();
        emitted.push(a);
        assert!(a.recalibrated);
        assert!(a.value >= 0.0 && a.value.is_finite());
    }

    #[test]
    fn tiny_b_is_rejected() {
        let err = ConversionState::new(1, NetworkConfig::conversion(1)).unwrap_err();
        assert_eq!(err, Error::InvalidConfig("window length b must be >= 2"));
    }
}
