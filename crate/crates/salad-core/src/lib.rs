//! Self-adaptive streaming anomaly detection for recurrent time series.
//!
//! The detector never trains offline and never asks for a threshold. It keeps
//! a tiny single-layer LSTM forecasting the next raw value, folds each
//! prediction error into a windowed average absolute relative error (AARE)
//! stream, and runs a second tiny LSTM over that much smoother stream. A point
//! is flagged only when its detection-stage AARE exceeds a continuously
//! re-derived mean + 3 sigma threshold twice: once with the current model and
//! once more after retraining on the freshest history (the double check).
//!
//! The crate is `no_std` (`alloc` required) and fully deterministic: fixed
//! seeds give bit-identical models, streams, and verdicts. IO, timing, and the
//! CLI live in the companion `salad` crate.
//!
//! Module map:
//!
//! - [`model`] — the LSTM regressor: seeded init, full BPTT training with
//!   early stopping, one-step prediction, and finite-difference gradients.
//! - [`conversion`] — raw values in, calibrated AARE stream out.
//! - [`detection`] — calibrated AARE in, per-point verdicts out.
//! - [`evaluation`] — window-based precision/recall/F-score over alerts.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod conversion;
pub mod detection;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod rng;

mod stats;
mod window;

pub use conversion::{CalibratedAare, ConversionState, RawPoint};
pub use detection::{DetectionState, DetectionVerdict, VerdictKind};
pub use error::Error;
pub use evaluation::{AnomalyAlert, EvalConfig, EvalReport, LabelWindow, TimingStats};
pub use model::{NetworkConfig, SequenceModel, TrainOutcome};
