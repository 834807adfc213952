//! Self-check that the training gradient matches central finite differences.

use salad_core::model::{
    analytic_gradient, max_relative_gradient_gap, numeric_gradient, NetworkConfig, SequenceModel,
    DEFAULT_FD_STEP,
};

use crate::error::Result;

/// Largest acceptable relative gap between the two gradient routes.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Gradients below this magnitude carry no signal against finite-difference
/// roundoff and are excluded from the comparison.
pub const GRADCHECK_FLOOR: f64 = 1e-8;

/// One sine cycle; long enough to exercise the recurrent path.
const CHECK_WINDOW_LEN: usize = 24;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub hidden_units: usize,
    pub seed: u64,
    pub max_relative_gap: f64,
    pub params_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_gap < GRADCHECK_TOLERANCE
    }
}

/// Compare the analytic BPTT gradient against central finite differences
/// (step 1e-5) on a freshly initialized model over one sine cycle.
pub fn gradient_check(hidden_units: usize, seed: u64) -> Result<GradCheckReport> {
    let window: Vec<f64> = (0..CHECK_WINDOW_LEN)
        .map(|i| 0.5 + 0.4 * (std::f64::consts::TAU * i as f64 / CHECK_WINDOW_LEN as f64).sin())
        .collect();
    let config = NetworkConfig {
        hidden_units,
        ..NetworkConfig::conversion(seed)
    };
    let model = SequenceModel::new(&config)?;
    let analytic = analytic_gradient(&model, &window)?;
    let numeric = numeric_gradient(&model, &window, DEFAULT_FD_STEP)?;
    let max_relative_gap = max_relative_gradient_gap(&analytic, &numeric, GRADCHECK_FLOOR);
    Ok(GradCheckReport {
        hidden_units,
        seed,
        max_relative_gap,
        params_checked: analytic.len(),
    })
}
