//! The tiny LSTM regressor both detector stages share.
//!
//! One hidden layer, scalar input, scalar output. A model is trained from
//! scratch on every (re)training window: min-max scale the window, unroll the
//! standard LSTM cell over the scaled sequence with one-step-ahead targets,
//! and descend the full-sequence MSE with Adam until the epoch cap or early
//! stopping ends the run. Everything is seeded and single-threaded, so a given
//! `(window, config)` pair always yields the same model, bit for bit.
//!
//! Cell equations per step (sigmoid gates, tanh candidate):
//!
//! ```text
//! i = sig(Wi x + Ui h + bi)      f = sig(Wf x + Uf h + bf)
//! g = tanh(Wg x + Ug h + bg)     o = sig(Wo x + Uo h + bo)
//! c' = f*c + i*g                 h' = o * tanh(c')
//! y  = w_out . h' + b_out
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Finite-difference step used when no explicit step is given.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Hyperparameters for one model instance.
///
/// The two stages use the same shape and differ only in the epoch cap: the
/// raw-value model trains on long windows (cap 100), the AARE model on three
/// points (cap 50).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub hidden_units: usize,
    pub epoch_cap: usize,
    pub early_stop_patience: usize,
    pub early_stop_min_delta: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl NetworkConfig {
    /// Conversion-stage configuration (epoch cap 100).
    ///
    /// The learning rate and stopping patience are tuned so a 10-unit model
    /// reliably reaches its noise floor on recurrent windows within the
    /// epoch cap; stopping earlier leaves the forecaster visibly underfit.
    pub fn conversion(seed: u64) -> Self {
        Self {
            hidden_units: 10,
            epoch_cap: 100,
            early_stop_patience: 10,
            early_stop_min_delta: 1e-6,
            learning_rate: 0.04,
            seed,
        }
    }

    /// Detection-stage configuration (epoch cap 50).
    pub fn detection(seed: u64) -> Self {
        Self {
            epoch_cap: 50,
            ..Self::conversion(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::InvalidConfig("hidden_units must be >= 1"));
        }
        if self.epoch_cap == 0 {
            return Err(Error::InvalidConfig("epoch_cap must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0"));
        }
        if !(self.early_stop_min_delta >= 0.0) {
            return Err(Error::InvalidConfig("early_stop_min_delta must be >= 0"));
        }
        Ok(())
    }
}

/// Min-max scaler fitted on each training window.
///
/// A degenerate window (`hi == lo`) maps every input to 0.5 and inverts back
/// to `lo`, which makes constant series an exact fixed point of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxScaler {
    lo: f64,
    hi: f64,
}

impl MinMaxScaler {
    /// The identity mapping on `[0, 1]`; placeholder until a window is fitted.
    pub fn identity() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (t, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput { t });
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    fn degenerate(&self) -> bool {
        self.hi == self.lo
    }

    pub fn transform(&self, x: f64) -> f64 {
        if self.degenerate() {
            0.5
        } else {
            (x - self.lo) / (self.hi - self.lo)
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        if self.degenerate() {
            self.lo
        } else {
            self.lo + y * (self.hi - self.lo)
        }
    }
}

/// One gate's parameters: input weight per unit, recurrent weights (row-major
/// `[unit][prev_unit]`), and bias per unit.
#[derive(Debug, Clone, PartialEq)]
struct Gate {
    w: Vec<f64>,
    u: Vec<f64>,
    b: Vec<f64>,
}

impl Gate {
    fn zeros(hidden: usize) -> Self {
        Self {
            w: vec![0.0; hidden],
            u: vec![0.0; hidden * hidden],
            b: vec![0.0; hidden],
        }
    }

    /// Pre-activation for every unit: `w*x + u.h_prev + b`.
    fn preact(&self, x: f64, h_prev: &[f64], out: &mut [f64]) {
        let hidden = self.b.len();
        for j in 0..hidden {
            let mut z = self.w[j] * x + self.b[j];
            let row = &self.u[j * hidden..(j + 1) * hidden];
            for (uw, hp) in row.iter().zip(h_prev) {
                z += uw * hp;
            }
            out[j] = z;
        }
    }
}

/// A trained (or freshly initialized) LSTM regressor with its paired scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    hidden: usize,
    input_gate: Gate,
    forget_gate: Gate,
    cell_gate: Gate,
    output_gate: Gate,
    w_out: Vec<f64>,
    b_out: f64,
    scaler: MinMaxScaler,
    trained_epochs: usize,
}

/// Per-step activations kept for backpropagation through time.
struct StepCache {
    x: f64,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
    y: f64,
}

impl SequenceModel {
    /// Seeded initialization: weights uniform in `[-0.5, 0.5]` scaled by
    /// `1/sqrt(hidden_units)`, biases zero except the forget bias at 1.0
    /// (keeps early memory open on short sequences). The scaler starts as
    /// identity and is replaced by training.
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let hidden = config.hidden_units;
        let scale = 1.0 / libm::sqrt(hidden as f64);
        let mut rng = SplitMix64::new(config.seed);
        let mut weights = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.uniform(-0.5, 0.5) * scale).collect()
        };
        let mut gate = |forget: bool| -> Gate {
            let w = weights(hidden);
            let u = weights(hidden * hidden);
            let b = vec![if forget { 1.0 } else { 0.0 }; hidden];
            Gate { w, u, b }
        };
        let input_gate = gate(false);
        let forget_gate = gate(true);
        let cell_gate = gate(false);
        let output_gate = gate(false);
        let w_out = weights(hidden);
        Ok(Self {
            hidden,
            input_gate,
            forget_gate,
            cell_gate,
            output_gate,
            w_out,
            b_out: 0.0,
            scaler: MinMaxScaler::identity(),
            trained_epochs: 0,
        })
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    pub fn trained_epochs(&self) -> usize {
        self.trained_epochs
    }

    pub fn scaler(&self) -> &MinMaxScaler {
        &self.scaler
    }

    /// Output-layer weights (one per hidden unit).
    pub fn output_weights(&self) -> &[f64] {
        &self.w_out
    }

    pub fn param_count(&self) -> usize {
        let h = self.hidden;
        4 * (h + h * h + h) + h + 1
    }

    /// Flatten all parameters in a fixed order: per gate (input, forget,
    /// cell, output) the input weights, recurrent weights, bias; then the
    /// output weights and output bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for gate in [
            &self.input_gate,
            &self.forget_gate,
            &self.cell_gate,
            &self.output_gate,
        ] {
            out.extend_from_slice(&gate.w);
            out.extend_from_slice(&gate.u);
            out.extend_from_slice(&gate.b);
        }
        out.extend_from_slice(&self.w_out);
        out.push(self.b_out);
        out
    }

    /// Inverse of [`params`](Self::params).
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                observed: flat.len(),
                predicted: self.param_count(),
            });
        }
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &flat[pos..pos + n];
            pos += n;
            s
        };
        let h = self.hidden;
        for gate in [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.cell_gate,
            &mut self.output_gate,
        ] {
            gate.w.copy_from_slice(take(h));
            gate.u.copy_from_slice(take(h * h));
            gate.b.copy_from_slice(take(h));
        }
        self.w_out.copy_from_slice(take(h));
        self.b_out = flat[pos];
        Ok(())
    }

    pub fn params_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    /// Run the cell over a scaled sequence, returning per-step caches.
    fn forward(&self, xs: &[f64]) -> Vec<StepCache> {
        let h = self.hidden;
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut scratch = vec![0.0; h];
        let mut steps = Vec::with_capacity(xs.len());
        for &x in xs {
            let mut step = StepCache {
                x,
                i: vec![0.0; h],
                f: vec![0.0; h],
                g: vec![0.0; h],
                o: vec![0.0; h],
                c: vec![0.0; h],
                tc: vec![0.0; h],
                h: vec![0.0; h],
                y: 0.0,
            };
            self.input_gate.preact(x, &h_prev, &mut scratch);
            for j in 0..h {
                step.i[j] = sigmoid(scratch[j]);
            }
            self.forget_gate.preact(x, &h_prev, &mut scratch);
            for j in 0..h {
                step.f[j] = sigmoid(scratch[j]);
            }
            self.cell_gate.preact(x, &h_prev, &mut scratch);
            for j in 0..h {
                step.g[j] = libm::tanh(scratch[j]);
            }
            self.output_gate.preact(x, &h_prev, &mut scratch);
            for j in 0..h {
                step.o[j] = sigmoid(scratch[j]);
            }
            let mut y = self.b_out;
            for j in 0..h {
                step.c[j] = step.f[j] * c_prev[j] + step.i[j] * step.g[j];
                step.tc[j] = libm::tanh(step.c[j]);
                step.h[j] = step.o[j] * step.tc[j];
                y += self.w_out[j] * step.h[j];
            }
            step.y = y;
            h_prev.copy_from_slice(&step.h);
            c_prev.copy_from_slice(&step.c);
            steps.push(step);
        }
        steps
    }

    /// One-step-ahead prediction in original units.
    ///
    /// The sequence is scaled with the model's scaler, run through the cell,
    /// and the final step's output is inverse-scaled. Pure: same model and
    /// input always give the same value.
    pub fn predict_next(&self, recent: &[f64]) -> Result<f64> {
        if recent.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (t, &v) in recent.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput { t });
            }
        }
        let xs: Vec<f64> = recent.iter().map(|&v| self.scaler.transform(v)).collect();
        let steps = self.forward(&xs);
        let y = steps.last().map(|s| s.y).unwrap_or(0.0);
        Ok(self.scaler.inverse(y))
    }

    /// Mean squared error, in scaled units, of one-step-ahead prediction over
    /// `window`, using the model's current scaler. This is the quantity the
    /// gradient routines differentiate.
    pub fn window_loss(&self, window: &[f64]) -> Result<f64> {
        let (xs, ts) = self.scaled_pairs(window)?;
        let steps = self.forward(&xs);
        let n = ts.len() as f64;
        let mut loss = 0.0;
        for (step, tgt) in steps.iter().zip(&ts) {
            let e = step.y - tgt;
            loss += e * e;
        }
        Ok(loss / n)
    }

    /// Per-step prediction errors `y_t - target_t` over `window`, in scaled
    /// units. The finite-difference oracle differences these term by term,
    /// which avoids cancelling two fully accumulated losses against each
    /// other.
    pub fn step_errors(&self, window: &[f64]) -> Result<Vec<f64>> {
        let (xs, ts) = self.scaled_pairs(window)?;
        let steps = self.forward(&xs);
        Ok(steps.iter().zip(&ts).map(|(s, t)| s.y - t).collect())
    }

    fn scaled_pairs(&self, window: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if window.len() < 2 {
            return Err(Error::WindowTooShort {
                len: window.len(),
                min: 2,
            });
        }
        for (t, &v) in window.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput { t });
            }
        }
        let scaled: Vec<f64> = window.iter().map(|&v| self.scaler.transform(v)).collect();
        let xs = scaled[..scaled.len() - 1].to_vec();
        let ts = scaled[1..].to_vec();
        Ok((xs, ts))
    }

    /// Loss and its gradient (flat layout) over pre-scaled inputs/targets.
    fn loss_and_grad(&self, xs: &[f64], ts: &[f64]) -> (f64, Vec<f64>) {
        let h = self.hidden;
        let steps = self.forward(xs);
        let n = ts.len() as f64;

        let mut loss = 0.0;
        let mut gi = Gate::zeros(h);
        let mut gf = Gate::zeros(h);
        let mut gg = Gate::zeros(h);
        let mut go = Gate::zeros(h);
        let mut g_wout = vec![0.0; h];
        let mut g_bout = 0.0;

        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let zeros = vec![0.0; h];
        let mut dzi = vec![0.0; h];
        let mut dzf = vec![0.0; h];
        let mut dzg = vec![0.0; h];
        let mut dzo = vec![0.0; h];

        for t in (0..steps.len()).rev() {
            let step = &steps[t];
            let h_prev = if t == 0 { &zeros } else { &steps[t - 1].h };
            let c_prev = if t == 0 { &zeros } else { &steps[t - 1].c };

            let err = step.y - ts[t];
            loss += err * err;
            let dy = 2.0 * err / n;
            g_bout += dy;

            for j in 0..h {
                g_wout[j] += dy * step.h[j];
                let dh = dy * self.w_out[j] + dh_next[j];
                let do_ = dh * step.tc[j];
                let dtc = dh * step.o[j];
                let dc = dtc * (1.0 - step.tc[j] * step.tc[j]) + dc_next[j];
                let di = dc * step.g[j];
                let dg = dc * step.i[j];
                let df = dc * c_prev[j];
                dc_next[j] = dc * step.f[j];
                dzi[j] = di * step.i[j] * (1.0 - step.i[j]);
                dzf[j] = df * step.f[j] * (1.0 - step.f[j]);
                dzg[j] = dg * (1.0 - step.g[j] * step.g[j]);
                dzo[j] = do_ * step.o[j] * (1.0 - step.o[j]);
            }

            for j in 0..h {
                gi.w[j] += dzi[j] * step.x;
                gf.w[j] += dzf[j] * step.x;
                gg.w[j] += dzg[j] * step.x;
                go.w[j] += dzo[j] * step.x;
                gi.b[j] += dzi[j];
                gf.b[j] += dzf[j];
                gg.b[j] += dzg[j];
                go.b[j] += dzo[j];
                let row = j * h;
                for k in 0..h {
                    gi.u[row + k] += dzi[j] * h_prev[k];
                    gf.u[row + k] += dzf[j] * h_prev[k];
                    gg.u[row + k] += dzg[j] * h_prev[k];
                    go.u[row + k] += dzo[j] * h_prev[k];
                }
            }

            for k in 0..h {
                let mut d = 0.0;
                for j in 0..h {
                    let row = j * h;
                    d += dzi[j] * self.input_gate.u[row + k]
                        + dzf[j] * self.forget_gate.u[row + k]
                        + dzg[j] * self.cell_gate.u[row + k]
                        + dzo[j] * self.output_gate.u[row + k];
                }
                dh_next[k] = d;
            }
        }

        let mut flat = Vec::with_capacity(self.param_count());
        for gate in [&gi, &gf, &gg, &go] {
            flat.extend_from_slice(&gate.w);
            flat.extend_from_slice(&gate.u);
            flat.extend_from_slice(&gate.b);
        }
        flat.extend_from_slice(&g_wout);
        flat.push(g_bout);
        (loss / n, flat)
    }
}

/// Result of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: SequenceModel,
    /// Final epoch's pre-update loss, in scaled units.
    pub final_loss: f64,
    pub epochs_run: usize,
}

/// Train a fresh model on `window` with one-step-ahead targets.
///
/// Fits the scaler to the window, initializes from `config.seed`, and runs
/// full backpropagation through time under Adam. Stops at the epoch cap, or
/// earlier once the loss has failed to improve on its best value by at least
/// `early_stop_min_delta` for `early_stop_patience` consecutive epochs.
pub fn train(window: &[f64], config: &NetworkConfig) -> Result<TrainOutcome> {
    let mut model = SequenceModel::new(config)?;
    if window.len() < 2 {
        return Err(Error::WindowTooShort {
            len: window.len(),
            min: 2,
        });
    }
    model.scaler = MinMaxScaler::fit(window)?;
    let (xs, ts) = model.scaled_pairs(window)?;

    let n_params = model.param_count();
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);

    let mut best = f64::INFINITY;
    let mut wait = 0usize;
    let mut final_loss = f64::INFINITY;
    let mut epochs_run = 0usize;

    for epoch in 1..=config.epoch_cap {
        let (loss, grads) = model.loss_and_grad(&xs, &ts);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }

        let mut params = model.params();
        let b1t = 1.0 - libm::pow(beta1, epoch as f64);
        let b2t = 1.0 - libm::pow(beta2, epoch as f64);
        for k in 0..n_params {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grads[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grads[k] * grads[k];
            let m_hat = m[k] / b1t;
            let v_hat = v[k] / b2t;
            params[k] -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + eps);
            if !params[k].is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
        }
        model.set_params(&params)?;

        final_loss = loss;
        epochs_run = epoch;
        if best - loss > config.early_stop_min_delta {
            best = loss;
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.early_stop_patience {
                break;
            }
        }
    }

    model.trained_epochs = epochs_run;
    Ok(TrainOutcome {
        model,
        final_loss,
        epochs_run,
    })
}

/// Analytic BPTT gradient of [`SequenceModel::window_loss`] at the model's
/// current parameters, in flat layout.
pub fn analytic_gradient(model: &SequenceModel, window: &[f64]) -> Result<Vec<f64>> {
    let (xs, ts) = model.scaled_pairs(window)?;
    Ok(model.loss_and_grad(&xs, &ts).1)
}

/// Central finite differences of the same loss, one parameter at a time.
///
/// Kept deliberately independent of the backward pass: it only re-runs the
/// forward pass at perturbed parameters. The quotient
/// `(loss(p+h) - loss(p-h)) / 2h` is evaluated in its per-step product form
/// `sum (e+ - e-)(e+ + e-) / (T 2h)`, which differences the nearly equal
/// error pairs before accumulating and keeps the quotient usable for
/// gradients within a few decades of the filter floor.
pub fn numeric_gradient(model: &SequenceModel, window: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::OutOfRange("finite-difference step must be > 0"));
    }
    // Validate the window once up front.
    model.window_loss(window)?;
    let mut probe = model.clone();
    let base = model.params();
    let mut grad = Vec::with_capacity(base.len());
    let mut params = base.clone();
    for k in 0..base.len() {
        params[k] = base[k] + step;
        probe.set_params(&params)?;
        let plus = probe.step_errors(window)?;
        params[k] = base[k] - step;
        probe.set_params(&params)?;
        let minus = probe.step_errors(window)?;
        params[k] = base[k];
        let n = plus.len() as f64;
        let sum: f64 = plus
            .iter()
            .zip(&minus)
            .map(|(&ep, &em)| (ep - em) * (ep + em))
            .sum();
        grad.push(sum / (n * 2.0 * step));
    }
    Ok(grad)
}

/// Worst relative disagreement between analytic and numeric gradients,
/// ignoring entries where both are below `floor` in magnitude.
pub fn max_relative_gradient_gap(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let mag = a.abs().max(n.abs());
        if mag > floor {
            worst = worst.max((a - n).abs() / mag);
        }
    }
    worst
}
