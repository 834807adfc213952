//! Small numeric helpers shared by the two detector stages.

/// Mean plus three population standard deviations, dividing by the actual
/// number of entries present.
pub(crate) fn mean_plus_three_sigma(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    mean + 3.0 * libm::sqrt(var)
}

/// Average absolute relative error with the denominator floored at `epsilon`.
pub(crate) fn average_abs_relative_error(observed: &[f64], predicted: &[f64], epsilon: f64) -> f64 {
    let n = observed.len() as f64;
    let sum: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(&v, &p)| (v - p).abs() / v.abs().max(epsilon))
        .sum();
    sum / n
}

/// Denominator floor: tiny relative to the largest magnitude seen so far, but
/// never smaller than 1e-8 so literal zeros stay harmless.
pub(crate) fn epsilon_floor(running_abs_max: f64) -> f64 {
    1e-8 * running_abs_max.max(1.0)
}
