//! Finite-difference verification of analytic gradients.
//!
//! Central differences over every scalar parameter, depending only on the
//! forward loss, so it stays an independent check on the backward pass.

use crate::encoder::EncoderParams;
use crate::grad::{batch_mean_loss, EncoderGradients, GradError, TrainingExample};

/// Central-difference gradient of the mean batch loss with respect to every
/// scalar parameter, in the canonical parameter order.
pub fn finite_difference_gradients(
    params: &EncoderParams,
    batch: &[TrainingExample],
    epsilon: f64,
) -> Result<Vec<f64>, GradError> {
    let mut work = params.clone();
    let n = work.param_len();
    let mut grads = Vec::with_capacity(n);
    for i in 0..n {
        let original = work.param(i);
        work.set_param(i, original + epsilon);
        let plus = batch_mean_loss(&work, batch)?;
        work.set_param(i, original - epsilon);
        let minus = batch_mean_loss(&work, batch)?;
        work.set_param(i, original);
        grads.push((plus - minus) / (2.0 * epsilon));
    }
    Ok(grads)
}

/// Comparison between analytic and numeric gradients.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// max_i |a_i - n_i| / scale, where scale is the largest gradient
    /// magnitude seen on either side (floored to avoid 0/0).
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub scale: f64,
    pub checked: usize,
}

pub fn compare_gradients(analytic: &EncoderGradients, numeric: &[f64]) -> GradCheckReport {
    let flat = analytic.flatten();
    assert_eq!(
        flat.len(),
        numeric.len(),
        "gradient vectors must have equal length"
    );
    let mut max_abs = 0.0f64;
    let mut scale = 0.0f64;
    for (a, n) in flat.iter().zip(numeric) {
        max_abs = max_abs.max((a - n).abs());
        scale = scale.max(a.abs()).max(n.abs());
    }
    let scale = scale.max(1e-12);
    GradCheckReport {
        max_relative_error: max_abs / scale,
        max_absolute_error: max_abs,
        scale,
        checked: flat.len(),
    }
}

/// Run the full check: analytic vs central differences on one batch.
pub fn check(
    params: &EncoderParams,
    batch: &[TrainingExample],
    epsilon: f64,
) -> Result<GradCheckReport, GradError> {
    let analytic = crate::grad::loss_gradients(params, batch)?;
    let numeric = finite_difference_gradients(params, batch, epsilon)?;
    Ok(compare_gradients(&analytic, &numeric))
}
