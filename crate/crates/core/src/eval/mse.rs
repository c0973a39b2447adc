use super::EvalError;

/// Relative detection error `||a_hat - a_true||^2 / ||a_true||^2`.
pub fn detection_mse(a_hat: &[f64], a_true: &[f64]) -> Result<f64, EvalError> {
    if a_hat.len() != a_true.len() {
        return Err(EvalError::LengthMismatch { left: a_hat.len(), right: a_true.len() });
    }
    let denom: f64 = a_true.iter().map(|a| a * a).sum();
    if denom == 0.0 {
        return Err(EvalError::ZeroTruth);
    }
    let num: f64 = a_hat.iter().zip(a_true).map(|(h, t)| (h - t).powi(2)).sum();
    Ok(num / denom)
}
