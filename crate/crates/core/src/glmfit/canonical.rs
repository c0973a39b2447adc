//! Double-gamma canonical HRF and its finite-difference derivatives.

use serde::{Deserialize, Serialize};

use super::GlmError;
use crate::simgen::HrfCurve;

/// Shape of the canonical response. Each gamma lobe is written in
/// peak/dispersion form, `(t/d)^(d/s) exp(-(t-d)/s)`, which attains its
/// maximum of 1 at `t = d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonicalHrfParams {
    pub peak_delay: f64,
    pub peak_dispersion: f64,
    pub undershoot_delay: f64,
    pub undershoot_dispersion: f64,
    pub undershoot_ratio: f64,
    /// Onset shift used by the temporal derivative (seconds).
    pub shift: f64,
    /// Step on `peak_dispersion` used by the dispersion derivative.
    pub dispersion_step: f64,
}

impl Default for CanonicalHrfParams {
    fn default() -> Self {
        Self {
            peak_delay: 6.0,
            peak_dispersion: 1.0,
            undershoot_delay: 16.0,
            undershoot_dispersion: 1.0,
            undershoot_ratio: 1.0 / 6.0,
            shift: 1.0,
            dispersion_step: 0.01,
        }
    }
}

fn gamma_lobe(t: f64, delay: f64, dispersion: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (t / delay).powf(delay / dispersion) * (-(t - delay) / dispersion).exp()
    }
}

impl CanonicalHrfParams {
    /// Unnormalised response at time `t` with the given peak dispersion.
    pub fn eval_raw(&self, t: f64, peak_dispersion: f64) -> f64 {
        gamma_lobe(t, self.peak_delay, peak_dispersion)
            - self.undershoot_ratio * gamma_lobe(t, self.undershoot_delay, self.undershoot_dispersion)
    }
}

/// The canonical HRF `h` (peak-normalised on the sample grid), its temporal
/// derivative `h'` (centred difference over a `shift`-second onset shift) and
/// its dispersion derivative `h''` (difference over `dispersion_step`), all
/// sampled every `dt` seconds on `[0, duration]`.
pub fn canonical_hrf_basis(
    params: &CanonicalHrfParams,
    tr: f64,
    dt: f64,
    duration: f64,
) -> Result<[HrfCurve; 3], GlmError> {
    let ratio = tr / dt;
    if !(dt > 0.0 && tr > 0.0) || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(GlmError::InvalidBasis(format!("dt = {dt} does not divide tr = {tr}")));
    }
    if duration < 25.0 {
        return Err(GlmError::InvalidBasis(format!("duration {duration} s is shorter than 25 s")));
    }
    let d_max = (duration / dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=d_max).map(|d| d as f64 * dt).collect();
    let disp = params.peak_dispersion;
    let norm = times.iter().map(|&t| params.eval_raw(t, disp)).fold(f64::MIN, f64::max);
    let h = |t: f64| params.eval_raw(t, disp) / norm;
    let half = 0.5 * params.shift;

    let base = times.iter().map(|&t| h(t)).collect();
    let temporal = times.iter().map(|&t| (h(t + half) - h(t - half)) / params.shift).collect();
    let dispersion = times
        .iter()
        .map(|&t| (h(t) - params.eval_raw(t, disp + params.dispersion_step) / norm) / params.dispersion_step)
        .collect();
    Ok([HrfCurve::new(base, dt), HrfCurve::new(temporal, dt), HrfCurve::new(dispersion, dt)])
}
