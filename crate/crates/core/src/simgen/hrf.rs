//! Sampled hemodynamic responses and the piecewise-Bezier HRF generator.

use serde::{Deserialize, Serialize};

use super::SimError;

/// A hemodynamic response sampled every `dt` seconds from 0 to `duration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrfCurve {
    samples: Vec<f64>,
    dt: f64,
}

impl HrfCurve {
    pub fn new(samples: Vec<f64>, dt: f64) -> Self {
        assert!(dt > 0.0, "sampling period must be positive");
        assert!(!samples.is_empty(), "an HRF needs at least one sample");
        Self { samples, dt }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// `D`, the largest lag index; the curve holds `D + 1` samples.
    pub fn max_lag(&self) -> usize {
        self.samples.len() - 1
    }

    /// Sample time of lag `d`.
    pub fn time(&self, d: usize) -> f64 {
        d as f64 * self.dt
    }

    /// The sample with the largest magnitude (signed).
    pub fn peak(&self) -> f64 {
        self.samples.iter().copied().fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best })
    }

    /// Copy scaled so that the largest-magnitude sample equals 1.
    /// An all-zero curve is returned unchanged.
    pub fn peak_normalized(&self) -> HrfCurve {
        let p = self.peak();
        if p == 0.0 {
            return self.clone();
        }
        HrfCurve::new(self.samples.iter().map(|v| v / p).collect(), self.dt)
    }
}

/// Number of whole `dt` steps in `duration`, tolerant to representation error.
pub(crate) fn lag_count(duration: f64, dt: f64) -> usize {
    (duration / dt + 1e-9).floor() as usize
}

/// Shape parameters of a three-segment Bezier HRF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BezierHrfSpec {
    pub time_to_peak: f64,
    pub peak_amplitude: f64,
    pub time_to_undershoot: f64,
    pub undershoot_amplitude: f64,
    pub duration: f64,
    pub peak_width: f64,
    pub undershoot_width: f64,
}

/// One cubic Bezier segment in the (time, amplitude) plane.
#[derive(Debug, Clone, Copy)]
struct CubicSegment {
    x: [f64; 4],
    y: [f64; 4],
}

fn bernstein3(p: &[f64; 4], s: f64) -> f64 {
    let u = 1.0 - s;
    u * u * u * p[0] + 3.0 * u * u * s * p[1] + 3.0 * u * s * s * p[2] + s * s * s * p[3]
}

impl CubicSegment {
    /// Flat tangents at both ends: interior points share the ordinate of the
    /// nearest endpoint and sit `w0` / `w1` to the right / left of it.
    fn flat(start: (f64, f64), end: (f64, f64), w0: f64, w1: f64) -> Self {
        Self { x: [start.0, start.0 + w0, end.0 - w1, end.0], y: [start.1, start.1, end.1, end.1] }
    }

    /// x(s) is strictly increasing on [0, 1]. The derivative is a quadratic
    /// Bernstein polynomial with coefficients (a, b, c); it stays positive iff
    /// a, c > 0 and b > -sqrt(a c).
    fn is_monotone(&self) -> bool {
        let a = self.x[1] - self.x[0];
        let b = self.x[2] - self.x[1];
        let c = self.x[3] - self.x[2];
        a > 0.0 && c > 0.0 && b > -(a * c).sqrt()
    }

    fn value_at_time(&self, t: f64) -> f64 {
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[3] {
            return self.y[3];
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if bernstein3(&self.x, mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        bernstein3(&self.y, 0.5 * (lo + hi))
    }
}

impl BezierHrfSpec {
    fn validate(&self) -> Result<(), SimError> {
        let ok_times = 0.0 < self.time_to_peak
            && self.time_to_peak < self.time_to_undershoot
            && self.time_to_undershoot < self.duration;
        let ok_amps = self.peak_amplitude >= 0.0 && self.undershoot_amplitude <= 0.0;
        let ok_widths = self.peak_width > 0.0 && self.undershoot_width > 0.0;
        let finite = [
            self.time_to_peak,
            self.peak_amplitude,
            self.time_to_undershoot,
            self.undershoot_amplitude,
            self.duration,
            self.peak_width,
            self.undershoot_width,
        ]
        .iter()
        .all(|v| v.is_finite());
        if ok_times && ok_amps && ok_widths && finite {
            Ok(())
        } else {
            Err(SimError::InvalidHrfSpec(format!("{self:?}")))
        }
    }

    fn segments(&self) -> [CubicSegment; 3] {
        let hp = 0.5 * self.peak_width;
        let hu = 0.5 * self.undershoot_width;
        let origin = (0.0, 0.0);
        let peak = (self.time_to_peak, self.peak_amplitude);
        let under = (self.time_to_undershoot, self.undershoot_amplitude);
        let end = (self.duration, 0.0);
        [
            CubicSegment::flat(origin, peak, hp, hp),
            CubicSegment::flat(peak, under, hp, hu),
            CubicSegment::flat(under, end, hu, hu),
        ]
    }

    /// Continuous evaluation at time `t` (seconds). Knot times return the
    /// knot ordinates exactly.
    fn eval(&self, segs: &[CubicSegment; 3], t: f64) -> f64 {
        const KNOT_TOL: f64 = 1e-12;
        for seg in segs {
            if (t - seg.x[0]).abs() <= KNOT_TOL {
                return seg.y[0];
            }
        }
        if (t - self.duration).abs() <= KNOT_TOL {
            return 0.0;
        }
        let seg = segs.iter().find(|s| t < s.x[3]).unwrap_or(&segs[2]);
        seg.value_at_time(t)
    }
}

/// Samples a three-segment Bezier HRF on `{0, dt, ..., duration}`.
///
/// The curve passes through the origin, the peak, the undershoot and
/// `(duration, 0)` with zero slope at peak and undershoot.
pub fn build_bezier_hrf(spec: &BezierHrfSpec, dt: f64) -> Result<HrfCurve, SimError> {
    spec.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidSamplingPeriod(dt));
    }
    let steps = spec.duration / dt;
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(SimError::DurationNotOnGrid { duration: spec.duration, dt });
    }
    let segs = spec.segments();
    if let Some(i) = segs.iter().position(|s| !s.is_monotone()) {
        return Err(SimError::NonMonotoneBezier { segment: i });
    }
    let d_max = lag_count(spec.duration, dt);
    let samples = (0..=d_max).map(|d| spec.eval(&segs, d as f64 * dt)).collect();
    Ok(HrfCurve::new(samples, dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_spec() -> BezierHrfSpec {
        BezierHrfSpec {
            time_to_peak: 5.0,
            peak_amplitude: 1.0,
            time_to_undershoot: 11.0,
            undershoot_amplitude: -0.2,
            duration: 25.0,
            peak_width: 3.0,
            undershoot_width: 3.0,
        }
    }

    #[test]
    fn reference_curve_hits_its_knots() {
        let h = build_bezier_hrf(&reference_spec(), 0.5).unwrap();
        assert_eq!(h.samples().len(), 51);
        let (imax, max) =
            h.samples().iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let (imin, min) =
            h.samples().iter().enumerate().fold((0, f64::MAX), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
        assert_eq!(h.time(imax), 5.0);
        assert_eq!(max, 1.0);
        assert_eq!(h.time(imin), 11.0);
        assert_eq!(min, -0.2);
        assert_eq!(h.samples()[0], 0.0);
        assert_eq!(*h.samples().last().unwrap(), 0.0);
    }

    #[test]
    fn flat_spec_gives_zero_curve() {
        let spec = BezierHrfSpec { peak_amplitude: 0.0, undershoot_amplitude: 0.0, ..reference_spec() };
        let h = build_bezier_hrf(&spec, 0.5).unwrap();
        assert!(h.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overlapping_widths_are_rejected() {
        // segment 2 spans 6 s; 2 x 10 s of handle length folds x(s) back
        let spec = BezierHrfSpec { peak_width: 20.0, undershoot_width: 20.0, ..reference_spec() };
        assert!(matches!(build_bezier_hrf(&spec, 0.5), Err(SimError::NonMonotoneBezier { .. })));
    }

    #[test]
    fn invalid_ordering_is_rejected() {
        let spec = BezierHrfSpec { time_to_undershoot: 4.0, ..reference_spec() };
        assert!(matches!(build_bezier_hrf(&spec, 0.5), Err(SimError::InvalidHrfSpec(_))));
        assert!(build_bezier_hrf(&reference_spec(), 0.0).is_err());
        assert!(build_bezier_hrf(&reference_spec(), 0.7).is_err());
    }

    #[test]
    fn segments_are_monotone_between_knots() {
        let h = build_bezier_hrf(&reference_spec(), 0.1).unwrap();
        let s = h.samples();
        // rising to the peak, falling to the undershoot, recovering to zero
        assert!(s[..=50].windows(2).all(|w| w[1] >= w[0]));
        assert!(s[50..=110].windows(2).all(|w| w[1] <= w[0]));
        assert!(s[110..].windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn peak_normalization() {
        let h = HrfCurve::new(vec![0.0, 2.0, -3.0, 0.0], 1.0);
        assert_eq!(h.peak(), -3.0);
        let n = h.peak_normalized();
        assert_eq!(n.samples(), &[-0.0, -2.0 / 3.0, 1.0, -0.0]);
    }

    /// Independent evaluator: expands the first segment in the power basis,
    /// samples it densely and refines the bracketing parameter interval by
    /// bisection.
    fn dense_oracle(t: f64) -> f64 {
        let (x, y) = ([0.0, 1.5, 3.5, 5.0], [0.0, 0.0, 1.0, 1.0]);
        let poly = |p: [f64; 4], s: f64| {
            let c1 = 3.0 * (p[1] - p[0]);
            let c2 = 3.0 * (p[2] - 2.0 * p[1] + p[0]);
            let c3 = p[3] - 3.0 * p[2] + 3.0 * p[1] - p[0];
            p[0] + s * (c1 + s * (c2 + s * c3))
        };
        let n = 100_000;
        let k = (0..n).find(|&k| poly(x, (k + 1) as f64 / n as f64) >= t).unwrap();
        let (mut lo, mut hi) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if poly(x, mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        poly(y, 0.5 * (lo + hi))
    }

    #[test]
    fn matches_dense_oracle() {
        let h = build_bezier_hrf(&reference_spec(), 0.5).unwrap();
        let want = dense_oracle(2.5);
        assert!((h.samples()[5] - want).abs() < 1e-6, "{} vs {want}", h.samples()[5]);
        // the first segment is point-symmetric about its midpoint
        assert!((want - 0.5).abs() < 1e-9);
        for d in [1, 3, 7, 9] {
            assert!((h.samples()[d] - dense_oracle(d as f64 * 0.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn default_style_specs_have_zero_endpoints() {
        for ttp in [4.0, 6.0, 8.0, 10.0] {
            let spec = BezierHrfSpec {
                time_to_peak: ttp,
                time_to_undershoot: ttp + 6.0,
                undershoot_width: 4.0,
                ..reference_spec()
            };
            let h = build_bezier_hrf(&spec, 0.5).unwrap();
            assert_eq!(h.samples()[0], 0.0);
            assert_eq!(*h.samples().last().unwrap(), 0.0);
            assert_eq!(h.peak(), 1.0);
        }
    }
}
