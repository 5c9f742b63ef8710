use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::quad::quad;
use crate::error::{Error, Result};
use crate::geomkit::{Chart, Interval, MetricChart, ScalarField};

/// Number of samples used for every curvature and monotonicity test.
pub const CURVE_GRID: usize = 512;

pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn d1(f: &ScalarField, t: f64) -> f64 {
    f.gradient(&[t], 1e-5)[0]
}

fn d2(f: &ScalarField, t: f64) -> f64 {
    f.hessian(&[t], 1e-4)[(0, 0)]
}

/// `v₂′v₁ − v₂v₁′` for one-variable profiles.
pub fn profile_wronskian(v1: &ScalarField, v2: &ScalarField, t: f64) -> f64 {
    d1(v2, t) * v1.value(&[t]) - v2.value(&[t]) * d1(v1, t)
}

/// Samples of `v₂/v₁` certifying that two independent solutions with
/// `v₁ > 0` cannot both be periodic.
#[derive(Debug, Clone)]
pub struct RatioWitness {
    pub t: Vec<f64>,
    pub ratio: Vec<f64>,
    /// `+1` increasing, `−1` decreasing.
    pub direction: f64,
    pub strictly_monotone: bool,
    /// `min |W / v₁²|` over the grid.
    pub min_slope: f64,
}

pub fn positive_excludes_allperiodic(
    v1: &ScalarField,
    v2: &ScalarField,
    window: (f64, f64),
) -> Result<RatioWitness> {
    let t = uniform_grid(window.0, window.1, CURVE_GRID);
    if let Some(&bad) = t.iter().find(|&&s| !(v1.value(&[s]) > 0.0)) {
        return Err(Error::Precondition(format!("v1 is not positive at t = {bad}")));
    }
    let w0 = profile_wronskian(v1, v2, t[0]);
    if w0.abs() < 1e-12 {
        return Err(Error::Precondition("solutions are dependent (zero Wronskian)".into()));
    }
    let ratio: Vec<f64> = t.iter().map(|&s| v2.value(&[s]) / v1.value(&[s])).collect();
    let direction = w0.signum();
    let strictly_monotone = ratio.windows(2).all(|p| (p[1] - p[0]) * direction > 0.0);
    let min_slope = t
        .iter()
        .map(|&s| (profile_wronskian(v1, v2, s) / v1.value(&[s]).powi(2)).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(RatioWitness {
        t,
        ratio,
        direction,
        strictly_monotone,
        min_slope,
    })
}

/// Outcome of the `u(−∞) ≥ 0` test.
#[derive(Debug, Clone, Copy)]
pub struct PositivityCheck {
    /// `u` at the left end of the window.
    pub u_left: f64,
    /// Declared bound on `∫_{−∞}^{lo} 1/v₁²`, if any.
    pub tail_bound: Option<f64>,
    /// True when no tail bound was supplied and only the window was checked.
    pub window_only: bool,
}

/// Two warping profiles with the same Gauss curvature `τ = −v″/v`.
#[derive(Debug, Clone)]
pub struct SurfacePair {
    pub v1: ScalarField,
    pub v2: ScalarField,
    /// `v₂ = v₁ u`.
    pub u: ScalarField,
    pub c2: f64,
    pub window: (f64, f64),
    pub positivity: PositivityCheck,
}

impl SurfacePair {
    /// `−v₁″/v₁`.
    pub fn tau(&self, t: f64) -> f64 {
        -d2(&self.v1, t) / self.v1.value(&[t])
    }

    /// `−v₂″/v₂`.
    pub fn tau2(&self, t: f64) -> f64 {
        -d2(&self.v2, t) / self.v2.value(&[t])
    }

    pub fn wronskian(&self, t: f64) -> f64 {
        profile_wronskian(&self.v1, &self.v2, t)
    }

    /// `dt² + v²dx²` on the window times `x ∈ [−1, 1]`.
    pub fn metric(&self, which: usize) -> MetricChart {
        let v = if which == 1 { self.v1.clone() } else { self.v2.clone() };
        let chart = Chart::new(vec![
            Interval::closed(self.window.0, self.window.1),
            Interval::closed(-1.0, 1.0),
        ])
        .expect("window is a valid interval");
        MetricChart::diagonal(format!("surface{which}"), chart, move |p| {
            vec![1.0, v.value(&[p[0]]).powi(2)]
        })
    }
}

/// Builds `v₂ = v₁ u` with `u(t) = ∫₀ᵗ v₁⁻² + C₂`.
///
/// `u(−∞) ≥ 0` is required. With a `tail_bound` on `∫_{−∞}^{lo} v₁⁻²` the test
/// is `u(lo) − tail_bound ≥ 0`; without one only `u(lo) ≥ 0` is checked and
/// the result is flagged as window-only.
pub fn build_isocurved_pair(
    v1: &ScalarField,
    c2: f64,
    window: (f64, f64),
    tail_bound: Option<f64>,
) -> Result<SurfacePair> {
    if v1.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: v1.dim() });
    }
    if !(window.0 < window.1) {
        return Err(Error::Domain(format!("invalid window {window:?}")));
    }
    for t in uniform_grid(window.0, window.1, CURVE_GRID) {
        if !(v1.value(&[t]) > 0.0) {
            return Err(Error::Precondition(format!("v1 is not positive at t = {t}")));
        }
    }
    let inv_sq = {
        let v1 = v1.clone();
        move |s: f64| v1.value(&[s]).powi(-2)
    };
    let u_left = quad(&inv_sq, 0.0, window.0)? + c2;
    let limit = u_left - tail_bound.unwrap_or(0.0);
    if limit < 0.0 {
        return Err(Error::Construction(format!(
            "u(-inf) >= 0 fails: quadrature gives {limit:.6e} at the left end"
        )));
    }

    let u_val = {
        let f = inv_sq.clone();
        move |t: f64| quad(&f, 0.0, t).map(|v| v + c2).unwrap_or(f64::NAN)
    };
    let u = {
        let (ua, f, v1) = (u_val.clone(), inv_sq.clone(), v1.clone());
        ScalarField::new(1, move |p| ua(p[0]))
            .with_grad(move |p| DVector::from_element(1, f(p[0])))
            .with_hess(move |p| {
                let t = p[0];
                DMatrix::from_element(1, 1, -2.0 * d1(&v1, t) / v1.value(&[t]).powi(3))
            })
    };
    let v2 = {
        let (a, b, c) = (v1.clone(), v1.clone(), v1.clone());
        let (ua, ub, uc) = (u_val.clone(), u_val.clone(), u_val);
        ScalarField::new(1, move |p| a.value(p) * ua(p[0]))
            .with_grad(move |p| {
                let t = p[0];
                DVector::from_element(1, d1(&b, t) * ub(t) + 1.0 / b.value(p))
            })
            .with_hess(move |p| DMatrix::from_element(1, 1, d2(&c, p[0]) * uc(p[0])))
    };
    Ok(SurfacePair {
        v1: v1.clone(),
        v2,
        u,
        c2,
        window,
        positivity: PositivityCheck {
            u_left,
            tail_bound,
            window_only: tail_bound.is_none(),
        },
    })
}

/// The Gaussian profile `v₁ = e^{t²/2}` with curvature `τ = −t² − 1`.
pub fn gaussian_profile() -> ScalarField {
    ScalarField::univariate(
        |t| (0.5 * t * t).exp(),
        |t| t * (0.5 * t * t).exp(),
        |t| (t * t + 1.0) * (0.5 * t * t).exp(),
    )
}

/// Closed form of `∫_{−∞}^{lo} e^{−s²} ds` for `lo ≤ 0`, used as a tail bound.
pub fn gaussian_tail(lo: f64) -> f64 {
    0.5 * PI.sqrt() * libm::erfc(-lo)
}

#[derive(Debug, Clone, PartialEq)]
pub enum IsometryVerdict {
    NotIsometric,
    Inconclusive(String),
}

#[derive(Debug, Clone)]
pub struct NonIsometryReport {
    pub verdict: IsometryVerdict,
    /// Sub-window on which `τ` is strictly monotone.
    pub monotone_window: Option<(f64, f64)>,
    /// `max |v₁′/v₁ − v₂′/v₂|` on the monotone sub-window.
    pub max_gap: f64,
    /// `min |v₁′/v₁ − v₂′/v₂|` on the monotone sub-window.
    pub min_gap: f64,
    pub wronskian_mean: f64,
    pub wronskian_spread: f64,
}

/// Curvature-preserving maps between the two surfaces must match the
/// logarithmic derivatives of the profiles wherever `τ` is strictly
/// monotone; a nonvanishing gap there rules out an isometry.
pub fn non_isometry_witness(pair: &SurfacePair) -> NonIsometryReport {
    let t = uniform_grid(pair.window.0, pair.window.1, CURVE_GRID);
    let tau: Vec<f64> = t.iter().map(|&s| pair.tau(s)).collect();
    let w: Vec<f64> = t.iter().map(|&s| pair.wronskian(s)).collect();
    let wronskian_mean = w.iter().sum::<f64>() / w.len() as f64;
    let wronskian_spread = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - w.iter().cloned().fold(f64::INFINITY, f64::min);

    // Longest run of strictly monotone τ.
    let scale = tau.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let step_sign = |i: usize| {
        let d = tau[i + 1] - tau[i];
        if d.abs() <= 1e-9 * scale {
            0.0
        } else {
            d.signum()
        }
    };
    let (mut best, mut start) = ((0usize, 0usize), 0usize);
    for i in 0..t.len() - 1 {
        let s = step_sign(i);
        if s == 0.0 || (i > start && step_sign(i - 1) != s) {
            start = if s == 0.0 { i + 1 } else { i };
        }
        if s != 0.0 && i + 1 - start > best.1 - best.0 {
            best = (start, i + 1);
        }
    }

    let mut report = NonIsometryReport {
        verdict: IsometryVerdict::Inconclusive(String::new()),
        monotone_window: None,
        max_gap: 0.0,
        min_gap: 0.0,
        wronskian_mean,
        wronskian_spread,
    };
    if best.1 - best.0 < 8 {
        report.verdict = IsometryVerdict::Inconclusive("curvature is not strictly monotone on any sub-window".into());
        return report;
    }
    report.monotone_window = Some((t[best.0], t[best.1]));
    let gaps: Vec<f64> = t[best.0..=best.1]
        .iter()
        .map(|&s| {
            (d1(&pair.v1, s) / pair.v1.value(&[s]) - d1(&pair.v2, s) / pair.v2.value(&[s])).abs()
        })
        .collect();
    report.max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    report.min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    report.verdict = if wronskian_mean.abs() < 1e-9 {
        IsometryVerdict::Inconclusive("profiles are dependent (zero Wronskian)".into())
    } else if wronskian_spread > 1e-7 * wronskian_mean.abs().max(1.0) {
        IsometryVerdict::Inconclusive("Wronskian is not constant".into())
    } else if report.min_gap > 1e-6 {
        IsometryVerdict::NotIsometric
    } else {
        IsometryVerdict::Inconclusive("logarithmic derivatives agree somewhere".into())
    };
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn erf_pair() -> SurfacePair {
        build_isocurved_pair(&gaussian_profile(), 1.0, (-2.0, 2.0), Some(gaussian_tail(-2.0))).unwrap()
    }

    #[test]
    fn erf_pair_matches_closed_form() {
        let pair = erf_pair();
        for t in uniform_grid(-2.0, 2.0, 33) {
            let u = 0.5 * PI.sqrt() * libm::erf(t) + 1.0;
            assert!((pair.u.value(&[t]) - u).abs() < 1e-12);
            assert!((pair.tau(t) + t * t + 1.0).abs() < 1e-12);
            assert!((pair.tau2(t) + t * t + 1.0).abs() < 1e-9);
            assert!((pair.wronskian(t) - 1.0).abs() < 1e-12);
        }
        assert!(!pair.positivity.window_only);
    }

    #[test]
    fn exponential_pair_has_constant_curvature() {
        let v1 = ScalarField::univariate(f64::exp, f64::exp, f64::exp);
        let pair = build_isocurved_pair(&v1, 3.0, (-0.5, 2.0), None).unwrap();
        assert!(pair.positivity.window_only);
        for t in [-0.4f64, 0.0, 1.7] {
            let closed = t.exp() * (3.0 + 0.5 - 0.5 * (-2.0 * t).exp());
            assert!((pair.v2.value(&[t]) - closed).abs() < 1e-12);
            assert!((pair.tau2(t) + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cosh_profile_fails_positivity() {
        let v1 = ScalarField::univariate(f64::cosh, f64::sinh, f64::cosh);
        let err = build_isocurved_pair(&v1, 0.0, (-2.0, 2.0), None).unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
        // The limit itself is −1; a tail bound makes the failure sharper.
        let tail = 1.0 - (2.0f64).tanh();
        assert!(build_isocurved_pair(&v1, 0.0, (-2.0, 2.0), Some(tail)).is_err());
    }

    #[test]
    fn ratio_witnesses() {
        let cosh = ScalarField::univariate(f64::cosh, f64::sinh, f64::cosh);
        let sinh = ScalarField::univariate(f64::sinh, f64::cosh, f64::sinh);
        let w = positive_excludes_allperiodic(&cosh, &sinh, (-2.0, 2.0)).unwrap();
        assert!(w.strictly_monotone && w.direction > 0.0 && w.min_slope > 0.0);

        let e = ScalarField::univariate(f64::exp, f64::exp, f64::exp);
        let em = ScalarField::univariate(|t| (-t).exp(), |t| -(-t).exp(), |t| (-t).exp());
        let w = positive_excludes_allperiodic(&e, &em, (-2.0, 2.0)).unwrap();
        assert!(w.strictly_monotone && w.direction < 0.0);

        let pair = erf_pair();
        let w = positive_excludes_allperiodic(&pair.v1, &pair.v2, (-2.0, 2.0)).unwrap();
        assert!(w.strictly_monotone && w.direction > 0.0);
        // W / v₁² = e^{−t²}, smallest at the window edge.
        assert!((w.min_slope - (-4.0f64).exp()).abs() < 1e-9);

        assert!(positive_excludes_allperiodic(&sinh, &cosh, (-2.0, 2.0)).is_err());
    }

    #[test]
    fn witness_verdicts() {
        let pair = erf_pair();
        let r = non_isometry_witness(&pair);
        assert_eq!(r.verdict, IsometryVerdict::NotIsometric);
        assert!(r.min_gap > 1e-3);

        let mut dependent = pair.clone();
        dependent.v2 = pair.v1.scale(2.0);
        assert!(matches!(non_isometry_witness(&dependent).verdict, IsometryVerdict::Inconclusive(_)));

        let v1 = ScalarField::univariate(f64::exp, f64::exp, f64::exp);
        let flat_tau = build_isocurved_pair(&v1, 3.0, (-0.5, 2.0), None).unwrap();
        assert!(matches!(non_isometry_witness(&flat_tau).verdict, IsometryVerdict::Inconclusive(_)));
    }
}
