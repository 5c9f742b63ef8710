use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geomkit::ScalarField;

pub type Theta = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The linear equation `w″ = Θ(t) w` on a time span.
#[derive(Clone)]
pub struct OdeProblem {
    theta: Theta,
    t_span: (f64, f64),
    period: Option<f64>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("t_span", &self.t_span)
            .field("period", &self.period)
            .finish()
    }
}

impl OdeProblem {
    pub fn new(theta: impl Fn(f64) -> f64 + Send + Sync + 'static, t_span: (f64, f64)) -> Result<Self> {
        Self::from_arc(Arc::new(theta), t_span)
    }

    pub fn from_arc(theta: Theta, t_span: (f64, f64)) -> Result<Self> {
        if !(t_span.0 < t_span.1) || !t_span.0.is_finite() || !t_span.1.is_finite() {
            return Err(Error::Domain(format!("invalid time span {t_span:?}")));
        }
        Ok(Self {
            theta,
            t_span,
            period: None,
        })
    }

    /// `w″ = −τ w` with constant `τ`.
    pub fn constant_tau(tau: f64, t_span: (f64, f64)) -> Result<Self> {
        Self::new(move |_| -tau, t_span)
    }

    /// `w″ = −τ(t) w`.
    pub fn from_tau(tau: impl Fn(f64) -> f64 + Send + Sync + 'static, t_span: (f64, f64)) -> Result<Self> {
        Self::new(move |t| -tau(t), t_span)
    }

    /// Declares `Θ` to be `period`-periodic; the span becomes `[0, period]`.
    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Domain(format!("period must be positive, got {period}")));
        }
        self.period = Some(period);
        self.t_span = (0.0, period);
        Ok(self)
    }

    pub fn theta(&self, t: f64) -> f64 {
        (self.theta)(t)
    }

    pub fn theta_fn(&self) -> Theta {
        self.theta.clone()
    }

    pub fn t_span(&self) -> (f64, f64) {
        self.t_span
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }
}

/// Step-size control for the embedded 5(4) Runge–Kutta pair.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 200_000,
        }
    }
}

/// Accepted steps of an integration with quintic Hermite dense output.
#[derive(Clone)]
pub struct OdeSolution {
    t: Vec<f64>,
    w: Vec<f64>,
    dw: Vec<f64>,
    ddw: Vec<f64>,
    theta: Theta,
}

impl fmt::Debug for OdeSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeSolution")
            .field("steps", &self.t.len())
            .field("span", &self.span())
            .finish()
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    theta: &'a Theta,
    opts: OdeOptions,
}

impl Stepper<'_> {
    fn rhs(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        [y[1], (self.theta)(t) * y[0]]
    }

    /// Integrates from `t0` to `t1` (either direction), returning the
    /// accepted `(t, w, w′)` samples including both ends.
    fn run(&self, t0: f64, t1: f64, y0: [f64; 2]) -> Result<Vec<(f64, [f64; 2])>> {
        let dir = (t1 - t0).signum();
        let span = (t1 - t0).abs();
        let mut out = vec![(t0, y0)];
        if span == 0.0 {
            return Ok(out);
        }
        let (mut t, mut y) = (t0, y0);
        let mut h = (span * 1e-3).min(1e-2);
        let mut k1 = self.rhs(t, y);
        for _ in 0..self.opts.max_steps {
            if (t1 - t) * dir <= 0.0 {
                return Ok(out);
            }
            let last = (t + dir * h - t1) * dir >= 0.0;
            let step = if last { t1 - t } else { dir * h };
            let mut k = [[0.0; 2]; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    ys[0] += step * A[s][j] * kj[0];
                    ys[1] += step * A[s][j] * kj[1];
                }
                k[s] = self.rhs(t + C[s] * step, ys);
            }
            let mut ynew = y;
            let mut err = [0.0; 2];
            for s in 0..7 {
                for c in 0..2 {
                    ynew[c] += step * B[s] * k[s][c];
                    err[c] += step * E[s] * k[s][c];
                }
            }
            let norm = ((0..2)
                .map(|c| {
                    let sc = self.opts.atol + self.opts.rtol * y[c].abs().max(ynew[c].abs());
                    (err[c] / sc).powi(2)
                })
                .sum::<f64>()
                / 2.0)
                .sqrt();
            if !norm.is_finite() || !ynew.iter().all(|v| v.is_finite()) {
                return Err(Error::Integration {
                    t,
                    reason: "non-finite state".into(),
                });
            }
            if norm <= 1.0 {
                t = if last { t1 } else { t + step };
                y = ynew;
                k1 = k[6];
                out.push((t, y));
            }
            let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            h = step.abs() * factor;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow ({h:e})"),
                });
            }
        }
        Err(Error::Integration {
            t,
            reason: format!("exceeded {} steps", self.opts.max_steps),
        })
    }
}

/// Solves `w″ = Θw` with `w(t0) = w0`, `w′(t0) = dw0` over the whole span of
/// `p`, integrating outward from `t0` in both directions.
pub fn solve_ivp(p: &OdeProblem, t0: f64, w0: f64, dw0: f64) -> Result<OdeSolution> {
    solve_ivp_with(p, t0, w0, dw0, OdeOptions::default())
}

pub fn solve_ivp_with(p: &OdeProblem, t0: f64, w0: f64, dw0: f64, opts: OdeOptions) -> Result<OdeSolution> {
    let (lo, hi) = p.t_span;
    if !(lo <= t0 && t0 <= hi) {
        return Err(Error::Domain(format!("initial time {t0} outside span [{lo}, {hi}]")));
    }
    if !w0.is_finite() || !dw0.is_finite() {
        return Err(Error::Domain("non-finite initial data".into()));
    }
    let stepper = Stepper { theta: &p.theta, opts };
    let back = stepper.run(t0, lo, [w0, dw0])?;
    let fwd = stepper.run(t0, hi, [w0, dw0])?;
    let mut samples: Vec<(f64, [f64; 2])> = back.into_iter().rev().collect();
    samples.extend(fwd.into_iter().skip(1));
    let t: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let w: Vec<f64> = samples.iter().map(|s| s.1[0]).collect();
    let dw: Vec<f64> = samples.iter().map(|s| s.1[1]).collect();
    let ddw = t.iter().zip(&w).map(|(&ti, &wi)| p.theta(ti) * wi).collect();
    Ok(OdeSolution {
        t,
        w,
        dw,
        ddw,
        theta: p.theta.clone(),
    })
}

impl OdeSolution {
    pub fn span(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn node_values(&self) -> (&[f64], &[f64]) {
        (&self.w, &self.dw)
    }

    fn locate(&self, t: f64) -> Option<usize> {
        let (lo, hi) = self.span();
        if !(lo <= t && t <= hi) {
            return None;
        }
        let idx = self.t.partition_point(|&x| x <= t);
        Some(idx.clamp(1, self.t.len() - 1) - 1)
    }

    /// `(w, w′, w″)` from the quintic Hermite interpolant; NaN outside the span.
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64) {
        let Some(i) = self.locate(t) else {
            return (f64::NAN, f64::NAN, f64::NAN);
        };
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (y0, d0, a0) = (self.w[i], self.dw[i], self.ddw[i]);
        let (y1, d1, a1) = (self.w[i + 1], self.dw[i + 1], self.ddw[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let s5 = s4 * s;
        let basis = [
            1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
            (s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5) * h,
            (0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5) * h * h,
            10.0 * s3 - 15.0 * s4 + 6.0 * s5,
            (-4.0 * s3 + 7.0 * s4 - 3.0 * s5) * h,
            (0.5 * s3 - s4 + 0.5 * s5) * h * h,
        ];
        let d_basis = [
            (-30.0 * s2 + 60.0 * s3 - 30.0 * s4) / h,
            1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
            (s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4) * h,
            (30.0 * s2 - 60.0 * s3 + 30.0 * s4) / h,
            -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
            (1.5 * s2 - 4.0 * s3 + 2.5 * s4) * h,
        ];
        let dd_basis = [
            (-60.0 * s + 180.0 * s2 - 120.0 * s3) / (h * h),
            (-36.0 * s + 96.0 * s2 - 60.0 * s3) / h,
            1.0 - 9.0 * s + 18.0 * s2 - 10.0 * s3,
            (60.0 * s - 180.0 * s2 + 120.0 * s3) / (h * h),
            (-24.0 * s + 84.0 * s2 - 60.0 * s3) / h,
            3.0 * s - 12.0 * s2 + 10.0 * s3,
        ];
        let data = [y0, d0, a0, y1, d1, a1];
        let dot = |b: &[f64; 6]| b.iter().zip(&data).map(|(x, y)| x * y).sum::<f64>();
        (dot(&basis), dot(&d_basis), dot(&dd_basis))
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval_all(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval_all(t).1
    }

    /// `Θ(t) w(t)`, the second derivative implied by the equation.
    pub fn second_derivative(&self, t: f64) -> f64 {
        (self.theta)(t) * self.value(t)
    }

    /// Largest `|w″ − Θw|` at step midpoints, with `w″` taken from the
    /// interpolant itself.
    pub fn collocation_residual(&self) -> f64 {
        self.t
            .windows(2)
            .map(|pair| {
                let tm = 0.5 * (pair[0] + pair[1]);
                let (w, _, ddw) = self.eval_all(tm);
                (ddw - (self.theta)(tm) * w).abs() / w.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// One-variable field backed by the interpolant, with `w″ = Θw`.
    pub fn to_field(&self) -> ScalarField {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        ScalarField::new(1, move |p| a.value(p[0]))
            .with_grad(move |p| DVector::from_element(1, b.derivative(p[0])))
            .with_hess(move |p| DMatrix::from_element(1, 1, c.second_derivative(p[0])))
    }
}
