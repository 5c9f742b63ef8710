//! Model space forms and the closed-form bases of `W(F; −τ g_F)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::parse;
use crate::geomkit::{hess_scalar, Chart, Interval, MetricChart, ScalarField};
use crate::hill::{solve_ivp, OdeProblem};

/// Default working window for one-dimensional fibers with variable `τ`.
pub const DEFAULT_WINDOW: (f64, f64) = (-2.0, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    Sphere,
    Euclidean,
    Hyperbolic,
}

impl FormKind {
    pub fn name(self) -> &'static str {
        match self {
            FormKind::Sphere => "sphere",
            FormKind::Euclidean => "euclidean",
            FormKind::Hyperbolic => "hyperbolic",
        }
    }
}

/// The characteristic function of a fiber: a constant, or a function of the
/// single coordinate when the fiber is a line.
#[derive(Clone)]
pub enum Tau {
    Const(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau::Const(c) => write!(f, "Const({c})"),
            Tau::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpaceFormSpec {
    pub kind: FormKind,
    pub k: usize,
    pub tau: Tau,
    /// Coordinate window for the line with variable `τ`.
    pub window: (f64, f64),
}

impl SpaceFormSpec {
    pub fn sphere(k: usize) -> Self {
        Self {
            kind: FormKind::Sphere,
            k,
            tau: Tau::Const(1.0),
            window: DEFAULT_WINDOW,
        }
    }

    pub fn euclidean(k: usize) -> Self {
        Self {
            kind: FormKind::Euclidean,
            k,
            tau: Tau::Const(0.0),
            window: DEFAULT_WINDOW,
        }
    }

    pub fn hyperbolic(k: usize, tau: f64) -> Self {
        Self {
            kind: FormKind::Hyperbolic,
            k,
            tau: Tau::Const(tau),
            window: DEFAULT_WINDOW,
        }
    }

    /// The real line with `Hess v = −τ(t) v dt²`.
    pub fn line_with_tau(tau: impl Fn(f64) -> f64 + Send + Sync + 'static, window: (f64, f64)) -> Self {
        Self {
            kind: FormKind::Euclidean,
            k: 1,
            tau: Tau::Function(Arc::new(tau)),
            window,
        }
    }

    pub fn tau_const(&self) -> Option<f64> {
        match self.tau {
            Tau::Const(c) => Some(c),
            Tau::Function(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > 3 {
            return Err(Error::Capability(format!(
                "{} models are available for dimensions 1 to 3, got {}",
                self.kind.name(),
                self.k
            )));
        }
        match (&self.tau, self.kind) {
            (Tau::Const(t), FormKind::Sphere) if *t != 1.0 => Err(Error::Domain(format!(
                "the sphere fiber is the unit sphere (tau = 1), got {t}"
            ))),
            (Tau::Const(t), FormKind::Euclidean) if *t != 0.0 => {
                Err(Error::Domain(format!("euclidean space has tau = 0, got {t}")))
            }
            (Tau::Const(t), FormKind::Hyperbolic) if !(*t < 0.0) => {
                Err(Error::Domain(format!("hyperbolic space needs tau < 0, got {t}")))
            }
            (Tau::Function(_), kind) if self.k != 1 || kind != FormKind::Euclidean => Err(Error::Capability(
                "a variable tau is only supported on the real line".into(),
            )),
            (Tau::Function(_), _) if !(self.window.0 < self.window.1) => {
                Err(Error::Domain(format!("invalid window {:?}", self.window)))
            }
            _ => Ok(()),
        }
    }
}

/// A space form on a single chart with its solution basis.
#[derive(Debug, Clone)]
pub struct SpaceFormModel {
    pub spec: SpaceFormSpec,
    pub metric: MetricChart,
    pub basis: Vec<ScalarField>,
    pub labels: Vec<String>,
    /// Distance kept from chart ends (and coordinate singularities) when sampling.
    pub sample_margin: f64,
}

fn angular_chart(lead: Interval, polar_axes: usize, with_azimuth: bool) -> Result<Chart> {
    let mut bounds = vec![lead];
    bounds.extend(std::iter::repeat_n(Interval::open(0.0, PI), polar_axes));
    if with_azimuth {
        bounds.push(Interval::closed(0.0, 2.0 * PI));
    }
    let n = bounds.len();
    let chart = Chart::new(bounds)?;
    if with_azimuth {
        chart.with_period(n - 1, 2.0 * PI)
    } else {
        Ok(chart)
    }
}

fn fields(srcs: &[String], vars: &[&str]) -> Result<Vec<ScalarField>> {
    srcs.iter()
        .map(|s| parse(s, vars)?.to_field(vars.len()))
        .collect()
}

/// Unit-sphere coordinate functions written in the angles after the lead one:
/// `(cos θ, sin θ cos φ, sin θ sin φ)` for one polar angle, `(cos φ, sin φ)`
/// for none.
fn sphere_directions(angles: &[&str]) -> Vec<String> {
    match angles {
        [] => vec!["1".into()],
        [phi] => vec![format!("cos({phi})"), format!("sin({phi})")],
        [theta, rest @ ..] => {
            let mut out = vec![format!("cos({theta})")];
            out.extend(sphere_directions(rest).into_iter().map(|d| format!("sin({theta})*{d}")));
            out
        }
    }
}

pub fn make_space_form(spec: SpaceFormSpec) -> Result<SpaceFormModel> {
    spec.validate()?;
    let k = spec.k;
    let (metric, basis, labels, margin) = match (spec.kind, &spec.tau) {
        (_, Tau::Function(tau)) => {
            let (lo, hi) = spec.window;
            let chart = Chart::new(vec![Interval::closed(lo, hi)])?;
            let tau = tau.clone();
            let p = OdeProblem::from_arc(Arc::new(move |t| -tau(t)), (lo, hi))?;
            let t0 = 0.5 * (lo + hi);
            let c = solve_ivp(&p, t0, 1.0, 0.0)?;
            let s = solve_ivp(&p, t0, 0.0, 1.0)?;
            (
                MetricChart::euclidean(chart),
                vec![c.to_field(), s.to_field()],
                vec!["c(t)".into(), "s(t)".into()],
                0.0,
            )
        }
        (FormKind::Euclidean, _) => {
            let chart = Chart::cube(k, -2.0, 2.0)?;
            let names: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
            let vars: Vec<&str> = names.iter().map(String::as_str).collect();
            let mut srcs = vec!["1".to_string()];
            srcs.extend(names.iter().cloned());
            (MetricChart::euclidean(chart), fields(&srcs, &vars)?, srcs, 0.0)
        }
        (FormKind::Sphere, _) => {
            let names = ["chi", "theta", "phi"];
            let vars = &names[3 - k..];
            let chart = if k == 1 {
                Chart::cube(1, 0.0, 2.0 * PI)?.with_period(0, 2.0 * PI)?
            } else {
                angular_chart(Interval::open(0.0, PI), k - 2, true)?
            };
            let metric = MetricChart::diagonal(format!("S^{k}"), chart, move |p| {
                let mut d = vec![1.0];
                let mut scale = 1.0;
                for x in p.iter().take(p.len() - 1) {
                    scale *= x.sin().powi(2);
                    d.push(scale);
                }
                d.truncate(p.len());
                d
            });
            let srcs = sphere_directions(vars);
            (metric, fields(&srcs, vars)?, srcs, 0.2)
        }
        (FormKind::Hyperbolic, Tau::Const(tau)) => {
            let a = (-tau).sqrt();
            if k == 1 {
                let chart = Chart::cube(1, -2.0, 2.0)?;
                let srcs = vec![format!("cosh({a:?}*t)"), format!("sinh({a:?}*t)")];
                (MetricChart::euclidean(chart), fields(&srcs, &["t"])?, srcs, 0.0)
            } else {
                let names = ["r", "theta", "phi"];
                let vars: Vec<&str> = std::iter::once("r").chain(names[3 - (k - 1)..].iter().copied()).collect();
                let chart = angular_chart(Interval::open(0.0, 2.0), k - 2, true)?;
                let metric = MetricChart::diagonal(format!("H^{k}({tau})"), chart, move |p| {
                    let s = (a * p[0]).sinh() / a;
                    let mut d = vec![1.0, s * s];
                    let mut scale = s * s;
                    for x in p.iter().skip(1).take(p.len() - 2) {
                        scale *= x.sin().powi(2);
                        d.push(scale);
                    }
                    d
                });
                let mut srcs = vec![format!("cosh({a:?}*r)")];
                srcs.extend(
                    sphere_directions(&vars[1..])
                        .into_iter()
                        .map(|d| format!("sinh({a:?}*r)*{d}")),
                );
                (metric, fields(&srcs, &vars)?, srcs, 0.2)
            }
        }
    };
    Ok(SpaceFormModel {
        spec,
        metric,
        basis,
        labels,
        sample_margin: margin,
    })
}

impl SpaceFormModel {
    pub fn k(&self) -> usize {
        self.spec.k
    }

    /// Names of the chart coordinates, in the order used by `basis` labels.
    pub fn variables(&self) -> Vec<String> {
        let k = self.k();
        let angles = ["chi", "theta", "phi"];
        let names: Vec<&str> = match (self.spec.kind, &self.spec.tau) {
            (_, Tau::Function(_)) => vec!["t"],
            (FormKind::Euclidean, _) => return (0..k).map(|i| format!("x{i}")).collect(),
            (FormKind::Sphere, _) => angles[3 - k..].to_vec(),
            (FormKind::Hyperbolic, _) if k == 1 => vec!["t"],
            (FormKind::Hyperbolic, _) => std::iter::once("r").chain(angles[3 - (k - 1)..].iter().copied()).collect(),
        };
        names.into_iter().map(String::from).collect()
    }

    pub fn tau_at(&self, p: &[f64]) -> f64 {
        match &self.spec.tau {
            Tau::Const(c) => *c,
            Tau::Function(f) => f(p[0]),
        }
    }

    /// Deterministic pseudo-random interior sample.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = self.sample_margin.max(1e-3);
        self.metric.chart().sample_interior(n, margin, &mut rng)
    }

    /// Tensor grid with `per_axis` points per axis inside the sampling margin.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let margin = self.sample_margin.max(1e-3);
        self.metric.chart().grid(&vec![per_axis; self.k()], margin)
    }

    /// `‖Hess v + τ v g‖_F` at `p`.
    pub fn residual(&self, v: &ScalarField, p: &[f64], h: f64) -> Result<f64> {
        let hess = hess_scalar(&self.metric, v, p, h)?;
        Ok((hess + self.metric.metric(p) * (self.tau_at(p) * v.value(p))).norm())
    }

    /// `μ̄(a, b) = τ a b + g(∇a, ∇b)`.
    pub fn mu_bar(&self, a: &ScalarField, b: &ScalarField, p: &[f64]) -> Result<f64> {
        let (da, db) = (a.gradient(p, 1e-5), b.gradient(p, 1e-5));
        let inner = (da.transpose() * self.metric.inverse(p)? * db)[(0, 0)];
        Ok(self.tau_at(p) * a.value(p) * b.value(p) + inner)
    }
}

fn spread(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `τ v² + |∇v|²`, required to be constant over `points`; returns the mean.
pub fn mu_of_solution(model: &SpaceFormModel, v: &ScalarField, points: &[Vec<f64>], tol: f64) -> Result<f64> {
    if model.spec.tau_const().is_none() {
        return Err(Error::Precondition("mu is only defined for constant tau".into()));
    }
    let values = points
        .iter()
        .map(|p| model.mu_bar(v, v, p))
        .collect::<Result<Vec<f64>>>()?;
    let s = spread(&values);
    if s > tol {
        return Err(Error::NotConstant {
            quantity: "mu".into(),
            spread: s,
            tol,
        });
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// The `μ̄` Gram matrix of a basis together with its numerical rank.
#[derive(Debug, Clone)]
pub struct GramMu {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Largest entrywise spread across the sample points.
    pub spread: f64,
}

/// Relative cutoff for singular values counted as zero.
pub const RANK_TOL: f64 = 1e-8;

pub fn numerical_rank(m: &DMatrix<f64>) -> (usize, Vec<f64>) {
    let sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let rank = if max == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > RANK_TOL * max).count()
    };
    (rank, sv)
}

pub fn gram_of(model: &SpaceFormModel, basis: &[ScalarField], tol: f64) -> Result<GramMu> {
    let n = basis.len();
    let points = model.sample(10, 7);
    let mut mats = Vec::with_capacity(points.len());
    for p in &points {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = model.mu_bar(&basis[i], &basis[j], p)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        mats.push(m);
    }
    let mut worst = 0.0f64;
    for m in &mats[1..] {
        worst = worst.max((m - &mats[0]).abs().max());
    }
    if worst > tol {
        return Err(Error::NotConstant {
            quantity: "mu Gram matrix".into(),
            spread: worst,
            tol,
        });
    }
    let matrix = mats.swap_remove(0);
    let (rank, singular_values) = numerical_rank(&matrix);
    Ok(GramMu {
        matrix,
        rank,
        singular_values,
        spread: worst,
    })
}

pub fn gram_mu(model: &SpaceFormModel) -> Result<GramMu> {
    if model.spec.tau_const().is_none() {
        return Err(Error::Precondition("mu Gram matrix needs constant tau".into()));
    }
    gram_of(model, &model.basis, 1e-7)
}

/// A `d`-dimensional constant-curvature model on a chart where every sample
/// point is regular: the unit-speed warped form `dr² + sn_κ(r)² g_{S^{d−1}}`
/// around `r = 1`.
pub fn model_metric(curvature: f64, d: usize) -> Result<MetricChart> {
    if d == 0 || d > 3 {
        return Err(Error::Capability(format!("model metrics for d in 1..=3, got {d}")));
    }
    let sn = move |r: f64| {
        if curvature > 0.0 {
            (curvature.sqrt() * r).sin() / curvature.sqrt()
        } else if curvature < 0.0 {
            ((-curvature).sqrt() * r).sinh() / (-curvature).sqrt()
        } else {
            r
        }
    };
    let mut bounds = vec![Interval::closed(0.5, 1.5)];
    bounds.extend(std::iter::repeat_n(Interval::closed(1.0, 2.0), d - 1));
    let chart = Chart::new(bounds)?;
    Ok(MetricChart::diagonal(format!("N^{d}({curvature})"), chart, move |p| {
        let s = sn(p[0]);
        let mut d = vec![1.0];
        let mut scale = s * s;
        for (i, x) in p.iter().enumerate().skip(1) {
            d.push(scale);
            if i + 1 < p.len() {
                scale *= x.sin().powi(2);
            }
        }
        d
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomkit::{curvature, DEFAULT_STEP};

    fn all_specs() -> Vec<SpaceFormSpec> {
        let mut out = Vec::new();
        for k in 1..=3 {
            out.push(SpaceFormSpec::sphere(k));
            out.push(SpaceFormSpec::euclidean(k));
            out.push(SpaceFormSpec::hyperbolic(k, -1.0));
            out.push(SpaceFormSpec::hyperbolic(k, -0.25));
        }
        out
    }

    #[test]
    fn bases_solve_the_equation() {
        for spec in all_specs() {
            let model = make_space_form(spec).unwrap();
            assert_eq!(model.basis.len(), model.k() + 1);
            for p in model.sample(50, 1) {
                for (v, label) in model.basis.iter().zip(&model.labels) {
                    let r = model.residual(v, &p, DEFAULT_STEP).unwrap();
                    assert!(r < 1e-7, "{} {label} at {p:?}: {r:e}", model.metric.name());
                    let r_fd = model.residual(&v.value_only(), &p, DEFAULT_STEP).unwrap();
                    assert!(r_fd < 1e-4, "{} {label} FD: {r_fd:e}", model.metric.name());
                }
            }
        }
    }

    #[test]
    fn sphere_basis_is_standard() {
        let m = make_space_form(SpaceFormSpec::sphere(2)).unwrap();
        assert_eq!(m.labels, ["cos(theta)", "sin(theta)*cos(phi)", "sin(theta)*sin(phi)"]);
        let p = [0.8, 2.0];
        assert!((m.basis[1].value(&p) - 0.8f64.sin() * 2.0f64.cos()).abs() < 1e-15);
        assert_eq!(m.variables(), ["theta", "phi"]);
        assert_eq!(make_space_form(SpaceFormSpec::hyperbolic(3, -1.0)).unwrap().variables(), ["r", "theta", "phi"]);
        assert_eq!(make_space_form(SpaceFormSpec::euclidean(2)).unwrap().variables(), ["x0", "x1"]);
    }

    #[test]
    fn mu_values() {
        let s = make_space_form(SpaceFormSpec::sphere(2)).unwrap();
        let e = make_space_form(SpaceFormSpec::euclidean(2)).unwrap();
        let h = make_space_form(SpaceFormSpec::hyperbolic(2, -1.0)).unwrap();
        let pts = |m: &SpaceFormModel| m.sample(20, 3);
        assert!((mu_of_solution(&s, &s.basis[0], &pts(&s), 1e-7).unwrap() - 1.0).abs() < 1e-9);
        assert!((mu_of_solution(&e, &e.basis[1], &pts(&e), 1e-7).unwrap() - 1.0).abs() < 1e-9);
        assert!((mu_of_solution(&h, &h.basis[0], &pts(&h), 1e-7).unwrap() + 1.0).abs() < 1e-9);
        let not_solution = ScalarField::coordinate(2, 0);
        assert!(matches!(
            mu_of_solution(&s, &not_solution, &pts(&s), 1e-7),
            Err(Error::NotConstant { .. })
        ));
    }

    #[test]
    fn gram_matrices() {
        let diag = |v: &[f64]| DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v));
        let s = gram_mu(&make_space_form(SpaceFormSpec::sphere(2)).unwrap()).unwrap();
        assert!((s.matrix - diag(&[1.0, 1.0, 1.0])).norm() < 1e-9 && s.rank == 3);
        let e = gram_mu(&make_space_form(SpaceFormSpec::euclidean(2)).unwrap()).unwrap();
        assert!((e.matrix - diag(&[0.0, 1.0, 1.0])).norm() < 1e-9 && e.rank == 2);
        let h = gram_mu(&make_space_form(SpaceFormSpec::hyperbolic(2, -1.0)).unwrap()).unwrap();
        assert!((h.matrix - diag(&[-1.0, 1.0, 1.0])).norm() < 1e-9 && h.rank == 3);
        let h3 = gram_mu(&make_space_form(SpaceFormSpec::hyperbolic(3, -0.25)).unwrap()).unwrap();
        assert!((h3.matrix - diag(&[-0.25, 0.25, 0.25, 0.25])).norm() < 1e-9);
    }

    #[test]
    fn equator_is_totally_geodesic() {
        let s = make_space_form(SpaceFormSpec::sphere(2)).unwrap();
        for phi in [0.3, 1.9, 4.0] {
            let p = [PI / 2.0, phi];
            assert!(s.basis[0].value(&p).abs() < 1e-15);
            let hess = hess_scalar(&s.metric, &s.basis[0], &p, DEFAULT_STEP).unwrap();
            assert!(hess.norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            make_space_form(SpaceFormSpec::sphere(4)),
            Err(Error::Capability(_))
        ));
        let mut bad = SpaceFormSpec::sphere(2);
        bad.tau = Tau::Const(2.0);
        assert!(make_space_form(bad).is_err());
        assert!(make_space_form(SpaceFormSpec::hyperbolic(2, 0.5)).is_err());
        let mut f = SpaceFormSpec::line_with_tau(|t| t, (-1.0, 1.0));
        f.k = 2;
        assert!(matches!(make_space_form(f), Err(Error::Capability(_))));
    }

    #[test]
    fn variable_tau_line() {
        let m = make_space_form(SpaceFormSpec::line_with_tau(|t| -t * t - 1.0, (-2.0, 2.0))).unwrap();
        for p in m.sample(20, 5) {
            for v in &m.basis {
                assert!(m.residual(v, &p, DEFAULT_STEP).unwrap() < 1e-7);
            }
        }
        // c(t) = e^{t²/2} since it solves c″ = (t² + 1)c with c(0) = 1, c′(0) = 0.
        assert!((m.basis[0].value(&[1.5]) - (1.125f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn model_metrics_have_constant_curvature() {
        for (kappa, d) in [(1.0, 2), (-1.0, 2), (0.0, 3), (-0.5, 3), (1.0, 3)] {
            let m = model_metric(kappa, d).unwrap();
            let r = curvature(&m, &m.chart().center(), DEFAULT_STEP).unwrap();
            assert!(r.constant_curvature_deviation(kappa) < 1e-5, "{kappa} {d}");
        }
    }
}
