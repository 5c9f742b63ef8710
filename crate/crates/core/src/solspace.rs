//! Solution spaces `W(M; q)`: membership residuals, the evaluation map,
//! zero sets, and the one-dimensional classification with boundary
//! conditions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geomkit::{hess_scalar, Chart, MatrixFn, MetricChart, ScalarField};
use crate::hill::{coexistence_from, monodromy, solve_ivp_with, monodromy_options, OdeProblem};
use crate::spaceforms::{numerical_rank, Tau};

/// The symmetric 2-tensor `q` of `Hess w = w q`.
#[derive(Clone)]
pub struct QuadraticFormField {
    metric: MetricChart,
    q: MatrixFn,
}

impl fmt::Debug for QuadraticFormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadraticFormField")
            .field("metric", &self.metric.name())
            .finish()
    }
}

impl QuadraticFormField {
    pub fn new(metric: MetricChart, q: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self {
            metric,
            q: Arc::new(q),
        }
    }

    /// `q = c g`.
    pub fn multiple_of_metric(metric: MetricChart, c: f64) -> Self {
        let g = metric.metric_fn();
        Self::new(metric, move |p| g(p) * c)
    }

    /// `q = −τ g` with a possibly variable `τ` read from the first coordinate.
    pub fn from_tau(metric: MetricChart, tau: &Tau) -> Self {
        let g = metric.metric_fn();
        match tau.clone() {
            Tau::Const(c) => Self::new(metric, move |p| g(p) * -c),
            Tau::Function(f) => Self::new(metric, move |p| g(p) * -f(p[0])),
        }
    }

    pub fn metric(&self) -> &MetricChart {
        &self.metric
    }

    pub fn eval(&self, p: &[f64]) -> DMatrix<f64> {
        (self.q)(p)
    }

    /// The operator `Q = g⁻¹ q`.
    pub fn operator(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.metric.inverse(p)? * self.eval(p))
    }

    pub fn trace(&self, p: &[f64]) -> Result<f64> {
        Ok(self.operator(p)?.trace())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryFlag {
    Dirichlet,
    Neumann,
}

/// A finite basis spanning (part of) `W(M; q)`.
#[derive(Debug, Clone)]
pub struct SolutionSpace {
    pub q: QuadraticFormField,
    pub basis: Vec<ScalarField>,
    pub labels: Vec<String>,
    pub boundary_flags: Vec<Option<BoundaryFlag>>,
}

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = crate::spaceforms::RANK_TOL;

impl SolutionSpace {
    pub fn new(q: QuadraticFormField, basis: Vec<ScalarField>, labels: Vec<String>) -> Self {
        let n = basis.len();
        Self {
            q,
            basis,
            labels,
            boundary_flags: vec![None; n],
        }
    }

    pub fn manifold(&self) -> &MetricChart {
        self.q.metric()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Frobenius norm of `Hess w − w q` at `p`.
    pub fn pointwise_residual(&self, w: &ScalarField, p: &[f64], h: f64) -> Result<f64> {
        let hess = hess_scalar(self.manifold(), w, p, h)?;
        Ok((hess - self.q.eval(p) * w.value(p)).norm())
    }

    /// Largest `‖Hess w − w q‖` over `grid`.
    pub fn residual(&self, w: &ScalarField, grid: &[Vec<f64>], h: f64) -> Result<f64> {
        grid.iter()
            .map(|p| self.pointwise_residual(w, p, h))
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
    }

    /// Columns `(w(p), ∇w|_p)` for each basis element.
    pub fn evaluation_matrix(&self, p: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let n = self.manifold().dim();
        let mut m = DMatrix::zeros(n + 1, self.basis.len());
        for (j, w) in self.basis.iter().enumerate() {
            m[(0, j)] = w.value(p);
            let grad = self.manifold().grad(w, p, h)?;
            m.view_mut((1, j), (n, 1)).copy_from(&grad);
        }
        Ok(m)
    }

    pub fn evaluation_rank(&self, p: &[f64]) -> Result<usize> {
        Ok(numerical_rank(&self.evaluation_matrix(p, 1e-5)?).0)
    }

    /// Checks every basis element against `tol` on `grid` and the evaluation
    /// map for injectivity at the first grid point.
    pub fn validate(&self, grid: &[Vec<f64>], h: f64, tol: f64) -> Result<()> {
        for (w, label) in self.basis.iter().zip(&self.labels) {
            let r = self.residual(w, grid, h)?;
            if r > tol {
                return Err(Error::Residual {
                    context: format!("basis element {label}"),
                    residual: r,
                    tol,
                });
            }
        }
        if let Some(p) = grid.first() {
            let rank = self.evaluation_rank(p)?;
            if rank < self.dim() {
                return Err(Error::Precondition(format!(
                    "basis is dependent: evaluation rank {rank} < {}",
                    self.dim()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ZeroSetReport {
    pub points: usize,
    pub max_abs_value: f64,
    pub min_grad_norm: f64,
    pub max_hess_norm: f64,
}

/// At zero-level points `∇w ≠ 0` and `Hess w = 0`, so the zero set is a
/// totally geodesic hypersurface.
pub fn zero_set_check(
    s: &SolutionSpace,
    w: &ScalarField,
    level_points: &[Vec<f64>],
    h: f64,
) -> Result<ZeroSetReport> {
    let mut report = ZeroSetReport {
        points: level_points.len(),
        max_abs_value: 0.0,
        min_grad_norm: f64::INFINITY,
        max_hess_norm: 0.0,
    };
    for p in level_points {
        let v = w.value(p);
        if v.abs() >= 1e-8 {
            return Err(Error::Precondition(format!("|w| = {v:e} at {p:?} is not on the zero set")));
        }
        let grad_norm = s.manifold().grad_norm_sq(w, p, h)?.max(0.0).sqrt();
        if grad_norm < 1e-10 {
            return Err(Error::DegenerateZeroSet {
                point: p.clone(),
                grad_norm,
            });
        }
        let hess = hess_scalar(s.manifold(), w, p, h)?.norm();
        report.max_abs_value = report.max_abs_value.max(v.abs());
        report.min_grad_norm = report.min_grad_norm.min(grad_norm);
        report.max_hess_norm = report.max_hess_norm.max(hess);
    }
    Ok(report)
}

/// Zero-level points of `w` found by bisection along every grid edge where
/// `w` changes sign.
pub fn level_points(chart: &Chart, w: &ScalarField, counts: &[usize], margin: f64) -> Vec<Vec<f64>> {
    let grid = chart.grid(counts, margin);
    let strides: Vec<usize> = (0..counts.len())
        .map(|a| counts[a + 1..].iter().product())
        .collect();
    let mut out = Vec::new();
    for (idx, p) in grid.iter().enumerate() {
        let wp = w.value(p);
        if wp == 0.0 {
            out.push(p.clone());
            continue;
        }
        for (axis, &stride) in strides.iter().enumerate() {
            let pos = (idx / stride) % counts[axis];
            if pos + 1 >= counts[axis] {
                continue;
            }
            let q = &grid[idx + stride];
            let wq = w.value(q);
            if wp * wq >= 0.0 {
                continue;
            }
            let (mut a, mut b) = (p.clone(), q.clone());
            let mut wa = wp;
            for _ in 0..200 {
                let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                let wm = w.value(&mid);
                if wm == 0.0 || (a[axis] - b[axis]).abs() < 1e-15 {
                    a = mid;
                    break;
                }
                if wa * wm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    wa = wm;
                }
            }
            out.push(a);
        }
    }
    out
}

/// One-dimensional domains of the classification tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain1D {
    Line,
    /// Circle of radius `a` (length `2πa`).
    Circle { radius: f64 },
    HalfLine,
    /// `[0, length]`.
    Interval { length: f64 },
}

impl Domain1D {
    pub fn name(&self) -> &'static str {
        match self {
            Domain1D::Line => "line",
            Domain1D::Circle { .. } => "circle",
            Domain1D::HalfLine => "half_line",
            Domain1D::Interval { .. } => "interval",
        }
    }

    pub fn has_boundary(&self) -> bool {
        matches!(self, Domain1D::HalfLine | Domain1D::Interval { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    None,
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone)]
pub struct OneDProblem {
    pub domain: Domain1D,
    pub tau: Tau,
    pub bc: BoundaryCondition,
}

impl OneDProblem {
    pub fn new(domain: Domain1D, tau: f64) -> Result<Self> {
        Self::with_tau(domain, Tau::Const(tau))
    }

    pub fn with_tau(domain: Domain1D, tau: Tau) -> Result<Self> {
        match domain {
            Domain1D::Circle { radius } if !(radius > 0.0) => {
                return Err(Error::Domain(format!("circle radius must be positive, got {radius}")))
            }
            Domain1D::Interval { length } if !(length > 0.0) => {
                return Err(Error::Domain(format!("interval length must be positive, got {length}")))
            }
            _ => {}
        }
        Ok(Self {
            domain,
            tau,
            bc: BoundaryCondition::None,
        })
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bc = bc;
        self
    }
}

/// A basis element described both as a field and by a label.
#[derive(Debug, Clone)]
pub struct LabeledField {
    pub label: String,
    pub field: ScalarField,
}

#[derive(Debug, Clone)]
pub struct OneDClassification {
    pub dim: usize,
    pub basis: Vec<LabeledField>,
    /// Present only for domains with boundary.
    pub dim_d: Option<usize>,
    pub dim_n: Option<usize>,
    pub d_basis: Vec<LabeledField>,
    pub n_basis: Vec<LabeledField>,
}

impl OneDClassification {
    /// Basis matching the problem's boundary condition.
    pub fn selected(&self, bc: BoundaryCondition) -> &[LabeledField] {
        match bc {
            BoundaryCondition::None => &self.basis,
            BoundaryCondition::Dirichlet => &self.d_basis,
            BoundaryCondition::Neumann => &self.n_basis,
        }
    }
}

/// Tolerance for `a√τ` being an integer.
const INTEGER_TOL: f64 = 1e-9;

fn lf(label: String, field: ScalarField) -> LabeledField {
    LabeledField { label, field }
}

/// `(c, s)` with `c(0) = 1, c′(0) = 0` and `s(0) = 0, s′(0) = 1` for `w″ = −τw`.
fn constant_pair(tau: f64) -> (LabeledField, LabeledField) {
    let r = tau.abs().sqrt();
    if tau > 0.0 {
        (
            lf(format!("cos({r}*t)"), ScalarField::univariate(move |t| (r * t).cos(), move |t| -r * (r * t).sin(), move |t| -r * r * (r * t).cos())),
            lf(format!("sin({r}*t)"), ScalarField::univariate(move |t| (r * t).sin(), move |t| r * (r * t).cos(), move |t| -r * r * (r * t).sin())),
        )
    } else if tau < 0.0 {
        (
            lf(format!("cosh({r}*t)"), ScalarField::univariate(move |t| (r * t).cosh(), move |t| r * (r * t).sinh(), move |t| r * r * (r * t).cosh())),
            lf(format!("sinh({r}*t)"), ScalarField::univariate(move |t| (r * t).sinh(), move |t| r * (r * t).cosh(), move |t| r * r * (r * t).sinh())),
        )
    } else {
        (
            lf("1".into(), ScalarField::univariate(|_| 1.0, |_| 0.0, |_| 0.0)),
            lf("t".into(), ScalarField::univariate(|t| t, |_| 1.0, |_| 0.0)),
        )
    }
}

fn closed_form(domain: Domain1D, tau: f64) -> OneDClassification {
    let (c, s) = constant_pair(tau);
    let both = vec![c.clone(), s.clone()];
    let resonant = |length: f64| {
        // a√τ with 2πa = length
        let x = length / (2.0 * PI) * tau.sqrt();
        tau > 0.0 && (x - x.round()).abs() < INTEGER_TOL && x.round() >= 1.0
    };
    match domain {
        Domain1D::Line => OneDClassification {
            dim: 2,
            basis: both,
            dim_d: None,
            dim_n: None,
            d_basis: vec![],
            n_basis: vec![],
        },
        Domain1D::Circle { radius } => {
            let basis = if tau == 0.0 {
                vec![c]
            } else if resonant(2.0 * PI * radius) {
                both
            } else {
                vec![]
            };
            OneDClassification {
                dim: basis.len(),
                basis,
                dim_d: None,
                dim_n: None,
                d_basis: vec![],
                n_basis: vec![],
            }
        }
        Domain1D::HalfLine => OneDClassification {
            dim: 2,
            basis: both,
            dim_d: Some(1),
            dim_n: Some(1),
            d_basis: vec![s],
            n_basis: vec![c],
        },
        Domain1D::Interval { length } => {
            let (d, n) = if tau == 0.0 {
                (vec![], vec![c])
            } else if resonant(length) {
                (vec![s], vec![c])
            } else {
                (vec![], vec![])
            };
            let mut basis = d.clone();
            basis.extend(n.iter().cloned());
            OneDClassification {
                dim: basis.len(),
                basis,
                dim_d: Some(d.len()),
                dim_n: Some(n.len()),
                d_basis: d,
                n_basis: n,
            }
        }
    }
}

fn numeric(domain: Domain1D, tau: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<OneDClassification> {
    let span_len = match domain {
        Domain1D::Circle { radius } => 2.0 * PI * radius,
        Domain1D::Interval { length } => length,
        Domain1D::Line | Domain1D::HalfLine => 4.0,
    };
    let span = match domain {
        Domain1D::Line => (-2.0, 2.0),
        _ => (0.0, span_len),
    };
    let theta = {
        let tau = tau.clone();
        move |t: f64| -tau(t)
    };
    let problem = OdeProblem::new(theta, span)?;
    let opts = monodromy_options();
    let c = solve_ivp_with(&problem, 0.0f64.clamp(span.0, span.1), 1.0, 0.0, opts)?;
    let s = solve_ivp_with(&problem, 0.0f64.clamp(span.0, span.1), 0.0, 1.0, opts)?;
    let cf = lf("c(t)".into(), c.to_field());
    let sf = lf("s(t)".into(), s.to_field());
    let tol = crate::hill::PERIODIC_TOL;
    Ok(match domain {
        Domain1D::Line => OneDClassification {
            dim: 2,
            basis: vec![cf, sf],
            dim_d: None,
            dim_n: None,
            d_basis: vec![],
            n_basis: vec![],
        },
        Domain1D::HalfLine => OneDClassification {
            dim: 2,
            basis: vec![cf.clone(), sf.clone()],
            dim_d: Some(1),
            dim_n: Some(1),
            d_basis: vec![sf],
            n_basis: vec![cf],
        },
        Domain1D::Circle { .. } => {
            let periodic = OdeProblem::new(move |t| -tau(t), (0.0, 1.0))?.with_period(span_len)?;
            let m = monodromy(&periodic)?;
            let co = coexistence_from(m);
            // Initial data of periodic solutions span ker(M − I).
            let mi = m - nalgebra::Matrix2::identity();
            let svd = mi.svd(false, true);
            let v_t = svd.v_t.expect("requested");
            let mut basis = Vec::new();
            for (i, sv) in svd.singular_values.iter().enumerate() {
                if *sv < tol {
                    let (a, b) = (v_t[(i, 0)], v_t[(i, 1)]);
                    let field = ScalarField::linear_combination(&[(a, &cf.field), (b, &sf.field)])?;
                    basis.push(lf(format!("{a:.6}*c(t) + {b:.6}*s(t)"), field));
                }
            }
            debug_assert_eq!(basis.len(), co.dim_periodic);
            OneDClassification {
                dim: basis.len(),
                basis,
                dim_d: None,
                dim_n: None,
                d_basis: vec![],
                n_basis: vec![],
            }
        }
        Domain1D::Interval { length } => {
            let d = if s.value(length).abs() < tol { vec![sf] } else { vec![] };
            let n = if c.derivative(length).abs() < tol { vec![cf] } else { vec![] };
            let mut basis = d.clone();
            basis.extend(n.iter().cloned());
            OneDClassification {
                dim: basis.len(),
                basis,
                dim_d: Some(d.len()),
                dim_n: Some(n.len()),
                d_basis: d,
                n_basis: n,
            }
        }
    })
}

/// Dimension and bases of `W(M; −τ dt²)` on a one-dimensional domain.
///
/// For domains with boundary `dim` counts `W_D ⊕ W_N`; on the interval a
/// nonzero element must satisfy the boundary condition at both ends.
pub fn classify_1d(p: &OneDProblem) -> Result<OneDClassification> {
    match &p.tau {
        Tau::Const(tau) => Ok(closed_form(p.domain, *tau)),
        Tau::Function(f) => numeric(p.domain, f.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomkit::{Interval, DEFAULT_STEP};
    use crate::spaceforms::{make_space_form, SpaceFormSpec};

    fn dims(domain: Domain1D, tau: f64) -> (usize, Option<usize>, Option<usize>) {
        let c = classify_1d(&OneDProblem::new(domain, tau).unwrap()).unwrap();
        (c.dim, c.dim_d, c.dim_n)
    }

    #[test]
    fn one_dimensional_tables() {
        for tau in [1.0, 0.0, -1.0] {
            assert_eq!(dims(Domain1D::Line, tau), (2, None, None));
            assert_eq!(dims(Domain1D::HalfLine, tau), (2, Some(1), Some(1)));
        }
        let circle = |a| Domain1D::Circle { radius: a };
        assert_eq!(dims(circle(1.0), 1.0).0, 2);
        assert_eq!(dims(circle(2.0), 1.0).0, 2);
        assert_eq!(dims(circle(1.5), 1.0).0, 0);
        assert_eq!(dims(circle(0.5), 4.0).0, 2);
        assert_eq!(dims(circle(1.0), 0.0).0, 1);
        assert_eq!(dims(circle(1.0), -1.0).0, 0);
        let interval = |a: f64| Domain1D::Interval { length: 2.0 * PI * a };
        assert_eq!(dims(interval(2.0), 1.0), (2, Some(1), Some(1)));
        assert_eq!(dims(interval(1.0), 0.0), (1, Some(0), Some(1)));
        assert_eq!(dims(interval(1.5), 1.0), (0, Some(0), Some(0)));
        assert_eq!(dims(interval(1.0), -1.0), (0, Some(0), Some(0)));
    }

    #[test]
    fn half_line_bases_satisfy_their_conditions() {
        let c = classify_1d(&OneDProblem::new(Domain1D::HalfLine, -1.0).unwrap()).unwrap();
        assert_eq!(c.d_basis[0].label, "sinh(1*t)");
        assert_eq!(c.n_basis[0].label, "cosh(1*t)");
        assert_eq!(c.d_basis[0].field.value(&[0.0]), 0.0);
        assert_eq!(c.n_basis[0].field.gradient(&[0.0], 0.0)[0], 0.0);
        // D and N meet only in zero: the combined evaluation matrix at the
        // boundary is invertible.
        let (d, n) = (&c.d_basis[0].field, &c.n_basis[0].field);
        let m = DMatrix::from_row_slice(2, 2, &[d.value(&[0.0]), n.value(&[0.0]), d.gradient(&[0.0], 0.0)[0], n.gradient(&[0.0], 0.0)[0]]);
        assert!(m.determinant().abs() > 0.5);
    }

    #[test]
    fn variable_tau_circle_uses_monodromy() {
        // τ ≡ 1 written as a function: same answer as the closed form.
        let tau = Tau::Function(Arc::new(|_| 1.0));
        let c = classify_1d(&OneDProblem::with_tau(Domain1D::Circle { radius: 1.0 }, tau.clone()).unwrap()).unwrap();
        assert_eq!(c.dim, 2);
        let c = classify_1d(&OneDProblem::with_tau(Domain1D::Circle { radius: 1.5 }, tau).unwrap()).unwrap();
        assert_eq!(c.dim, 0);
        let flat = Tau::Function(Arc::new(|_| 0.0));
        let c = classify_1d(&OneDProblem::with_tau(Domain1D::Circle { radius: 1.0 }, flat).unwrap()).unwrap();
        assert_eq!(c.dim, 1);
        let c0 = c.basis[0].field.value(&[0.3]);
        assert!((c.basis[0].field.value(&[2.0]) - c0).abs() < 1e-9);
        let iv = Tau::Function(Arc::new(|_| 4.0));
        let c = classify_1d(&OneDProblem::with_tau(Domain1D::Interval { length: PI }, iv).unwrap()).unwrap();
        assert_eq!((c.dim, c.dim_d, c.dim_n), (2, Some(1), Some(1)));
    }

    #[test]
    fn circle_is_translation_invariant() {
        // The span of {cos, sin} equals that of its translate t ↦ t + c.
        let c = classify_1d(&OneDProblem::new(Domain1D::Circle { radius: 1.0 }, 1.0).unwrap()).unwrap();
        let shift = 0.7;
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.15).collect();
        let a = DMatrix::from_fn(ts.len(), 2, |i, j| c.basis[j].field.value(&[ts[i]]));
        for b in &c.basis {
            let y = nalgebra::DVector::from_iterator(ts.len(), ts.iter().map(|t| b.field.value(&[t + shift])));
            let coef = a.clone().svd(true, true).solve(&y, 1e-14).unwrap();
            assert!((&a * coef - y).norm() < 1e-9);
        }
    }

    fn sphere_space() -> SolutionSpace {
        let m = make_space_form(SpaceFormSpec::sphere(2)).unwrap();
        let q = QuadraticFormField::multiple_of_metric(m.metric.clone(), -1.0);
        SolutionSpace::new(q, m.basis, m.labels)
    }

    #[test]
    fn residuals() {
        let chart = Chart::new(vec![Interval::closed(-2.0, 2.0)]).unwrap();
        let line = MetricChart::euclidean(chart.clone());
        let q = QuadraticFormField::multiple_of_metric(line, 1.0);
        let s = SolutionSpace::new(q, vec![], vec![]);
        let grid = chart.grid(&[21], 0.1);
        let cosh = ScalarField::univariate(f64::cosh, f64::sinh, f64::cosh);
        assert!(s.residual(&cosh, &grid, DEFAULT_STEP).unwrap() < 1e-9);
        let t = ScalarField::coordinate(1, 0);
        assert!((s.residual(&t, &grid, DEFAULT_STEP).unwrap() - 1.9).abs() < 1e-9);

        let sphere = sphere_space();
        let grid = sphere.manifold().chart().grid(&[8, 8], 0.2);
        assert!(sphere.residual(&sphere.basis[0].value_only(), &grid, DEFAULT_STEP).unwrap() < 1e-6);
        sphere.validate(&grid, DEFAULT_STEP, 1e-7).unwrap();
    }

    #[test]
    fn evaluation_ranks() {
        let sphere = sphere_space();
        assert_eq!(sphere.evaluation_rank(&[PI / 4.0, 0.0]).unwrap(), 3);
        let w = sphere.basis[1].clone();
        let dependent = SolutionSpace::new(sphere.q.clone(), vec![w.clone(), w.scale(2.0)], vec!["w".into(), "2w".into()]);
        assert_eq!(dependent.evaluation_rank(&[PI / 4.0, 0.0]).unwrap(), 1);
        let e = make_space_form(SpaceFormSpec::euclidean(2)).unwrap();
        let es = SolutionSpace::new(QuadraticFormField::multiple_of_metric(e.metric.clone(), 0.0), e.basis, e.labels);
        assert_eq!(es.evaluation_rank(&[0.0, 0.0]).unwrap(), 3);
    }

    #[test]
    fn zero_sets_are_totally_geodesic() {
        let chart = Chart::new(vec![Interval::closed(-2.0, 2.0)]).unwrap();
        let line = MetricChart::euclidean(chart.clone());
        let s = SolutionSpace::new(QuadraticFormField::multiple_of_metric(line, -1.0), vec![], vec![]);
        let sin = ScalarField::univariate(f64::sin, f64::cos, |t| -t.sin());
        let r = zero_set_check(&s, &sin, &[vec![0.0]], DEFAULT_STEP).unwrap();
        assert!(r.max_hess_norm == 0.0 && (r.min_grad_norm - 1.0).abs() < 1e-12);

        let sphere = sphere_space();
        let w = &sphere.basis[0];
        let pts = level_points(sphere.manifold().chart(), w, &[9, 6], 0.2);
        assert!(!pts.is_empty());
        let r = zero_set_check(&sphere, w, &pts, DEFAULT_STEP).unwrap();
        assert!(r.max_hess_norm < 1e-7);

        let zero = ScalarField::constant(1, 0.0);
        assert!(matches!(
            zero_set_check(&s, &zero, &[vec![0.5]], DEFAULT_STEP),
            Err(Error::DegenerateZeroSet { .. })
        ));
    }

    #[test]
    fn integer_resonance_gives_identity_monodromy() {
        for (a, tau) in [(1.0, 1.0), (2.0, 1.0), (0.5, 4.0)] {
            let p = OdeProblem::constant_tau(tau, (0.0, 1.0)).unwrap().with_period(2.0 * PI * a).unwrap();
            let m = monodromy(&p).unwrap();
            assert!((m - nalgebra::Matrix2::identity()).abs().max() < 1e-8);
        }
    }
}
