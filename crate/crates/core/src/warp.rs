//! Warped products `B ×ᵤ F`, their quadratic form, the splitting
//! `w = z + u·v` and the `μ̄` forms.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geomkit::{
    christoffel, curvature, hess_scalar, laplacian, Chart, MetricChart, ScalarField, DEFAULT_STEP,
};
use crate::solspace::QuadraticFormField;
use crate::spaceforms::{SpaceFormModel, Tau};

/// Points with `u` below this are left out of product grids.
pub const DEFAULT_COLLAR: f64 = 0.1;
/// Distance kept from non-periodic base chart ends.
pub const BASE_MARGIN: f64 = 0.05;

/// A face `x_axis = lo` or `x_axis = hi` of the base chart on which `u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub axis: usize,
    pub upper: bool,
}

#[derive(Debug, Clone)]
pub struct BaseSpace {
    pub metric: MetricChart,
    pub u: ScalarField,
    pub boundary: Vec<BoundaryFace>,
    pub u_min: f64,
}

impl BaseSpace {
    pub fn new(metric: MetricChart, u: ScalarField) -> Result<Self> {
        if u.dim() != metric.dim() {
            return Err(Error::Dimension {
                expected: metric.dim(),
                got: u.dim(),
            });
        }
        Ok(Self {
            metric,
            u,
            boundary: Vec::new(),
            u_min: DEFAULT_COLLAR,
        })
    }

    /// A flat interval `[lo, hi]` with warping function `u`.
    pub fn interval(lo: f64, hi: f64, u: ScalarField) -> Result<Self> {
        Self::new(MetricChart::euclidean(Chart::cube(1, lo, hi)?), u)
    }

    pub fn with_boundary(mut self, face: BoundaryFace) -> Result<Self> {
        if face.axis >= self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: face.axis,
            });
        }
        self.boundary.push(face);
        Ok(self)
    }

    pub fn with_collar(mut self, u_min: f64) -> Self {
        self.u_min = u_min;
        self
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn chart(&self) -> &Chart {
        self.metric.chart()
    }

    /// `q_B = (1/u) Hess_B u`.
    pub fn q_b(&self) -> QuadraticFormField {
        let (m, u) = (self.metric.clone(), self.u.clone());
        QuadraticFormField::new(self.metric.clone(), move |b| {
            hess_scalar(&m, &u, b, DEFAULT_STEP).expect("base point inside chart") / u.value(b)
        })
    }

    pub fn grad_u_sq(&self, b: &[f64]) -> Result<f64> {
        self.metric.grad_norm_sq(&self.u, b, DEFAULT_STEP)
    }

    pub fn laplacian_u(&self, b: &[f64]) -> Result<f64> {
        laplacian(&self.metric, &self.u, b, DEFAULT_STEP)
    }

    /// `κ_B = −u″/u`, the constant of the one-dimensional base viewed through
    /// its own solution space.
    pub fn kappa_b(&self, b: &[f64]) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Capability("kappa_B is implemented for one-dimensional bases".into()));
        }
        let u2 = hess_scalar(&self.metric, &self.u, b, DEFAULT_STEP)?[(0, 0)] / self.metric.metric(b)[(0, 0)];
        Ok(-u2 / self.u.value(b))
    }

    /// Tensor grid with the collar `u < u_min` removed.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        self.chart()
            .grid(&vec![per_axis; self.dim()], BASE_MARGIN)
            .into_iter()
            .filter(|b| self.u.value(b) >= self.u_min)
            .collect()
    }

    /// Largest `| |∇u| − 1 |` over the declared boundary faces, from
    /// one-sided differences along the normal.
    pub fn boundary_gradient_deviation(&self, per_axis: usize) -> Result<f64> {
        let h = 1e-4;
        let mut worst = 0.0f64;
        for face in &self.boundary {
            let iv = self.chart().bounds()[face.axis];
            let (edge, sign) = if face.upper { (iv.hi, -1.0) } else { (iv.lo, 1.0) };
            let mut counts = vec![per_axis; self.dim()];
            counts[face.axis] = 1;
            for mut b in self.chart().grid(&counts, BASE_MARGIN) {
                b[face.axis] = edge;
                let u0 = self.u.value(&b);
                if u0.abs() > 1e-8 {
                    return Err(Error::Precondition(format!("u = {u0:e} on declared boundary at {b:?}")));
                }
                let at = |s: f64| {
                    let mut q = b.clone();
                    q[face.axis] += sign * s;
                    self.u.value(&q)
                };
                let normal = sign * (-3.0 * u0 + 4.0 * at(h) - at(2.0 * h)) / (2.0 * h);
                let mut grad = self.u.gradient(&b, DEFAULT_STEP);
                grad[face.axis] = normal;
                let g = self.metric.metric(&b);
                let inv = g
                    .try_inverse()
                    .ok_or_else(|| Error::Degenerate { point: b.clone(), cond: f64::INFINITY })?;
                let norm = (grad.transpose() * inv * &grad)[(0, 0)].sqrt();
                worst = worst.max((norm - 1.0).abs());
            }
        }
        Ok(worst)
    }
}

/// `M = B ×ᵤ F` with metric `g_B + u² g_F` on the product chart; base
/// coordinates come first.
#[derive(Clone)]
pub struct WarpedProductSpec {
    pub base: BaseSpace,
    pub fiber: SpaceFormModel,
    pub total_metric: MetricChart,
    pub kappa: ScalarField,
}

impl fmt::Debug for WarpedProductSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpedProductSpec")
            .field("metric", &self.total_metric.name())
            .field("n", &self.n())
            .field("k", &self.k())
            .finish()
    }
}

fn tau_of(fiber: &SpaceFormModel, y: &[f64]) -> f64 {
    match &fiber.spec.tau {
        Tau::Const(c) => *c,
        Tau::Function(f) => f(y[0]),
    }
}

/// `ρ` from `ρu² + uΔ_B u + (k−1)|∇u|² = (k−1)τ`.
fn rho_closed(base: &BaseSpace, k: usize, tau: f64, b: &[f64]) -> Result<f64> {
    let u = base.u.value(b);
    let km1 = k as f64 - 1.0;
    Ok((km1 * tau - u * base.laplacian_u(b)? - km1 * base.grad_u_sq(b)?) / (u * u))
}

/// Block form `((1/u) Hess_B u, (|∇u|² − τ) g_F)`.
fn q_blocks(base: &BaseSpace, fiber: &SpaceFormModel, p: &[f64]) -> Result<DMatrix<f64>> {
    let n = base.dim();
    let k = fiber.k();
    let (b, y) = p.split_at(n);
    let u = base.u.value(b);
    let mut q = DMatrix::zeros(n + k, n + k);
    q.view_mut((0, 0), (n, n))
        .copy_from(&(hess_scalar(&base.metric, &base.u, b, DEFAULT_STEP)? / u));
    let c = base.grad_u_sq(b)? - tau_of(fiber, y);
    q.view_mut((n, n), (k, k)).copy_from(&(fiber.metric.metric(y) * c));
    Ok(q)
}

/// `g_B + u² g_F` on the product chart, base coordinates first.
pub fn warped_metric(base: &MetricChart, u: &ScalarField, fiber: &MetricChart) -> MetricChart {
    let (n, k) = (base.dim(), fiber.dim());
    let chart = base.chart().product(fiber.chart());
    let (gb, gf, u) = (base.metric_fn(), fiber.metric_fn(), u.clone());
    let name = format!("{} x_u {}", base.name(), fiber.name());
    MetricChart::new(name, chart, move |p| {
        let (b, y) = p.split_at(n);
        let mut g = DMatrix::zeros(n + k, n + k);
        g.view_mut((0, 0), (n, n)).copy_from(&gb(b));
        let uu = u.value(b);
        g.view_mut((n, n), (k, k)).copy_from(&(gf(y) * (uu * uu)));
        g
    })
}

pub fn build_warped(base: BaseSpace, fiber: SpaceFormModel) -> Result<WarpedProductSpec> {
    let n = base.dim();
    let k = fiber.k();
    let probe = base.chart().grid(&vec![33; n], 1e-6);
    let on_boundary = |b: &[f64]| {
        base.boundary.iter().any(|f| {
            let iv = base.chart().bounds()[f.axis];
            let edge = if f.upper { iv.hi } else { iv.lo };
            (b[f.axis] - edge).abs() < 1e-5
        })
    };
    for b in &probe {
        let u = base.u.value(b);
        if !(u > 0.0) && !on_boundary(b) {
            return Err(Error::Domain(format!("warping function u = {u} is not positive at {b:?}")));
        }
    }
    let total_metric = warped_metric(&base.metric, &base.u, &fiber.metric);
    let kappa = {
        let (base, fiber, m) = (base.clone(), fiber.clone(), total_metric.clone());
        ScalarField::new(n + k, move |p| {
            let (b, y) = p.split_at(n);
            let rho = rho_closed(&base, k, tau_of(&fiber, y), b).expect("base point inside chart");
            let q = q_blocks(&base, &fiber, p).expect("point inside chart");
            let tr = (m.inverse(p).expect("nondegenerate metric") * q).trace();
            -rho - tr
        })
    };
    Ok(WarpedProductSpec {
        base,
        fiber,
        total_metric,
        kappa,
    })
}

/// Point-set helpers and closed-form quantities.
impl WarpedProductSpec {
    /// Base dimension.
    pub fn n(&self) -> usize {
        self.base.dim()
    }

    /// Fiber dimension.
    pub fn k(&self) -> usize {
        self.fiber.k()
    }

    pub fn dim(&self) -> usize {
        self.n() + self.k()
    }

    pub fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        p.split_at(self.n())
    }

    pub fn tau_at(&self, p: &[f64]) -> f64 {
        tau_of(&self.fiber, self.split(p).1)
    }

    pub fn rho(&self, p: &[f64]) -> Result<f64> {
        let (b, y) = self.split(p);
        rho_closed(&self.base, self.k(), tau_of(&self.fiber, y), b)
    }

    pub fn kappa_at(&self, p: &[f64]) -> f64 {
        self.kappa.value(p)
    }

    /// Base grid (collar removed) times the fiber grid.
    pub fn grid(&self, base_per_axis: usize, fiber_per_axis: usize) -> Vec<Vec<f64>> {
        let bases = self.base.grid(base_per_axis);
        let fibers = self.fiber.grid(fiber_per_axis);
        bases
            .iter()
            .flat_map(|b| fibers.iter().map(move |y| [&b[..], &y[..]].concat()))
            .collect()
    }

    /// `⌊64^{1/n}⌋ × ⌊64^{1/k}⌋` per-axis counts, at most 64 × 64 points.
    pub fn default_grid(&self) -> Vec<Vec<f64>> {
        let per = |d: usize| (64f64.powf(1.0 / d as f64) + 1e-9).floor() as usize;
        self.grid(per(self.n()), per(self.k()))
    }

    /// `π₁* f` for a base field.
    pub fn lift_base(&self, f: &ScalarField) -> ScalarField {
        f.pullback(self.dim(), 0)
    }

    /// `π₂* f` for a fiber field.
    pub fn lift_fiber(&self, f: &ScalarField) -> ScalarField {
        f.pullback(self.dim(), self.n())
    }

    /// `μ̄(a, b) = κab + g(∇a, ∇b)` on `M`.
    pub fn mu_bar(&self, a: &ScalarField, b: &ScalarField, p: &[f64]) -> Result<f64> {
        let (da, db) = (a.gradient(p, 1e-5), b.gradient(p, 1e-5));
        let inner = (da.transpose() * self.total_metric.inverse(p)? * db)[(0, 0)];
        Ok(self.kappa_at(p) * a.value(p) * b.value(p) + inner)
    }
}

pub fn assemble_q(wp: &WarpedProductSpec) -> QuadraticFormField {
    let (base, fiber) = (wp.base.clone(), wp.fiber.clone());
    QuadraticFormField::new(wp.total_metric.clone(), move |p| {
        q_blocks(&base, &fiber, p).expect("point inside chart")
    })
}

/// Residual tolerance for lifts with analytic derivatives.
pub const LIFT_TOL: f64 = 1e-6;

fn max_residual(q: &QuadraticFormField, w: &ScalarField, grid: &[Vec<f64>]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in grid {
        let hess = hess_scalar(q.metric(), w, p, DEFAULT_STEP)?;
        worst = worst.max((hess - q.eval(p) * w.value(p)).norm());
    }
    Ok(worst)
}

/// `w(b, y) = u(b) v(y)`, checked against `assemble_q` on `grid`.
pub fn lift_solution(wp: &WarpedProductSpec, v: &ScalarField, grid: &[Vec<f64>]) -> Result<ScalarField> {
    if v.dim() != wp.k() {
        return Err(Error::Dimension {
            expected: wp.k(),
            got: v.dim(),
        });
    }
    let w = wp.lift_base(&wp.base.u).mul(&wp.lift_fiber(v))?;
    let tol = if v.has_analytic_hess() && wp.base.u.has_analytic_hess() { LIFT_TOL } else { 1e-4 };
    let r = max_residual(&assemble_q(wp), &w, grid)?;
    if r > tol {
        return Err(Error::Residual {
            context: "lifted solution".into(),
            residual: r,
            tol,
        });
    }
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub z: ScalarField,
    pub v: ScalarField,
    /// Base point where the gauge `z(b₀) = 0` is imposed.
    pub b0: Vec<f64>,
    pub y0: Vec<f64>,
    pub mixed_hessian: f64,
    pub consistency: f64,
}

impl Decomposition {
    pub fn gauge_note(&self) -> String {
        format!(
            "z(b0) = 0 at b0 = {:?}; (z, v) is unique up to (z + c u, v - c)",
            self.b0
        )
    }
}

/// Splits `w = π₁*z + π₁*u · π₂*v` with `v(y) = w(b₀, y)/u(b₀)` and
/// `z(b) = w(b, y₀) − u(b) v(y₀)`.
pub fn decompose(wp: &WarpedProductSpec, w: &ScalarField, grid: &[Vec<f64>], tol: f64) -> Result<Decomposition> {
    let n = wp.n();
    let first = grid
        .first()
        .ok_or_else(|| Error::Precondition("empty grid".into()))?;
    let mut mixed = 0.0f64;
    for p in grid {
        let hess = hess_scalar(&wp.total_metric, w, p, DEFAULT_STEP)?;
        mixed = mixed.max(hess.view((0, n), (n, wp.k())).abs().max());
    }
    if mixed > 1e-6 {
        return Err(Error::NotDecomposable { mixed, tol: 1e-6 });
    }
    let (b0, y0) = (first[..n].to_vec(), first[n..].to_vec());
    let u0 = wp.base.u.value(&b0);
    let v = w.restrict(first, n, wp.k()).scale(1.0 / u0);
    let vy0 = v.value(&y0);
    let z = ScalarField::linear_combination(&[(1.0, &w.restrict(first, 0, n)), (-vy0, &wp.base.u)])?;
    let mut consistency = 0.0f64;
    for p in grid {
        let (b, y) = wp.split(p);
        let recon = z.value(b) + wp.base.u.value(b) * v.value(y);
        consistency = consistency.max((w.value(p) - recon).abs());
    }
    if consistency > tol {
        return Err(Error::Inconsistent {
            deviation: consistency,
            tol,
        });
    }
    Ok(Decomposition {
        z,
        v,
        b0,
        y0,
        mixed_hessian: mixed,
        consistency,
    })
}

#[derive(Debug, Clone)]
pub struct ExtensionReport {
    /// `max ‖Hess_B z − z q_B‖`.
    pub base_residual: f64,
    /// Fiber equation written with `q|_F` and `|∇u|²`.
    pub fiber_residual_q: f64,
    /// Fiber equation written with `μ̄(u)` and `μ̄(u, z)`.
    pub fiber_residual_mu: f64,
    /// Largest gap between the two fiber residual matrices.
    pub forms_gap: f64,
    pub tol: f64,
}

impl ExtensionReport {
    pub fn base_holds(&self) -> bool {
        self.base_residual < self.tol
    }

    pub fn fiber_holds(&self) -> bool {
        self.fiber_residual_q < self.tol && self.fiber_residual_mu < self.tol
    }

    pub fn holds(&self) -> bool {
        self.base_holds() && self.fiber_holds()
    }
}

/// Conditions for `π₁*z + π₁*u · π₂*v` to lie in `W(M; q)`, the fiber
/// equation evaluated in both of its forms.
pub fn check_extension_conditions(
    wp: &WarpedProductSpec,
    z: &ScalarField,
    v: &ScalarField,
    grid: &[Vec<f64>],
    tol: f64,
) -> Result<ExtensionReport> {
    let n = wp.n();
    let k = wp.k();
    let q = assemble_q(wp);
    let q_b = wp.base.q_b();
    let mut rep = ExtensionReport {
        base_residual: 0.0,
        fiber_residual_q: 0.0,
        fiber_residual_mu: 0.0,
        forms_gap: 0.0,
        tol,
    };
    for p in grid {
        let (b, y) = wp.split(p);
        let hess_z = hess_scalar(&wp.base.metric, z, b, DEFAULT_STEP)?;
        rep.base_residual = rep.base_residual.max((hess_z - q_b.eval(b) * z.value(b)).norm());

        let g_f = wp.fiber.metric.metric(y);
        let hess_v = hess_scalar(&wp.fiber.metric, v, y, DEFAULT_STEP)?;
        let (uv, zv, vv) = (wp.base.u.value(b), z.value(b), v.value(y));
        let du = wp.base.u.gradient(b, DEFAULT_STEP);
        let dz = z.gradient(b, DEFAULT_STEP);
        let gu_gz = (du.transpose() * wp.base.metric.inverse(b)? * &dz)[(0, 0)];
        let grad_u_sq = wp.base.grad_u_sq(b)?;

        let q_f = q.eval(p).view((n, n), (k, k)).into_owned();
        let lhs_q = &hess_v + (&g_f * grad_u_sq - &q_f) * vv;
        let rhs_q = -(&g_f * gu_gz - &q_f * (zv / uv));
        let res_q = lhs_q - rhs_q;

        let kappa = wp.kappa_at(p);
        let mu_u = kappa * uv * uv + grad_u_sq;
        let mu_uz = kappa * uv * zv + gu_gz;
        let res_mu = &hess_v + &g_f * (vv * mu_u + mu_uz);

        rep.fiber_residual_q = rep.fiber_residual_q.max(res_q.norm());
        rep.fiber_residual_mu = rep.fiber_residual_mu.max(res_mu.norm());
        rep.forms_gap = rep.forms_gap.max((res_q - res_mu).norm());
    }
    Ok(rep)
}

/// Relative deviations `|a − b| / max(1, |b|)` between closed-form warped
/// product curvature and finite-difference curvature of the total metric.
#[derive(Debug, Clone, Default)]
pub struct OneillReport {
    pub points: usize,
    pub ricci_horizontal: f64,
    pub ricci_vertical: f64,
    pub ricci_mixed: f64,
    pub vertical_hessian_u: f64,
    pub scalar: f64,
    /// Worst `ρ` from the closed form against `Ric_M(V,V)/g(V,V)`.
    pub rho: f64,
}

impl OneillReport {
    pub fn max_deviation(&self) -> f64 {
        [
            self.ricci_horizontal,
            self.ricci_vertical,
            self.ricci_mixed,
            self.vertical_hessian_u,
            self.scalar,
            self.rho,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn merge(&mut self, o: &OneillReport) {
        self.points += o.points;
        self.ricci_horizontal = self.ricci_horizontal.max(o.ricci_horizontal);
        self.ricci_vertical = self.ricci_vertical.max(o.ricci_vertical);
        self.ricci_mixed = self.ricci_mixed.max(o.ricci_mixed);
        self.vertical_hessian_u = self.vertical_hessian_u.max(o.vertical_hessian_u);
        self.scalar = self.scalar.max(o.scalar);
        self.rho = self.rho.max(o.rho);
    }
}

fn rel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    (a - b).abs().max() / b.abs().max().max(1.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn oneill_curvature_check(wp: &WarpedProductSpec, p: &[f64]) -> Result<OneillReport> {
    let h = DEFAULT_STEP;
    let (n, k) = (wp.n(), wp.k());
    let b = wp.split(p).0;
    let base = &wp.base;
    let u = base.u.value(b);
    let tau = wp.tau_at(p);
    let total = curvature(&wp.total_metric, p, h)?;
    let base_curv = curvature(&base.metric, b, h)?;
    let hess_u = hess_scalar(&base.metric, &base.u, b, h)?;
    let grad_u_sq = base.grad_u_sq(b)?;
    let lap_u = base.laplacian_u(b)?;
    let rho = wp.rho(p)?;

    let ric_h = total.ricci.view((0, 0), (n, n)).into_owned();
    let expect_h = &base_curv.ricci - &hess_u * (k as f64 / u);
    let ric_v = total.ricci.view((n, n), (k, k)).into_owned();
    let g_v = total.metric.view((n, n), (k, k)).into_owned();
    let expect_v = &g_v * rho;
    let mixed = total.ricci.view((0, n), (n, k)).abs().max();
    let rho_fd = ric_v[(0, 0)] / g_v[(0, 0)];

    // ∇_{∂_a} ∇u = Γ^i_{a j} (∇u)^j for a vertical index a.
    let gamma = christoffel(&wp.total_metric, p, h)?;
    let mut du = DVector::zeros(n + k);
    du.rows_mut(0, n).copy_from(&base.u.gradient(b, h));
    let grad_u = wp.total_metric.raise(p, &du)?;
    let mut vert = 0.0f64;
    let scale = grad_u_sq / u;
    for a in n..n + k {
        for i in 0..n + k {
            let lhs: f64 = (0..n + k).map(|j| gamma[i][(a, j)] * grad_u[j]).sum();
            let rhs = if i == a { scale } else { 0.0 };
            vert = vert.max(rel(lhs, rhs).max((lhs - rhs).abs() / scale.abs().max(1.0)));
        }
    }

    let kf = k as f64;
    let scal_f = kf * (kf - 1.0) * tau;
    let expect_scal = base_curv.scalar + (scal_f - 2.0 * kf * u * lap_u - kf * (kf - 1.0) * grad_u_sq) / (u * u);

    Ok(OneillReport {
        points: 1,
        ricci_horizontal: rel_matrix(&ric_h, &expect_h),
        ricci_vertical: rel_matrix(&ric_v, &expect_v),
        ricci_mixed: mixed,
        vertical_hessian_u: vert,
        scalar: rel(total.scalar, expect_scal),
        rho: rel(rho, rho_fd),
    })
}

/// [`oneill_curvature_check`] over every grid point with `u ≥ u_min`.
pub fn oneill_over_grid(wp: &WarpedProductSpec, grid: &[Vec<f64>]) -> Result<OneillReport> {
    let mut out = OneillReport::default();
    for p in grid {
        if wp.base.u.value(&p[..wp.n()]) < wp.base.u_min {
            continue;
        }
        out.merge(&oneill_curvature_check(wp, p)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TraceReport {
    pub k: usize,
    /// `tr Q_B` against `Δ_B u / u`.
    pub base_trace: f64,
    /// `k = 1`: `Δ_B u/u + ρ`; `k > 1`: `tr Q + (kρ + tr Q_B)/(k − 1)`.
    pub relation: f64,
}

impl TraceReport {
    pub fn max_deviation(&self) -> f64 {
        self.base_trace.max(self.relation)
    }
}

pub fn trace_relations(wp: &WarpedProductSpec, grid: &[Vec<f64>]) -> Result<TraceReport> {
    let k = wp.k();
    let q = assemble_q(wp);
    let q_b = wp.base.q_b();
    let mut rep = TraceReport {
        k,
        base_trace: 0.0,
        relation: 0.0,
    };
    for p in grid {
        let (b, _) = wp.split(p);
        let tr_qb = q_b.trace(b)?;
        let lap_over_u = wp.base.laplacian_u(b)? / wp.base.u.value(b);
        let rho = wp.rho(p)?;
        rep.base_trace = rep.base_trace.max((tr_qb - lap_over_u).abs());
        let gap = if k == 1 {
            (lap_over_u + rho).abs()
        } else {
            let kf = k as f64;
            (q.trace(p)? + (kf * rho + tr_qb) / (kf - 1.0)).abs()
        };
        rep.relation = rep.relation.max(gap);
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct MuForms {
    pub mu_w1: Vec<f64>,
    pub mu_w1_w2: Vec<f64>,
    pub spread_w1: f64,
    pub spread_w1_w2: f64,
}

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.is_empty() { 0.0 } else { hi - lo }
}

/// `μ̄(w₁)` and `μ̄(w₁, w₂)` over `grid` with their spreads.
pub fn mu_forms(wp: &WarpedProductSpec, w1: &ScalarField, w2: &ScalarField, grid: &[Vec<f64>]) -> Result<MuForms> {
    let mu_w1 = grid.iter().map(|p| wp.mu_bar(w1, w1, p)).collect::<Result<Vec<_>>>()?;
    let mu_w1_w2 = grid.iter().map(|p| wp.mu_bar(w1, w2, p)).collect::<Result<Vec<_>>>()?;
    Ok(MuForms {
        spread_w1: spread(&mu_w1),
        spread_w1_w2: spread(&mu_w1_w2),
        mu_w1,
        mu_w1_w2,
    })
}

#[derive(Debug, Clone)]
pub struct MuGradientReport {
    /// `∇μ̄(w) = (w²/u²)∇μ̄(u)` over the fiber-basis lifts.
    pub lift_identity: f64,
    /// `∇μ̄(u, z) = (z/u)∇μ̄(u) + (κ − κ_B)(u∇z − z∇u)` on the base.
    pub mixed_identity: f64,
    /// The companion identity for `∇μ̄(z, z)`.
    pub square_identity: f64,
    /// Largest `|κ − κ_B|` seen.
    pub kappa_gap: f64,
}

impl MuGradientReport {
    pub fn max_deviation(&self) -> f64 {
        self.lift_identity.max(self.mixed_identity).max(self.square_identity)
    }
}

fn fd_grad(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> DVector<f64> {
    let mut out = DVector::zeros(p.len());
    let mut q = p.to_vec();
    for i in 0..p.len() {
        q[i] = p[i] + h;
        let fp = f(&q);
        q[i] = p[i] - h;
        let fm = f(&q);
        q[i] = p[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
    out
}

/// Gradient identities of the `μ̄` forms. `z` must solve the base equation
/// `Hess_B z = z q_B`.
pub fn mu_gradient_identities(wp: &WarpedProductSpec, z: &ScalarField, grid: &[Vec<f64>]) -> Result<MuGradientReport> {
    let h = 1e-4;
    let n = wp.n();
    let base_pts: Vec<Vec<f64>> = grid.iter().map(|p| p[..n].to_vec()).collect();
    let q_b = wp.base.q_b();
    for b in &base_pts {
        let r = (hess_scalar(&wp.base.metric, z, b, DEFAULT_STEP)? - q_b.eval(b) * z.value(b)).norm();
        if r > 1e-6 {
            return Err(Error::Precondition(format!("z is not a base solution: residual {r:e} at {b:?}")));
        }
    }
    let u = wp.lift_base(&wp.base.u);
    let mu_u = |p: &[f64]| wp.mu_bar(&u, &u, p).expect("point inside chart");

    let mut lift_identity = 0.0f64;
    for v in &wp.fiber.basis {
        let w = u.mul(&wp.lift_fiber(v))?;
        for p in grid {
            let lhs = fd_grad(|x| wp.mu_bar(&w, &w, x).expect("point inside chart"), p, h);
            let ratio = w.value(p) / u.value(p);
            let rhs = fd_grad(mu_u, p, h) * (ratio * ratio);
            lift_identity = lift_identity.max((lhs - rhs).abs().max());
        }
    }

    // On the base the fiber point is fixed at the first grid point.
    let y0 = grid.first().map(|p| p[n..].to_vec()).unwrap_or_default();
    let at = |b: &[f64]| [b, &y0[..]].concat();
    let zl = wp.lift_base(z);
    let (mut mixed_identity, mut square_identity, mut kappa_gap) = (0.0f64, 0.0f64, 0.0f64);
    for b in &base_pts {
        let kappa_b = wp.base.kappa_b(b)?;
        let gap = wp.kappa_at(&at(b)) - kappa_b;
        kappa_gap = kappa_gap.max(gap.abs());
        let (uv, zv) = (wp.base.u.value(b), z.value(b));
        let du = wp.base.metric.grad(&wp.base.u, b, DEFAULT_STEP)?;
        let dz = wp.base.metric.grad(z, b, DEFAULT_STEP)?;
        let killing = &dz * uv - &du * zv;
        let raise = |c: DVector<f64>| wp.base.metric.raise(b, &c);
        let grad_mu_u = raise(fd_grad(|x| mu_u(&at(x)), b, h))?;
        let lhs = raise(fd_grad(|x| wp.mu_bar(&u, &zl, &at(x)).expect("point inside chart"), b, h))?;
        let rhs = &grad_mu_u * (zv / uv) + &killing * gap;
        mixed_identity = mixed_identity.max((lhs - rhs).abs().max());
        let lhs = raise(fd_grad(|x| wp.mu_bar(&zl, &zl, &at(x)).expect("point inside chart"), b, h))?;
        let rhs = &grad_mu_u * (zv * zv / (uv * uv)) + &killing * (2.0 * zv / uv * gap);
        square_identity = square_identity.max((lhs - rhs).abs().max());
    }
    Ok(MuGradientReport {
        lift_identity,
        mixed_identity,
        square_identity,
        kappa_gap,
    })
}

#[derive(Debug, Clone)]
pub struct Example51 {
    pub wp: WarpedProductSpec,
    pub q: QuadraticFormField,
    /// `dim W(M; q) ≥ k + 1`.
    pub dim_lower_bound: usize,
    /// Whether `τ/u² + (u′/u)′` vanishes on the grid, the criterion for
    /// `dim W(M; q) = k + 2`.
    pub k_plus_2_condition: bool,
    pub k_plus_2_deviation: f64,
}

/// `M = I ×ᵤ F` over a flat interval, with `q = (u″/u)dt² + ((u′)² − τ)g_F`.
pub fn example51_family(u: ScalarField, fiber: SpaceFormModel, window: (f64, f64)) -> Result<Example51> {
    let tau = fiber
        .spec
        .tau_const()
        .ok_or_else(|| Error::Precondition("the k+2 criterion needs a constant tau".into()))?;
    let base = BaseSpace::interval(window.0, window.1, u)?;
    let k = fiber.k();
    let wp = build_warped(base, fiber)?;
    let q = assemble_q(&wp);
    let mut deviation = 0.0f64;
    for b in wp.base.chart().grid(&[201], BASE_MARGIN) {
        let u = &wp.base.u;
        let (uv, du, ddu) = (u.value(&b), u.gradient(&b, DEFAULT_STEP)[0], u.hessian(&b, DEFAULT_STEP)[(0, 0)]);
        let log_deriv_prime = ddu / uv - (du / uv).powi(2);
        deviation = deviation.max((tau / (uv * uv) + log_deriv_prime).abs());
    }
    Ok(Example51 {
        wp,
        q,
        dim_lower_bound: k + 1,
        k_plus_2_condition: deviation < 1e-8,
        k_plus_2_deviation: deviation,
    })
}

/// `u(t) = cosh t`, `u(t) = eᵗ` and friends with analytic derivatives.
pub fn profile(name: &str) -> Result<ScalarField> {
    Ok(match name {
        "cosh" => ScalarField::univariate(f64::cosh, f64::sinh, f64::cosh),
        "sinh" => ScalarField::univariate(f64::sinh, f64::cosh, f64::sinh),
        "exp" => ScalarField::univariate(f64::exp, f64::exp, f64::exp),
        "sin" => ScalarField::univariate(f64::sin, f64::cos, |t| -t.sin()),
        "one" => ScalarField::univariate(|_| 1.0, |_| 0.0, |_| 0.0),
        other => return Err(Error::Domain(format!("unknown profile {other}"))),
    })
}

/// Shared fixture: a base interval `[lo, hi]` warped by a named profile.
pub fn warped_over_interval(profile_name: &str, window: (f64, f64), fiber: SpaceFormModel) -> Result<WarpedProductSpec> {
    build_warped(BaseSpace::interval(window.0, window.1, profile(profile_name)?)?, fiber)
}

/// The round sphere `[0, π] ×_{sin} S¹` with both ends declared as boundary.
pub fn round_sphere(fiber: SpaceFormModel) -> Result<WarpedProductSpec> {
    let base = BaseSpace::interval(0.0, std::f64::consts::PI, profile("sin")?)?
        .with_boundary(BoundaryFace { axis: 0, upper: false })?
        .with_boundary(BoundaryFace { axis: 0, upper: true })?;
    build_warped(base, fiber)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaceforms::{make_space_form, SpaceFormSpec};

    fn circle() -> SpaceFormModel {
        make_space_form(SpaceFormSpec::sphere(1)).unwrap()
    }

    fn line(tau: f64) -> SpaceFormModel {
        if tau < 0.0 {
            make_space_form(SpaceFormSpec::hyperbolic(1, tau)).unwrap()
        } else {
            make_space_form(SpaceFormSpec::euclidean(1)).unwrap()
        }
    }

    fn cosh_circle() -> WarpedProductSpec {
        warped_over_interval("cosh", (-2.0, 2.0), circle()).unwrap()
    }

    fn hyperbolic_plane() -> WarpedProductSpec {
        warped_over_interval("exp", (-2.0, 2.0), line(0.0)).unwrap()
    }

    #[test]
    fn assembly() {
        let wp = cosh_circle();
        let p = [0.7, 1.1];
        let g = wp.total_metric.metric(&p);
        assert_eq!(g[(0, 1)], 0.0);
        assert!((g[(1, 1)] - 0.7f64.cosh().powi(2)).abs() < 1e-15);
        let q = assemble_q(&wp).eval(&p);
        assert!((q[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((q[(1, 1)] - (0.7f64.sinh().powi(2) - 1.0)).abs() < 1e-9);

        let flat = warped_over_interval("one", (-2.0, 2.0), line(0.0)).unwrap();
        assert!(assemble_q(&flat).eval(&[0.3, 0.4]).abs().max() < 1e-12);

        let hp = hyperbolic_plane();
        let q = assemble_q(&hp).eval(&[0.5, 0.0]);
        assert!((q[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((q[(1, 1)] - 1.0f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn negative_warping_is_rejected() {
        let base = BaseSpace::interval(0.0, 5.0, profile("sin").unwrap()).unwrap();
        assert!(matches!(build_warped(base, line(0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn kappa_matches_closed_form() {
        let wp = cosh_circle();
        for p in wp.grid(9, 3) {
            let t = p[0];
            let expect = (1.0 - t.sinh().powi(2)) / t.cosh().powi(2);
            assert!((wp.kappa_at(&p) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn lifts_solve_and_decompose() {
        for wp in [cosh_circle(), hyperbolic_plane()] {
            let grid = wp.default_grid();
            for v in wp.fiber.basis.clone() {
                let w = lift_solution(&wp, &v, &grid).unwrap();
                let d = decompose(&wp, &w, &grid, 1e-8).unwrap();
                for b in wp.base.grid(17) {
                    assert!(d.z.value(&b).abs() < 1e-8);
                }
                for y in wp.fiber.grid(9) {
                    assert!((d.v.value(&y) - v.value(&y)).abs() < 1e-9);
                }
            }
        }
        let wp = cosh_circle();
        let zero = lift_solution(&wp, &ScalarField::constant(1, 0.0), &wp.grid(5, 5)).unwrap();
        assert_eq!(zero.value(&[0.3, 0.2]), 0.0);
    }

    #[test]
    fn decompose_recovers_base_part() {
        let wp = cosh_circle();
        let grid = wp.default_grid();
        let u = wp.base.u.clone();
        let z0 = ScalarField::coordinate(1, 0).mul(&u).unwrap();
        let v0 = wp.fiber.basis[1].clone();
        let w = ScalarField::linear_combination(&[(1.0, &wp.lift_base(&z0)), (1.0, &wp.lift_base(&u).mul(&wp.lift_fiber(&v0)).unwrap())]).unwrap();
        let d = decompose(&wp, &w, &grid, 1e-8).unwrap();
        assert!(d.consistency < 1e-8);
        // Unique up to (z + cu, v − c).
        let c = d.v.value(&[0.4]) - v0.value(&[0.4]);
        for b in wp.base.grid(9) {
            assert!((d.z.value(&b) - (z0.value(&b) - c * u.value(&b))).abs() < 1e-8);
        }
        assert!(d.gauge_note().contains("z(b0) = 0"));

        let u_only = wp.lift_base(&u);
        let d = decompose(&wp, &u_only, &grid, 1e-8).unwrap();
        assert!((d.v.value(&[2.0]) - 1.0).abs() < 1e-12);
        assert!(d.z.value(&[0.3]).abs() < 1e-12);
    }

    #[test]
    fn mixed_hessian_blocks_decomposition() {
        let wp = cosh_circle();
        let w = ScalarField::new(2, |p| p[0] * p[1].sin());
        assert!(matches!(decompose(&wp, &w, &wp.grid(5, 5), 1e-8), Err(Error::NotDecomposable { .. })));
    }

    #[test]
    fn extension_conditions() {
        let wp = cosh_circle();
        let grid = wp.grid(7, 6);
        let u = wp.base.u.clone();
        let zero_b = ScalarField::constant(1, 0.0);
        let zero_f = ScalarField::constant(1, 0.0);
        for v in &wp.fiber.basis {
            let r = check_extension_conditions(&wp, &zero_b, v, &grid, 1e-7).unwrap();
            assert!(r.holds() && r.forms_gap < 1e-7, "{r:?}");
        }
        // w = u solves the equation only when μ̄(u) = τ vanishes.
        let hp = hyperbolic_plane();
        let r = check_extension_conditions(&hp, &hp.base.u.clone(), &zero_f, &hp.grid(7, 6), 1e-7).unwrap();
        assert!(r.holds(), "{r:?}");
        let r = check_extension_conditions(&wp, &u, &zero_f, &grid, 1e-7).unwrap();
        assert!(r.base_holds() && !r.fiber_holds());
        assert!((r.fiber_residual_mu - 1.0).abs() < 1e-9);
        // z = sinh solves the base equation but μ̄(u, z) = 2 tanh t ≠ 0.
        let z = profile("sinh").unwrap();
        let r = check_extension_conditions(&wp, &z, &zero_f, &grid, 1e-7).unwrap();
        assert!(r.base_holds() && !r.fiber_holds());
        let worst = wp.base.grid(7).iter().map(|b| 2.0 * b[0].tanh().abs()).fold(0.0, f64::max);
        assert!((r.fiber_residual_mu - worst).abs() < 1e-6);
        assert!(r.forms_gap < 1e-7);
    }

    #[test]
    fn oneill_formulas_against_fd_curvature() {
        let hp = hyperbolic_plane();
        let rep = oneill_over_grid(&hp, &hp.grid(9, 5)).unwrap();
        assert!(rep.max_deviation() < 1e-4, "{rep:?}");
        assert!((hp.rho(&[0.3, 0.0]).unwrap() + 1.0).abs() < 1e-9);

        let sphere = round_sphere(circle()).unwrap();
        let grid = sphere.grid(12, 4);
        assert!(grid.iter().all(|p| p[0].sin() >= 0.1));
        let rep = oneill_over_grid(&sphere, &grid).unwrap();
        assert!(rep.max_deviation() < 1e-4, "{rep:?}");
        let c = curvature(&sphere.total_metric, &grid[3], DEFAULT_STEP).unwrap();
        assert!((c.scalar - 2.0).abs() < 1e-4);
        assert!(sphere.base.boundary_gradient_deviation(1).unwrap() < 1e-7);

        let cc = cosh_circle();
        let rep = oneill_over_grid(&cc, &cc.grid(9, 5)).unwrap();
        assert!(rep.max_deviation() < 1e-4, "{rep:?}");
    }

    #[test]
    fn oneill_in_higher_fiber_dimension() {
        let fiber = make_space_form(SpaceFormSpec::sphere(2)).unwrap();
        let wp = warped_over_interval("cosh", (-1.0, 1.0), fiber).unwrap();
        let rep = oneill_over_grid(&wp, &wp.grid(3, 3)).unwrap();
        assert!(rep.max_deviation() < 1e-4, "{rep:?}");
        let tr = trace_relations(&wp, &wp.grid(5, 4)).unwrap();
        assert!(tr.max_deviation() < 1e-6, "{tr:?}");
    }

    #[test]
    fn trace_relations_k1() {
        for wp in [cosh_circle(), hyperbolic_plane(), round_sphere(circle()).unwrap()] {
            let tr = trace_relations(&wp, &wp.grid(9, 4)).unwrap();
            assert!(tr.max_deviation() < 1e-6, "{tr:?}");
        }
    }

    #[test]
    fn mu_forms_values() {
        let wp = cosh_circle();
        let grid = wp.grid(9, 6);
        let u = wp.lift_base(&wp.base.u);
        let m = mu_forms(&wp, &u, &u, &grid).unwrap();
        assert!(m.spread_w1 < 1e-9);
        // μ̄(u) = τ for a constant-τ fiber.
        assert!((m.mu_w1[0] - 1.0).abs() < 1e-9);

        let mut worst = 0.0f64;
        let hp = hyperbolic_plane();
        let u = hp.lift_base(&hp.base.u);
        for p in hp.grid(9, 5) {
            worst = worst.max(hp.mu_bar(&u, &u, &p).unwrap().abs());
        }
        assert!(worst < 1e-9);

        for v in &wp.fiber.basis {
            let w = u_lift(&wp, v);
            let m = mu_forms(&wp, &w, &w, &grid).unwrap();
            assert!(m.spread_w1 < 1e-6);
            let p = &grid[5];
            let fib = wp.fiber.mu_bar(v, v, &p[1..]).unwrap();
            assert!((m.mu_w1[5] - fib).abs() < 1e-8);
        }
    }

    fn u_lift(wp: &WarpedProductSpec, v: &ScalarField) -> ScalarField {
        wp.lift_base(&wp.base.u).mul(&wp.lift_fiber(v)).unwrap()
    }

    #[test]
    fn mu_gradient_identities_on_line_base() {
        let wp = cosh_circle();
        let grid = wp.grid(9, 4);
        let z = profile("sinh").unwrap();
        let r = mu_gradient_identities(&wp, &z, &grid).unwrap();
        assert!(r.max_deviation() < 1e-6, "{r:?}");
        // κ − κ_B = 2 sech² t.
        assert!(r.kappa_gap > 1e-3);
        let r = mu_gradient_identities(&wp, &wp.base.u.clone(), &grid).unwrap();
        assert!(r.max_deviation() < 1e-7);
        // κ = κ_B when τ = u′² − u u″.
        let hyp = warped_over_interval("cosh", (-2.0, 2.0), line(-1.0)).unwrap();
        let r = mu_gradient_identities(&hyp, &z, &hyp.grid(9, 4)).unwrap();
        assert!(r.kappa_gap < 1e-9 && r.max_deviation() < 1e-6, "{r:?}");

        let bad = ScalarField::coordinate(1, 0);
        assert!(matches!(mu_gradient_identities(&wp, &bad, &grid), Err(Error::Precondition(_))));
    }

    #[test]
    fn k_plus_2_criterion() {
        let e = example51_family(profile("exp").unwrap(), line(0.0), (-2.0, 2.0)).unwrap();
        assert!(e.k_plus_2_condition && e.dim_lower_bound == 2);
        let c = example51_family(profile("cosh").unwrap(), circle(), (-2.0, 2.0)).unwrap();
        assert!(!c.k_plus_2_condition);
        let h = example51_family(profile("cosh").unwrap(), line(-1.0), (-2.0, 2.0)).unwrap();
        assert!(h.k_plus_2_condition);
        // Total space of the k+2 cases has constant curvature −1.
        for ex in [&e, &h] {
            let c = curvature(&ex.wp.total_metric, &[0.4, 0.3], DEFAULT_STEP).unwrap();
            assert!(c.constant_curvature_deviation(-1.0) < 1e-5);
        }
    }
}
