use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::chart::Chart;
use crate::error::{Error, Result};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Condition numbers above this are treated as a degenerate metric.
pub const MAX_METRIC_CONDITION: f64 = 1e10;

/// A smooth real function on a chart, with optional closed-form derivatives.
///
/// Analytic derivatives are used whenever present; otherwise central
/// differences with the caller's step are the fallback.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    value: ValueFn,
    grad: Option<GradFn>,
    hess: Option<MatrixFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("analytic_grad", &self.grad.is_some())
            .field("analytic_hess", &self.hess.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            grad: None,
            hess: None,
        }
    }

    pub fn with_grad(
        mut self,
        grad: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_hess(
        mut self,
        hess: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(hess));
        self
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, move |_| c)
            .with_grad(move |_| DVector::zeros(dim))
            .with_hess(move |_| DMatrix::zeros(dim, dim))
    }

    /// The coordinate function `x_axis`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        Self::new(dim, move |p| p[axis])
            .with_grad(move |_| {
                let mut g = DVector::zeros(dim);
                g[axis] = 1.0;
                g
            })
            .with_hess(move |_| DMatrix::zeros(dim, dim))
    }

    /// A function of one variable `f(t)` with derivatives `f'`, `f''`.
    pub fn univariate(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(1, move |p| f(p[0]))
            .with_grad(move |p| DVector::from_element(1, df(p[0])))
            .with_hess(move |p| DMatrix::from_element(1, 1, d2f(p[0])))
    }

    /// Drops closed-form derivatives so that finite differences are used.
    pub fn value_only(&self) -> Self {
        Self {
            dim: self.dim,
            value: self.value.clone(),
            grad: None,
            hess: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn has_analytic_hess(&self) -> bool {
        self.hess.is_some()
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        (self.value)(p)
    }

    /// Coordinate partials `∂_i f`.
    pub fn gradient(&self, p: &[f64], h: f64) -> DVector<f64> {
        match &self.grad {
            Some(g) => g(p),
            None => fd_gradient(&*self.value, p, h),
        }
    }

    /// Coordinate second partials `∂_i ∂_j f`, symmetric.
    pub fn hessian(&self, p: &[f64], h: f64) -> DMatrix<f64> {
        if let Some(hess) = &self.hess {
            return hess(p);
        }
        if let Some(grad) = &self.grad {
            let n = self.dim;
            let mut m = DMatrix::zeros(n, n);
            let mut q = p.to_vec();
            for j in 0..n {
                q[j] = p[j] + h;
                let gp = grad(&q);
                q[j] = p[j] - h;
                let gm = grad(&q);
                q[j] = p[j];
                for i in 0..n {
                    m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
                }
            }
            return symmetrize(&m);
        }
        fd_hessian(&*self.value, p, h)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_linear(move |x| c * x)
    }

    fn map_linear(&self, f: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static) -> Self {
        let v = self.value.clone();
        let f0 = f.clone();
        let mut out = Self::new(self.dim, move |p| f0(v(p)));
        if let Some(g) = self.grad.clone() {
            let f1 = f.clone();
            out.grad = Some(Arc::new(move |p| g(p).map(&f1)));
        }
        if let Some(h) = self.hess.clone() {
            out.hess = Some(Arc::new(move |p| h(p).map(&f)));
        }
        out
    }

    /// `Σ c_i f_i`; analytic derivatives survive when every term has them.
    pub fn linear_combination(terms: &[(f64, &ScalarField)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, f)| f.dim)
            .ok_or_else(|| Error::Precondition("empty linear combination".into()))?;
        if let Some((_, f)) = terms.iter().find(|(_, f)| f.dim != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: f.dim,
            });
        }
        let parts: Vec<(f64, ScalarField)> = terms.iter().map(|(c, f)| (*c, (*f).clone())).collect();
        let all_grad = parts.iter().all(|(_, f)| f.grad.is_some());
        let all_hess = parts.iter().all(|(_, f)| f.hess.is_some());
        let vp = parts.clone();
        let mut out = Self::new(dim, move |p| vp.iter().map(|(c, f)| c * f.value(p)).sum());
        if all_grad {
            let gp = parts.clone();
            out.grad = Some(Arc::new(move |p| {
                gp.iter()
                    .fold(DVector::zeros(dim), |acc, (c, f)| acc + f.gradient(p, 0.0) * *c)
            }));
        }
        if all_hess {
            let hp = parts;
            out.hess = Some(Arc::new(move |p| {
                hp.iter()
                    .fold(DMatrix::zeros(dim, dim), |acc, (c, f)| acc + f.hessian(p, 0.0) * *c)
            }));
        }
        Ok(out)
    }

    /// Pointwise product with the product rule for derivatives.
    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: other.dim,
            });
        }
        let (a, b) = (self.clone(), other.clone());
        let mut out = Self::new(self.dim, move |p| a.value(p) * b.value(p));
        if self.grad.is_some() && other.grad.is_some() {
            let (a, b) = (self.clone(), other.clone());
            out.grad = Some(Arc::new(move |p| {
                a.gradient(p, 0.0) * b.value(p) + b.gradient(p, 0.0) * a.value(p)
            }));
            if self.hess.is_some() && other.hess.is_some() {
                let (a, b) = (self.clone(), other.clone());
                out.hess = Some(Arc::new(move |p| {
                    let (ga, gb) = (a.gradient(p, 0.0), b.gradient(p, 0.0));
                    a.hessian(p, 0.0) * b.value(p)
                        + b.hessian(p, 0.0) * a.value(p)
                        + &ga * gb.transpose()
                        + gb * ga.transpose()
                }));
            }
        }
        Ok(out)
    }

    /// Pulls back along the projection `R^total -> R^dim` onto coordinates
    /// `offset .. offset + dim`.
    pub fn pullback(&self, total: usize, offset: usize) -> Self {
        let dim = self.dim;
        assert!(offset + dim <= total, "pullback range out of bounds");
        let f = self.clone();
        let mut out = Self::new(total, move |p| f.value(&p[offset..offset + dim]));
        if let Some(g) = self.grad.clone() {
            out.grad = Some(Arc::new(move |p| {
                let mut full = DVector::zeros(total);
                full.rows_mut(offset, dim).copy_from(&g(&p[offset..offset + dim]));
                full
            }));
        }
        if let Some(h) = self.hess.clone() {
            out.hess = Some(Arc::new(move |p| {
                let mut full = DMatrix::zeros(total, total);
                full.view_mut((offset, offset), (dim, dim))
                    .copy_from(&h(&p[offset..offset + dim]));
                full
            }));
        }
        out
    }

    /// Restricts to a slice: `x ↦ f(embed(x))` where `embed` inserts `x` at
    /// coordinates `offset..offset+dim` of the fixed point `anchor`.
    pub fn restrict(&self, anchor: &[f64], offset: usize, dim: usize) -> Self {
        let f = self.clone();
        let base = anchor.to_vec();
        let embed = move |x: &[f64]| {
            let mut q = base.clone();
            q[offset..offset + dim].copy_from_slice(x);
            q
        };
        let e0 = embed.clone();
        let mut out = Self::new(dim, move |x| f.value(&e0(x)));
        if self.grad.is_some() {
            let (f, e1) = (self.clone(), embed.clone());
            out.grad = Some(Arc::new(move |x| {
                f.gradient(&e1(x), 0.0).rows(offset, dim).into_owned()
            }));
        }
        if self.hess.is_some() {
            let f = self.clone();
            out.hess = Some(Arc::new(move |x| {
                f.hessian(&embed(x), 0.0)
                    .view((offset, offset), (dim, dim))
                    .into_owned()
            }));
        }
        out
    }
}

/// A vector field given by its coordinate components.
#[derive(Clone)]
pub struct VectorField {
    chart: Chart,
    eval: GradFn,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("dim", &self.dim()).finish()
    }
}

impl VectorField {
    pub fn new(chart: Chart, eval: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self {
            chart,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn eval(&self, p: &[f64]) -> DVector<f64> {
        (self.eval)(p)
    }

    /// Linear combination of fields on the same chart.
    pub fn combine(terms: &[(f64, &VectorField)]) -> Option<Self> {
        let chart = terms.first()?.1.chart.clone();
        let parts: Vec<(f64, VectorField)> = terms.iter().map(|(c, f)| (*c, (*f).clone())).collect();
        let dim = chart.dim();
        Some(Self::new(chart, move |p| {
            parts
                .iter()
                .fold(DVector::zeros(dim), |acc, (c, f)| acc + f.eval(p) * *c)
        }))
    }
}

/// A coordinate chart carrying a Riemannian metric.
#[derive(Clone)]
pub struct MetricChart {
    chart: Chart,
    g: MatrixFn,
    name: String,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("name", &self.name)
            .field("chart", &self.chart)
            .finish()
    }
}

impl MetricChart {
    pub fn new(
        name: impl Into<String>,
        chart: Chart,
        g: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            chart,
            g: Arc::new(g),
            name: name.into(),
        }
    }

    pub fn euclidean(chart: Chart) -> Self {
        let n = chart.dim();
        Self::new(format!("R^{n}"), chart, move |_| DMatrix::identity(n, n))
    }

    /// Diagonal metric from per-axis component functions.
    pub fn diagonal(
        name: impl Into<String>,
        chart: Chart,
        diag: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, chart, move |p| DMatrix::from_diagonal(&DVector::from_vec(diag(p))))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn metric(&self, p: &[f64]) -> DMatrix<f64> {
        (self.g)(p)
    }

    pub fn metric_fn(&self) -> MatrixFn {
        self.g.clone()
    }

    /// Condition number of `g(p)`; infinite when not positive definite.
    pub fn condition(&self, p: &[f64]) -> f64 {
        let eig = self.metric(p).symmetric_eigen().eigenvalues;
        let min = eig.min();
        let max = eig.max();
        if min <= 0.0 || !min.is_finite() || !max.is_finite() {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// `g⁻¹(p)`, rejecting near-degenerate metrics.
    pub fn inverse(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let cond = self.condition(p);
        if cond > MAX_METRIC_CONDITION {
            return Err(Error::Degenerate {
                point: p.to_vec(),
                cond,
            });
        }
        self.metric(p).lu().try_inverse().ok_or(Error::Degenerate {
            point: p.to_vec(),
            cond,
        })
    }

    /// Metric-dual of the coordinate differential: `(g⁻¹ df)`.
    pub fn raise(&self, p: &[f64], covector: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.inverse(p)? * covector)
    }

    /// `g(a, b)` at `p`.
    pub fn inner(&self, p: &[f64], a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * self.metric(p) * b)[(0, 0)]
    }

    /// Metric gradient vector of `f`.
    pub fn grad(&self, f: &ScalarField, p: &[f64], h: f64) -> Result<DVector<f64>> {
        self.raise(p, &f.gradient(p, h))
    }

    /// `|∇f|²_g`.
    pub fn grad_norm_sq(&self, f: &ScalarField, p: &[f64], h: f64) -> Result<f64> {
        let df = f.gradient(p, h);
        Ok((df.transpose() * self.inverse(p)? * &df)[(0, 0)])
    }

    /// Smallest eigenvalue of `g(p)` over `points`.
    pub fn min_eigenvalue(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .map(|p| self.metric(p).symmetric_eigen().eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks symmetry and positive definiteness at every point.
    pub fn validate(&self, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            let g = self.metric(p);
            if g.nrows() != self.dim() || g.ncols() != self.dim() {
                return Err(Error::Dimension {
                    expected: self.dim(),
                    got: g.nrows(),
                });
            }
            let asym = (&g - g.transpose()).abs().max();
            if asym > 1e-12 * g.abs().max().max(1.0) {
                return Err(Error::Domain(format!("metric not symmetric at {p:?}")));
            }
            if g.symmetric_eigen().eigenvalues.min() <= 0.0 {
                return Err(Error::Degenerate {
                    point: p.clone(),
                    cond: f64::INFINITY,
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> DVector<f64> {
    let mut q = p.to_vec();
    DVector::from_iterator(
        p.len(),
        (0..p.len()).map(|i| {
            q[i] = p[i] + h;
            let fp = f(&q);
            q[i] = p[i] - h;
            let fm = f(&q);
            q[i] = p[i];
            (fp - fm) / (2.0 * h)
        }),
    )
}

pub(crate) fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> DMatrix<f64> {
    let n = p.len();
    let f0 = f(p);
    let mut m = DMatrix::zeros(n, n);
    let mut q = p.to_vec();
    for i in 0..n {
        q[i] = p[i] + h;
        let fp = f(&q);
        q[i] = p[i] - h;
        let fm = f(&q);
        q[i] = p[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                q[i] = p[i] + si * h;
                q[j] = p[j] + sj * h;
                let v = f(&q);
                q[i] = p[i];
                q[j] = p[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly() -> ScalarField {
        // f = x² y + sin(y)
        ScalarField::new(2, |p| p[0] * p[0] * p[1] + p[1].sin())
            .with_grad(|p| DVector::from_vec(vec![2.0 * p[0] * p[1], p[0] * p[0] + p[1].cos()]))
            .with_hess(|p| {
                DMatrix::from_row_slice(2, 2, &[2.0 * p[1], 2.0 * p[0], 2.0 * p[0], -p[1].sin()])
            })
    }

    #[test]
    fn fd_fallback_matches_analytic() {
        let f = poly();
        let p = [0.7, -0.3];
        let fd = f.value_only();
        assert!((f.gradient(&p, 1e-5) - fd.gradient(&p, 1e-5)).norm() < 1e-9);
        assert!((f.hessian(&p, 1e-4) - fd.hessian(&p, 1e-4)).norm() < 1e-6);
        let hess = fd.hessian(&p, 1e-4);
        assert_eq!(hess, hess.transpose());
    }

    #[test]
    fn product_rule_matches_fd() {
        let f = poly();
        let g = ScalarField::coordinate(2, 0).scale(3.0);
        let fg = f.mul(&g).unwrap();
        let p = [0.4, 1.1];
        assert!(fg.has_analytic_hess());
        assert!((fg.hessian(&p, 0.0) - fg.value_only().hessian(&p, 1e-4)).norm() < 1e-6);
    }

    #[test]
    fn pullback_embeds_blocks() {
        let f = poly().pullback(4, 1);
        let p = [9.0, 0.7, -0.3, 5.0];
        assert_eq!(f.value(&p), poly().value(&[0.7, -0.3]));
        let h = f.hessian(&p, 0.0);
        assert_eq!(h[(0, 0)], 0.0);
        assert_eq!(h[(1, 2)], 2.0 * 0.7);
    }

    #[test]
    fn inverse_rejects_degenerate_metric() {
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let m = MetricChart::diagonal("squashed", chart, |p| vec![1.0, 1e-12 + p[0] * p[0]]);
        assert!(m.inverse(&[0.5, 0.0]).is_ok());
        assert!(matches!(m.inverse(&[0.0, 0.0]), Err(Error::Degenerate { .. })));
    }
}
