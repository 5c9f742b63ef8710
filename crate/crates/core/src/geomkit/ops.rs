use nalgebra::{DMatrix, DVector};

use super::field::{symmetrize, MetricChart, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Default central-difference step for O(1)-scaled charts.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Christoffel symbols, `gamma[k][(i, j)] = Γᵏᵢⱼ`.
pub type Christoffel = Vec<DMatrix<f64>>;

/// Riemann, Ricci and scalar curvature at one point.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub christoffel: Christoffel,
    /// `Rⁱⱼₖₗ` stored row-major in `(i, j, k, l)`.
    pub riemann: Vec<f64>,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    pub metric: DMatrix<f64>,
    dim: usize,
}

impl CurvatureReport {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.riemann[((i * n + j) * n + k) * n + l]
    }

    /// Fully covariant `R_{ijkl} = g_{im} Rᵐⱼₖₗ`.
    pub fn riemann_lower(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        (0..self.dim)
            .map(|m| self.metric[(i, m)] * self.riemann(m, j, k, l))
            .sum()
    }

    /// Sectional curvature of the coordinate plane spanned by `∂_a, ∂_b`.
    pub fn sectional(&self, a: usize, b: usize) -> f64 {
        let g = &self.metric;
        let area = g[(a, a)] * g[(b, b)] - g[(a, b)] * g[(a, b)];
        self.riemann_lower(a, b, a, b) / area
    }

    /// Largest deviation of `R_{ijkl}` from the constant-curvature tensor
    /// `K (g_{ik} g_{jl} − g_{il} g_{jk})`, relative to `max(1, |K|)` and the
    /// metric scale.
    pub fn constant_curvature_deviation(&self, k: f64) -> f64 {
        let n = self.dim;
        let g = &self.metric;
        let scale = g.abs().max().powi(2) * k.abs().max(1.0);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let model = k * (g[(i, a)] * g[(j, b)] - g[(i, b)] * g[(j, a)]);
                        worst = worst.max((self.riemann_lower(i, j, a, b) - model).abs() / scale);
                    }
                }
            }
        }
        worst
    }

    /// Residual of the first Bianchi identity and of antisymmetry in `(k, l)`.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let cyc =
                            self.riemann(i, j, k, l) + self.riemann(i, k, l, j) + self.riemann(i, l, j, k);
                        let anti = self.riemann(i, j, k, l) + self.riemann(i, j, l, k);
                        worst = worst.max(cyc.abs()).max(anti.abs());
                    }
                }
            }
        }
        worst
    }
}

fn shifted(p: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[axis] += delta;
    q
}

/// Coordinate derivatives `∂ₖ g` by the fourth-order five-point central
/// stencil (reaches `p ± 2h`).
pub fn metric_derivatives(m: &MetricChart, p: &[f64], h: f64) -> Vec<DMatrix<f64>> {
    (0..m.dim())
        .map(|k| {
            let g = |s: f64| m.metric(&shifted(p, k, s * h));
            (g(-2.0) - g(2.0) + (g(1.0) - g(-1.0)) * 8.0) / (12.0 * h)
        })
        .collect()
}

fn christoffel_unchecked(m: &MetricChart, p: &[f64], h: f64) -> Result<Christoffel> {
    let n = m.dim();
    let ginv = m.inverse(p)?;
    let dg = metric_derivatives(m, p, h);
    let mut gamma = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        for j in i..n {
            // lowered Γ_{l,ij}
            let low = DVector::from_iterator(
                n,
                (0..n).map(|l| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])),
            );
            let up = &ginv * low;
            for k in 0..n {
                gamma[k][(i, j)] = up[k];
                gamma[k][(j, i)] = up[k];
            }
        }
    }
    Ok(gamma)
}

/// Levi-Civita connection coefficients `Γᵏᵢⱼ`.
pub fn christoffel(m: &MetricChart, p: &[f64], h: f64) -> Result<Christoffel> {
    m.chart().check_margin(p, 2.0 * h)?;
    christoffel_unchecked(m, p, h)
}

/// Covariant Hessian `∂ᵢ∂ⱼw − Γᵏᵢⱼ ∂ₖw`.
pub fn hess_scalar(m: &MetricChart, w: &ScalarField, p: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let gamma = christoffel(m, p, h)?;
    let dw = w.gradient(p, h);
    let mut hess = w.hessian(p, h);
    for (k, gk) in gamma.iter().enumerate() {
        hess -= gk * dw[k];
    }
    Ok(symmetrize(&hess))
}

/// Laplacian `tr_g Hess w`.
pub fn laplacian(m: &MetricChart, w: &ScalarField, p: &[f64], h: f64) -> Result<f64> {
    let hess = hess_scalar(m, w, p, h)?;
    Ok((m.inverse(p)? * hess).trace())
}

/// Riemann, Ricci and scalar curvature from finite differences of Γ.
pub fn curvature(m: &MetricChart, p: &[f64], h: f64) -> Result<CurvatureReport> {
    m.chart().check_margin(p, 3.0 * h)?;
    let n = m.dim();
    let gamma = christoffel_unchecked(m, p, h)?;
    let dgamma: Vec<Christoffel> = (0..n)
        .map(|a| {
            let plus = christoffel_unchecked(m, &shifted(p, a, h), h)?;
            let minus = christoffel_unchecked(m, &shifted(p, a, -h), h)?;
            Ok(plus
                .iter()
                .zip(&minus)
                .map(|(gp, gm)| (gp - gm) / (2.0 * h))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut riemann = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut r = dgamma[k][i][(l, j)] - dgamma[l][i][(k, j)];
                    for s in 0..n {
                        r += gamma[i][(k, s)] * gamma[s][(l, j)] - gamma[i][(l, s)] * gamma[s][(k, j)];
                    }
                    riemann[((i * n + j) * n + k) * n + l] = r;
                }
            }
        }
    }
    let mut ricci = DMatrix::zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            ricci[(j, l)] = (0..n).map(|i| riemann[((i * n + j) * n + i) * n + l]).sum();
        }
    }
    let ricci = symmetrize(&ricci);
    let metric = m.metric(p);
    let scalar = (m.inverse(p)? * &ricci).trace();
    Ok(CurvatureReport {
        point: p.to_vec(),
        christoffel: gamma,
        riemann,
        ricci,
        scalar,
        metric,
        dim: n,
    })
}

/// Coordinate Jacobian `J[(i, k)] = ∂ₖXⁱ`.
pub fn jacobian(x: &VectorField, p: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.dim();
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let d = (x.eval(&shifted(p, k, h)) - x.eval(&shifted(p, k, -h))) / (2.0 * h);
        jac.set_column(k, &d);
    }
    jac
}

/// `(L_K g)ᵢⱼ = Kᵏ∂ₖgᵢⱼ + gₖⱼ∂ᵢKᵏ + gᵢₖ∂ⱼKᵏ`.
pub fn lie_derivative_metric(
    m: &MetricChart,
    k: &VectorField,
    p: &[f64],
    h: f64,
) -> Result<DMatrix<f64>> {
    m.chart().check_margin(p, 2.0 * h)?;
    if k.dim() != m.dim() {
        return Err(Error::Dimension {
            expected: m.dim(),
            got: k.dim(),
        });
    }
    let kv = k.eval(p);
    let dg = metric_derivatives(m, p, h);
    let jac = jacobian(k, p, h);
    let g = m.metric(p);
    let mut out = DMatrix::zeros(m.dim(), m.dim());
    for (a, dga) in dg.iter().enumerate() {
        out += dga * kv[a];
    }
    let gj = &g * &jac;
    out += &gj + gj.transpose();
    Ok(out)
}

/// `[X, Y]ⁱ = Xᵏ∂ₖYⁱ − Yᵏ∂ₖXⁱ`.
pub fn vector_bracket(x: &VectorField, y: &VectorField, p: &[f64], h: f64) -> Result<DVector<f64>> {
    x.chart().check_margin(p, 2.0 * h)?;
    if x.dim() != y.dim() {
        return Err(Error::Dimension {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok(jacobian(y, p, h) * x.eval(p) - jacobian(x, p, h) * y.eval(p))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::geomkit::chart::{Chart, Interval};

    fn polar() -> MetricChart {
        let chart = Chart::new(vec![Interval::open(0.0, 4.0), Interval::closed(-PI, PI)]).unwrap();
        MetricChart::diagonal("polar", chart, |p| vec![1.0, p[0] * p[0]])
    }

    fn sphere() -> MetricChart {
        let chart = Chart::new(vec![Interval::open(0.0, PI), Interval::closed(-PI, PI)]).unwrap();
        MetricChart::diagonal("S2", chart, |p| vec![1.0, p[0].sin().powi(2)])
    }

    fn half_plane() -> MetricChart {
        let chart = Chart::new(vec![Interval::closed(-2.0, 2.0), Interval::open(0.0, 4.0)]).unwrap();
        MetricChart::diagonal("H2", chart, |p| vec![1.0 / (p[1] * p[1]); 2])
    }

    fn flat() -> MetricChart {
        MetricChart::euclidean(Chart::cube(2, -2.0, 2.0).unwrap())
    }

    #[test]
    fn polar_christoffel() {
        let g = christoffel(&polar(), &[2.0, 0.3], DEFAULT_STEP).unwrap();
        assert!((g[0][(1, 1)] + 2.0).abs() < 1e-8);
        assert!((g[1][(0, 1)] - 0.5).abs() < 1e-8);
        assert!((g[1][(1, 0)] - 0.5).abs() < 1e-8);
        assert!(g[0][(0, 0)].abs() < 1e-12 && g[1][(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn sphere_christoffel() {
        let t = PI / 3.0;
        let g = christoffel(&sphere(), &[t, 0.0], DEFAULT_STEP).unwrap();
        assert!((g[0][(1, 1)] + t.sin() * t.cos()).abs() < 1e-8);
    }

    #[test]
    fn euclidean_christoffel_vanishes() {
        let g = christoffel(&flat(), &[0.3, -0.7], DEFAULT_STEP).unwrap();
        assert!(g.iter().all(|m| m.abs().max() == 0.0));
    }

    #[test]
    fn margin_is_enforced() {
        let err = christoffel(&half_plane(), &[1.99995, 1.0], DEFAULT_STEP).unwrap_err();
        assert!(matches!(err, Error::Margin { axis: 0, .. }));
    }

    #[test]
    fn hessians_of_model_functions() {
        let x2 = ScalarField::new(2, |p| p[0] * p[0]);
        let hess = hess_scalar(&flat(), &x2, &[0.1, 0.2], DEFAULT_STEP).unwrap();
        assert!((hess - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]))).norm() < 1e-6);

        let cos = ScalarField::new(2, |p| p[0].cos())
            .with_grad(|p| DVector::from_vec(vec![-p[0].sin(), 0.0]))
            .with_hess(|p| DMatrix::from_diagonal(&DVector::from_vec(vec![-p[0].cos(), 0.0])));
        let p = [1.1, 0.4];
        let m = sphere();
        let hess = hess_scalar(&m, &cos, &p, DEFAULT_STEP).unwrap();
        assert!((hess + m.metric(&p) * cos.value(&p)).norm() < 1e-8);
    }

    #[test]
    fn constant_field_has_zero_hessian() {
        let c = ScalarField::constant(2, 3.5);
        let hess = hess_scalar(&polar(), &c, &[1.3, 0.2], DEFAULT_STEP).unwrap();
        assert!(hess.abs().max() < 1e-9);
    }

    #[test]
    fn hessian_is_second_order_in_step() {
        // w = r² cos θ = x r, whose covariant Hessian in polar coordinates is
        // known in closed form.
        let w = ScalarField::new(2, |p| p[0] * p[0] * p[1].cos());
        let exact = |p: &[f64]| {
            let (r, t) = (p[0], p[1]);
            // ∂∂w − Γ ∂w with Γʳ_θθ = −r, Γ^θ_rθ = 1/r
            let hrr = 2.0 * t.cos();
            let hrt = -2.0 * r * t.sin() + r * t.sin();
            let htt = -r * r * t.cos() + r * 2.0 * r * t.cos();
            DMatrix::from_row_slice(2, 2, &[hrr, hrt, hrt, htt])
        };
        let p = [1.5, 0.6];
        let m = polar();
        let e1 = (hess_scalar(&m, &w, &p, 2e-2).unwrap() - exact(&p)).norm();
        let e2 = (hess_scalar(&m, &w, &p, 1e-2).unwrap() - exact(&p)).norm();
        assert!(e1 / e2 >= 3.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn model_scalar_curvatures() {
        let r = curvature(&flat(), &[0.0, 0.0], DEFAULT_STEP).unwrap();
        assert_eq!(r.scalar, 0.0);
        let r = curvature(&sphere(), &[1.0, 0.5], DEFAULT_STEP).unwrap();
        assert!((r.scalar - 2.0).abs() < 1e-5);
        assert!(r.bianchi_residual() < 1e-5);
        assert!(r.constant_curvature_deviation(1.0) < 1e-5);
        let r = curvature(&half_plane(), &[0.0, 1.0], DEFAULT_STEP).unwrap();
        assert!((r.scalar + 2.0).abs() < 1e-5);
        assert!((r.sectional(0, 1) + 1.0).abs() < 1e-5);
        assert!((&r.ricci - r.ricci.transpose()).norm() < 1e-12);
    }

    #[test]
    fn lie_derivatives_on_the_plane() {
        let chart = Chart::cube(2, -2.0, 2.0).unwrap();
        let m = flat();
        let p = [0.4, -0.9];
        let dx = VectorField::new(chart.clone(), |_| DVector::from_vec(vec![1.0, 0.0]));
        let rot = VectorField::new(chart.clone(), |p| DVector::from_vec(vec![-p[1], p[0]]));
        let dil = VectorField::new(chart, |p| DVector::from_vec(vec![p[0], 0.0]));
        assert!(lie_derivative_metric(&m, &dx, &p, DEFAULT_STEP).unwrap().norm() < 1e-12);
        assert!(lie_derivative_metric(&m, &rot, &p, DEFAULT_STEP).unwrap().norm() < 1e-7);
        let d = lie_derivative_metric(&m, &dil, &p, DEFAULT_STEP).unwrap();
        assert!((d - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]))).norm() < 1e-8);
    }

    #[test]
    fn brackets_on_the_plane() {
        let chart = Chart::cube(2, -2.0, 2.0).unwrap();
        let dx = VectorField::new(chart.clone(), |_| DVector::from_vec(vec![1.0, 0.0]));
        let dy = VectorField::new(chart.clone(), |_| DVector::from_vec(vec![0.0, 1.0]));
        let rot = VectorField::new(chart, |p| DVector::from_vec(vec![-p[1], p[0]]));
        let p = [0.3, 1.2];
        assert!(vector_bracket(&dx, &dy, &p, DEFAULT_STEP).unwrap().norm() < 1e-12);
        let b = vector_bracket(&rot, &dx, &p, DEFAULT_STEP).unwrap();
        assert!((b - DVector::from_vec(vec![0.0, -1.0])).norm() < 1e-9);
        assert!(vector_bracket(&rot, &rot, &p, DEFAULT_STEP).unwrap().norm() < 1e-12);
    }
}
