use nalgebra::Matrix2;

use super::ode::{solve_ivp_with, OdeOptions, OdeProblem, OdeSolution};
use crate::error::{Error, Result};

/// Entries of `M ∓ I` below this are treated as zero when counting
/// periodic solutions.
pub const PERIODIC_TOL: f64 = 1e-8;

/// `v₂′v₁ − v₂v₁′` at `t`.
pub fn wronskian(s1: &OdeSolution, s2: &OdeSolution, t: f64) -> f64 {
    s2.derivative(t) * s1.value(t) - s2.value(t) * s1.derivative(t)
}

/// Tolerances used for the period map; tighter than the default so that
/// `M = ±I` is resolved well inside [`PERIODIC_TOL`].
pub fn monodromy_options() -> OdeOptions {
    OdeOptions {
        rtol: 1e-12,
        atol: 1e-12,
        ..OdeOptions::default()
    }
}

fn check_periodic(p: &OdeProblem, period: f64) -> Result<()> {
    for i in 0..64 {
        let t = period * i as f64 / 64.0 + 0.123 * period / 64.0;
        let (a, b) = (p.theta(t), p.theta(t + period));
        if (a - b).abs() > 1e-10 * a.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "coefficient is not {period}-periodic: Θ({t}) = {a}, Θ({}) = {b}",
                t + period
            )));
        }
    }
    Ok(())
}

/// Fundamental matrix over one period, columns from initial data `(1, 0)`
/// and `(0, 1)`.
pub fn monodromy(p: &OdeProblem) -> Result<Matrix2<f64>> {
    let period = p
        .period()
        .ok_or_else(|| Error::Precondition("problem has no declared period".into()))?;
    check_periodic(p, period)?;
    let opts = monodromy_options();
    let c1 = solve_ivp_with(p, 0.0, 1.0, 0.0, opts)?;
    let c2 = solve_ivp_with(p, 0.0, 0.0, 1.0, opts)?;
    Ok(Matrix2::new(
        c1.value(period),
        c2.value(period),
        c1.derivative(period),
        c2.derivative(period),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoexistenceVerdict {
    AllPeriodic,
    OnePeriodicRay,
    None,
}

#[derive(Debug, Clone)]
pub struct Coexistence {
    pub verdict: CoexistenceVerdict,
    pub monodromy: Matrix2<f64>,
    /// `dim ker(M − I)`: solutions with the same period as `Θ`.
    pub dim_periodic: usize,
    /// `dim ker(M + I)`: solutions that flip sign over one period.
    pub dim_antiperiodic: usize,
    pub det_deviation: f64,
}

fn kernel_dim(m: Matrix2<f64>) -> usize {
    m.svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s < PERIODIC_TOL)
        .count()
}

pub fn coexistence(p: &OdeProblem) -> Result<Coexistence> {
    let m = monodromy(p)?;
    Ok(coexistence_from(m))
}

pub fn coexistence_from(m: Matrix2<f64>) -> Coexistence {
    let id = Matrix2::identity();
    let dim_periodic = kernel_dim(m - id);
    let dim_antiperiodic = kernel_dim(m + id);
    let verdict = if dim_periodic == 2 || dim_antiperiodic == 2 {
        CoexistenceVerdict::AllPeriodic
    } else if dim_periodic == 1 || dim_antiperiodic == 1 {
        CoexistenceVerdict::OnePeriodicRay
    } else {
        CoexistenceVerdict::None
    };
    Coexistence {
        verdict,
        monodromy: m,
        dim_periodic,
        dim_antiperiodic,
        det_deviation: (m.determinant() - 1.0).abs(),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::hill::ode::solve_ivp;

    #[test]
    fn harmonic_monodromies() {
        let full = OdeProblem::constant_tau(1.0, (0.0, 1.0)).unwrap().with_period(2.0 * PI).unwrap();
        assert!((monodromy(&full).unwrap() - Matrix2::identity()).norm() < 1e-9);
        let half = OdeProblem::constant_tau(1.0, (0.0, 1.0)).unwrap().with_period(PI).unwrap();
        assert!((monodromy(&half).unwrap() + Matrix2::identity()).norm() < 1e-9);
        let flat = OdeProblem::constant_tau(0.0, (0.0, 1.0)).unwrap().with_period(1.0).unwrap();
        assert!((monodromy(&flat).unwrap() - Matrix2::new(1.0, 1.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn coexistence_cases() {
        let mk = |tau: f64, period: f64| {
            coexistence(&OdeProblem::constant_tau(tau, (0.0, 1.0)).unwrap().with_period(period).unwrap()).unwrap()
        };
        let c = mk(1.0, 2.0 * PI);
        assert_eq!((c.verdict, c.dim_periodic), (CoexistenceVerdict::AllPeriodic, 2));
        let c = mk(0.0, 1.0);
        assert_eq!((c.verdict, c.dim_periodic), (CoexistenceVerdict::OnePeriodicRay, 1));
        let c = mk(-1.0, 1.0);
        assert_eq!((c.verdict, c.dim_periodic), (CoexistenceVerdict::None, 0));
        assert!(c.det_deviation < 1e-8);
    }

    #[test]
    fn aperiodic_coefficient_is_rejected() {
        let p = OdeProblem::new(|t| t, (0.0, 1.0)).unwrap().with_period(1.0).unwrap();
        assert!(matches!(monodromy(&p), Err(Error::Precondition(_))));
    }

    #[test]
    fn wronskians() {
        let p = OdeProblem::constant_tau(1.0, (0.0, 5.0)).unwrap();
        let c = solve_ivp(&p, 0.0, 1.0, 0.0).unwrap();
        let s = solve_ivp(&p, 0.0, 0.0, 1.0).unwrap();
        let c2 = solve_ivp(&p, 0.0, 2.0, 0.0).unwrap();
        for t in [0.0, 1.3, 4.9] {
            assert!((wronskian(&c, &s, t) - 1.0).abs() < 1e-8);
            assert!(wronskian(&c, &c2, t).abs() < 1e-8);
        }
    }
}
