use std::f64::consts::PI;

use proptest::prelude::*;
use wr_core::hill::{gaussian_tail, monodromy, quad, solve_ivp, wronskian, OdeProblem};

// Reference values from a 30-digit Taylor-series integrator (mpmath.odefun).
const W_AT_10: f64 = -1.571_239_872_741_358;
const DW_AT_10: f64 = -0.032_470_130_551_420_69;
const MONODROMY_TRACE: f64 = 2.021_314_397_416_841_6;

fn mathieu() -> OdeProblem {
    OdeProblem::from_tau(|t| 1.0 + 0.5 * t.cos(), (0.0, 10.0)).unwrap()
}

#[test]
fn variable_tau_matches_reference_solution() {
    let s = solve_ivp(&mathieu(), 0.0, 1.0, 0.0).unwrap();
    assert!((s.value(10.0) - W_AT_10).abs() < 1e-8, "{}", s.value(10.0));
    assert!((s.derivative(10.0) - DW_AT_10).abs() < 1e-8);
}

#[test]
fn monodromy_trace_matches_reference() {
    let p = OdeProblem::from_tau(|t| 1.0 + 0.5 * t.cos(), (0.0, 2.0 * PI))
        .unwrap()
        .with_period(2.0 * PI)
        .unwrap();
    let m = monodromy(&p).unwrap();
    assert!((m.trace() - MONODROMY_TRACE).abs() < 1e-8, "{}", m.trace());
    assert!((m.determinant() - 1.0).abs() < 1e-8);
}

#[test]
fn quadrature_and_gaussian_tail() {
    let q = quad(|s| (-s * s).exp(), 0.0, 1.0).unwrap();
    assert!((q - 0.746_824_132_812_427).abs() < 1e-13);
    assert!((gaussian_tail(-2.0) - 0.004_145_534_690_336_334).abs() < 1e-15);
}

#[test]
fn constant_tau_matches_trigonometric_closed_form() {
    let p = OdeProblem::constant_tau(4.0, (0.0, 3.0)).unwrap();
    let s = solve_ivp(&p, 0.0, 0.0, 1.0).unwrap();
    for t in [0.3, 1.1, 2.9] {
        assert!((s.value(t) - (2.0 * t).sin() / 2.0).abs() < 1e-9);
        assert!((s.derivative(t) - (2.0 * t).cos()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wronskian_is_constant(a in -2.0f64..2.0, b in -1.0f64..1.0, w0 in -1.0f64..1.0) {
        let p = OdeProblem::from_tau(move |t| a + b * (2.0 * t).sin(), (0.0, 5.0)).unwrap();
        let s1 = solve_ivp(&p, 0.0, 1.0, w0).unwrap();
        let s2 = solve_ivp(&p, 0.0, 0.0, 1.0).unwrap();
        let w0v = wronskian(&s1, &s2, 0.0);
        for t in [1.0, 2.5, 5.0] {
            prop_assert!((wronskian(&s1, &s2, t) - w0v).abs() < 1e-7);
        }
    }
}
