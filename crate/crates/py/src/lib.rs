//! Python bindings: `import wr`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use wr_cli::scenario::{Scenario, SchemaError};
use wr_core::expr::field_of_t;
use wr_core::hill::{self, CoexistenceVerdict, IsometryVerdict, OdeProblem, CURVE_GRID};
use wr_core::rigidity::{bracket_wedge, WedgeElement};
use wr_core::solspace::{classify_1d as classify, Domain1D, OneDProblem};
use wr_core::spaceforms::{gram_mu, make_space_form, SpaceFormSpec};

fn core_err(e: wr_core::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn schema_err(e: SchemaError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn domain(name: &str, a: Option<f64>) -> PyResult<Domain1D> {
    let need = || a.ok_or_else(|| PyValueError::new_err(format!("domain {name} needs a")));
    Ok(match name {
        "line" => Domain1D::Line,
        "half_line" => Domain1D::HalfLine,
        "circle" => Domain1D::Circle { radius: need()? },
        "interval" => Domain1D::Interval { length: 2.0 * std::f64::consts::PI * need()? },
        _ => return Err(PyValueError::new_err(format!("unknown domain {name}"))),
    })
}

fn space_form(kind: &str, dim: usize, tau: Option<f64>) -> PyResult<SpaceFormSpec> {
    let spec = match kind {
        "sphere" => SpaceFormSpec::sphere(dim),
        "euclidean" => SpaceFormSpec::euclidean(dim),
        "hyperbolic" => SpaceFormSpec::hyperbolic(dim, tau.unwrap_or(-1.0)),
        _ => return Err(PyValueError::new_err(format!("unknown space form {kind}"))),
    };
    spec.validate().map_err(core_err)?;
    Ok(spec)
}

/// Dimensions of W(M; -tau g) on a one-dimensional domain.
#[pyfunction]
#[pyo3(signature = (domain_name, tau, a=None))]
fn classify_1d<'py>(py: Python<'py>, domain_name: &str, tau: f64, a: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let p = OneDProblem::new(domain(domain_name, a)?, tau).map_err(core_err)?;
    let c = classify(&p).map_err(core_err)?;
    let d = PyDict::new(py);
    d.set_item("dim", c.dim)?;
    d.set_item("dim_d", c.dim_d)?;
    d.set_item("dim_n", c.dim_n)?;
    d.set_item("basis", c.basis.iter().map(|b| b.label.clone()).collect::<Vec<_>>())?;
    Ok(d)
}

/// Gram matrix of the mu-bar form on the standard basis of a space form.
#[pyfunction]
#[pyo3(signature = (kind, dim, tau=None))]
fn gram(kind: &str, dim: usize, tau: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
    let m = make_space_form(space_form(kind, dim, tau)?).map_err(core_err)?;
    let g = gram_mu(&m).map_err(core_err)?.matrix;
    Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
}

/// Basis labels and `Hess v + tau v g` residuals at seeded interior points.
#[pyfunction]
#[pyo3(signature = (kind, dim, tau=None, points=50, seed=1))]
fn space_form_residuals(kind: &str, dim: usize, tau: Option<f64>, points: usize, seed: u64) -> PyResult<BTreeMap<String, f64>> {
    let m = make_space_form(space_form(kind, dim, tau)?).map_err(core_err)?;
    let pts = m.sample(points, seed);
    let mut out = BTreeMap::new();
    for (v, label) in m.basis.iter().zip(&m.labels) {
        let mut worst = 0.0f64;
        for p in &pts {
            worst = worst.max(m.residual(v, p, wr_core::geomkit::DEFAULT_STEP).map_err(core_err)?);
        }
        out.insert(label.clone(), worst);
    }
    Ok(out)
}

fn wedge(terms: &[(f64, usize, usize)]) -> WedgeElement {
    let mut z = WedgeElement::zero();
    for &(c, i, j) in terms {
        z.add_term(c, i, j);
    }
    z
}

/// Bracket of two wedge elements given as `(coefficient, i, j)` terms.
#[pyfunction]
fn bracket(gram: Vec<Vec<f64>>, z1: Vec<(f64, usize, usize)>, z2: Vec<(f64, usize, usize)>) -> PyResult<Vec<(f64, usize, usize)>> {
    let n = gram.len();
    if gram.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("gram must be square"));
    }
    let g = DMatrix::from_fn(n, n, |i, j| gram[i][j]);
    let z3 = bracket_wedge(&g, &wedge(&z1), &wedge(&z2)).map_err(core_err)?;
    Ok(z3.terms().map(|((i, j), c)| (c, i, j)).collect())
}

/// Coexistence verdict of `w'' + tau w = 0` with constant tau over one period.
#[pyfunction]
fn coexistence<'py>(py: Python<'py>, tau: f64, period: f64) -> PyResult<Bound<'py, PyDict>> {
    let p = OdeProblem::constant_tau(tau, (0.0, period))
        .and_then(|p| p.with_period(period))
        .map_err(core_err)?;
    let c = hill::coexistence(&p).map_err(core_err)?;
    let d = PyDict::new(py);
    let verdict = match c.verdict {
        CoexistenceVerdict::AllPeriodic => "all_periodic",
        CoexistenceVerdict::OnePeriodicRay => "one_periodic_ray",
        CoexistenceVerdict::None => "none",
    };
    d.set_item("verdict", verdict)?;
    d.set_item("dim_periodic", c.dim_periodic)?;
    d.set_item("dim_antiperiodic", c.dim_antiperiodic)?;
    d.set_item("det_deviation", c.det_deviation)?;
    Ok(d)
}

/// Isocurved surface pair from a profile expression in `t`.
#[pyfunction]
#[pyo3(signature = (v1, c2, window, tail_bound=None))]
fn isocurved_pair<'py>(py: Python<'py>, v1: &str, c2: f64, window: (f64, f64), tail_bound: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let v1 = field_of_t(v1).map_err(core_err)?;
    let pair = hill::build_isocurved_pair(&v1, c2, window, tail_bound).map_err(core_err)?;
    let t = hill::uniform_grid(window.0, window.1, CURVE_GRID);
    let d = PyDict::new(py);
    d.set_item("tau", t.iter().map(|&s| pair.tau(s)).collect::<Vec<_>>())?;
    d.set_item("v1", t.iter().map(|&s| pair.v1.value(&[s])).collect::<Vec<_>>())?;
    d.set_item("v2", t.iter().map(|&s| pair.v2.value(&[s])).collect::<Vec<_>>())?;
    d.set_item("wronskian", t.iter().map(|&s| pair.wronskian(s)).collect::<Vec<_>>())?;
    d.set_item("t", t)?;
    d.set_item("window_only", pair.positivity.window_only)?;
    let w = hill::non_isometry_witness(&pair);
    d.set_item("not_isometric", w.verdict == IsometryVerdict::NotIsometric)?;
    Ok(d)
}

/// Runs a scenario given as JSON text and returns its report as JSON text.
#[pyfunction]
fn run_scenario(src: &str) -> PyResult<String> {
    let s = Scenario::from_json(src).map_err(schema_err)?;
    let o = wr_cli::run::run(&s).map_err(schema_err)?;
    serde_json::to_string(&o.report()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs the acceptance criteria; returns `{id: passed}`.
#[pyfunction]
#[pyo3(signature = (filter=None))]
fn verify(filter: Option<&str>) -> BTreeMap<String, bool> {
    wr_cli::verify::verify_all(filter, None)
        .results
        .iter()
        .map(|r| (r.id.clone(), r.passed()))
        .collect()
}

#[pymodule]
fn wr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(classify_1d, m)?)?;
    m.add_function(wrap_pyfunction!(gram, m)?)?;
    m.add_function(wrap_pyfunction!(space_form_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(bracket, m)?)?;
    m.add_function(wrap_pyfunction!(coexistence, m)?)?;
    m.add_function(wrap_pyfunction!(isocurved_pair, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
