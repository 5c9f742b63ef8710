//! The acceptance suite behind `wr verify`.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::Serialize;
use wr_core::hill::{coexistence, positive_excludes_allperiodic, solve_ivp, uniform_grid, wronskian, CoexistenceVerdict, OdeProblem};
use wr_core::geomkit::ScalarField;

use crate::check::{guarded, Check};
use crate::run::{run_params, Outcome};
use crate::scenario::{CurvatureCrosscheckParams, FormName, Params, SpaceFormParams, TauValue};
use crate::shipped;

pub struct Criterion {
    pub id: &'static str,
    pub module: &'static str,
    pub title: &'static str,
    run: fn(&mut Context) -> Vec<Check>,
}

/// Scenario outcomes shared between criteria, each run once.
#[derive(Default)]
pub struct Context {
    outcomes: BTreeMap<String, Outcome>,
    seconds: BTreeMap<String, f64>,
}

impl Context {
    fn outcome(&mut self, name: &str) -> Result<&Outcome, String> {
        if !self.outcomes.contains_key(name) {
            let start = Instant::now();
            let outcome = shipped::load(name)
                .and_then(|s| crate::run::run(&s))
                .map_err(|e| format!("{name}: {e}"))?;
            self.seconds.insert(name.to_string(), start.elapsed().as_secs_f64());
            self.outcomes.insert(name.to_string(), outcome);
        }
        Ok(&self.outcomes[name])
    }

    /// Checks of a shipped scenario whose names satisfy `keep`, prefixed
    /// with the scenario name.
    fn checks(&mut self, name: &str, keep: impl Fn(&str) -> bool) -> Vec<Check> {
        match self.outcome(name) {
            Ok(o) => o
                .checks
                .iter()
                .filter(|c| keep(&c.name))
                .map(|c| {
                    let mut c = c.clone();
                    c.name = format!("{name}/{}", c.name);
                    c
                })
                .collect(),
            Err(e) => vec![Check::error(name, e)],
        }
    }

    fn all_checks(&mut self, name: &str) -> Vec<Check> {
        self.checks(name, |_| true)
    }
}

fn timed(name: &str, limit: f64, f: impl FnOnce() -> Vec<Check>) -> Vec<Check> {
    let start = Instant::now();
    let mut checks = f();
    checks.push(Check::budget(format!("{name}/seconds"), start.elapsed().as_secs_f64(), limit));
    checks
}

fn c1(ctx: &mut Context) -> Vec<Check> {
    timed("oned_table", 1.0, || {
        let mut checks = ctx.all_checks("oned_table");
        let rows = ctx.outcome("oned_table").ok().and_then(|o| o.table("table1d.csv")).map_or(0, |t| t.rows.len());
        checks.push(Check::equals("oned_table/rows", rows as f64, 15.0));
        checks
    })
}

fn c2(_: &mut Context) -> Vec<Check> {
    timed("space_forms", 5.0, || {
        let mut checks = Vec::new();
        for kind in [FormName::Sphere, FormName::Euclidean, FormName::Hyperbolic] {
            for dim in 1..=3 {
                let space_form = SpaceFormParams {
                    kind,
                    dim,
                    tau: (kind == FormName::Hyperbolic).then_some(TauValue::Const(-1.0)),
                    window: None,
                };
                let name = format!("{kind:?}{dim}").to_lowercase();
                let params = Params::CurvatureCrosscheck(CurvatureCrosscheckParams { space_form, points: 50, seed: 1 });
                match run_params(&name, params) {
                    Ok(o) => checks.extend(o.checks.into_iter().map(|mut c| {
                        c.name = format!("{name}/{}", c.name);
                        c
                    })),
                    Err(e) => checks.push(Check::error(name, e.to_string())),
                }
            }
        }
        checks
    })
}

fn c3(ctx: &mut Context) -> Vec<Check> {
    let keep = |n: &str| n.starts_with("oneill/") || n.starts_with("trace/") || n == "boundary_gradient";
    ["hyperbolic_plane", "round_sphere", "cosh_circle"]
        .into_iter()
        .flat_map(|s| ctx.checks(s, keep))
        .collect()
}

fn c4(ctx: &mut Context) -> Vec<Check> {
    let keep = |n: &str| n.starts_with("lift/") && !n.ends_with("mu_spread") || n == "k_plus_2";
    ["hyperbolic_plane", "cosh_circle", "cosh_hyperbolic_line"]
        .into_iter()
        .flat_map(|s| ctx.checks(s, keep))
        .collect()
}

fn c5(ctx: &mut Context) -> Vec<Check> {
    let mut checks: Vec<Check> = ["hyperbolic_plane", "round_sphere", "cosh_circle", "cosh_hyperbolic_line"]
        .into_iter()
        .flat_map(|s| ctx.checks(s, |n| n.ends_with("mu_spread") || n == "mu_pair_spread"))
        .collect();
    checks.extend(ctx.checks("cosh_circle", |n| n.starts_with("mu_gradient/") || n == "kappa_gap"));
    checks
}

fn c6(ctx: &mut Context) -> Vec<Check> {
    let mut checks = Vec::new();
    let cases = [
        (1.0, 2.0 * std::f64::consts::PI, CoexistenceVerdict::AllPeriodic, 2),
        (0.0, 1.0, CoexistenceVerdict::OnePeriodicRay, 1),
        (-1.0, 1.0, CoexistenceVerdict::None, 0),
    ];
    for (tau, period, verdict, dim) in cases {
        let name = format!("coexistence(tau={tau})");
        guarded(&name, &mut checks, |checks| {
            let p = OdeProblem::constant_tau(tau, (0.0, period))?.with_period(period)?;
            let c = coexistence(&p)?;
            checks.push(Check::at_most(format!("{name}/det"), c.det_deviation, 1e-8));
            checks.push(Check::flag(format!("{name}/verdict"), c.verdict == verdict).with_detail(format!("{:?}", c.verdict)));
            checks.push(Check::equals(format!("{name}/dim"), c.dim_periodic as f64, dim as f64));
            Ok(())
        });
    }
    guarded("wronskian", &mut checks, |checks| {
        let p = OdeProblem::from_tau(|t| 1.0 + 0.5 * t.cos(), (0.0, 10.0))?;
        let s1 = solve_ivp(&p, 0.0, 1.0, 0.0)?;
        let s2 = solve_ivp(&p, 0.0, 0.0, 1.0)?;
        let w: Vec<f64> = uniform_grid(0.0, 10.0, 201).into_iter().map(|t| wronskian(&s1, &s2, t)).collect();
        let spread = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - w.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_most("wronskian/spread", spread, 1e-7));
        Ok(())
    });
    guarded("cosh_sinh", &mut checks, |checks| {
        let cosh = ScalarField::univariate(f64::cosh, f64::sinh, f64::cosh);
        let sinh = ScalarField::univariate(f64::sinh, f64::cosh, f64::sinh);
        let r = positive_excludes_allperiodic(&cosh, &sinh, (-2.0, 2.0))?;
        checks.push(Check::flag("cosh_sinh/ratio_monotone", r.strictly_monotone));
        checks.push(Check::above("cosh_sinh/ratio_min_slope", r.min_slope, 0.0));
        Ok(())
    });
    for pair in ["erf_pair", "cosh_pair"] {
        checks.extend(ctx.checks(pair, |n| n.starts_with("ratio_") || n == "wronskian_spread"));
    }
    checks
}

fn c7(ctx: &mut Context) -> Vec<Check> {
    let mut checks = ctx.all_checks("erf_pair");
    let seconds = ctx.seconds.get("erf_pair").copied().unwrap_or(f64::INFINITY);
    checks.push(Check::budget("erf_pair/seconds", seconds, 5.0));
    checks
}

fn c8(ctx: &mut Context) -> Vec<Check> {
    ["liealg_sphere", "liealg_euclidean", "liealg_hyperbolic"]
        .into_iter()
        .flat_map(|s| ctx.all_checks(s))
        .collect()
}

fn c9(ctx: &mut Context) -> Vec<Check> {
    ["theoremc_hyperbolic", "theoremc_erf", "theoremc_dependent", "theoremc_circle"]
        .into_iter()
        .flat_map(|s| ctx.all_checks(s))
        .collect()
}

pub const CRITERIA: &[Criterion] = &[
    Criterion { id: "C1", module: "solspace", title: "one-dimensional dimension tables", run: c1 },
    Criterion { id: "C2", module: "spaceforms", title: "space-form solution bases", run: c2 },
    Criterion { id: "C3", module: "warp", title: "warped-product curvature formulas", run: c3 },
    Criterion { id: "C4", module: "warp", title: "lift and decomposition round trip", run: c4 },
    Criterion { id: "C5", module: "warp", title: "mu-bar constancy and gradient identities", run: c5 },
    Criterion { id: "C6", module: "hill", title: "Hill equation engine", run: c6 },
    Criterion { id: "C7", module: "hill", title: "isocurved Gaussian pair", run: c7 },
    Criterion { id: "C8", module: "rigidity", title: "wedge Lie algebra and Killing fields", run: c8 },
    Criterion { id: "C9", module: "rigidity", title: "splitting classifier", run: c9 },
];

pub const AGGREGATE_ID: &str = "C10";
pub const AGGREGATE_TITLE: &str = "full suite under budget with deterministic CSV";
pub const TOTAL_BUDGET: f64 = 60.0;

impl Criterion {
    pub fn matches(&self, filter: &str) -> bool {
        matches_filter(self.id, self.module, self.title, filter)
    }
}

fn matches_filter(id: &str, module: &str, title: &str, filter: &str) -> bool {
    let f = filter.to_lowercase();
    id.eq_ignore_ascii_case(&f) || module == f || title.to_lowercase().contains(&f)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: String,
    pub module: String,
    pub title: String,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(
            f,
            "{:<4} {:<4} {:<10} {:<46} {:>3} checks, {} failed, {:.2} s",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.module,
            self.title,
            self.checks.len(),
            failed,
            self.seconds
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub results: Vec<CriterionResult>,
    pub seconds: f64,
}

impl Summary {
    pub fn passed(&self) -> bool {
        !self.results.is_empty() && self.results.iter().all(CriterionResult::passed)
    }

    pub fn get(&self, id: &str) -> Option<&CriterionResult> {
        self.results.iter().find(|r| r.id == id)
    }
}

/// Renders every table of a fresh run of `name` into one byte string.
fn rendered(name: &str) -> Result<Vec<u8>, String> {
    let s = shipped::load(name).map_err(|e| e.to_string())?;
    let o = crate::run::run(&s).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (n, t) in &o.tables {
        out.extend_from_slice(n.as_bytes());
        out.extend(t.to_bytes());
    }
    Ok(out)
}

/// Runs the criteria selected by `filter`, tightening every tolerance check
/// to `tol` when given. Criterion C10 aggregates a full, unfiltered run.
pub fn verify_all(filter: Option<&str>, tol: Option<f64>) -> Summary {
    let start = Instant::now();
    let mut ctx = Context::default();
    let mut results = Vec::new();
    for c in CRITERIA.iter().filter(|c| filter.is_none_or(|f| c.matches(f))) {
        let t0 = Instant::now();
        let mut checks = (c.run)(&mut ctx);
        if let Some(tol) = tol {
            checks.iter_mut().for_each(|ch| ch.override_tolerance(tol));
        }
        results.push(CriterionResult {
            id: c.id.into(),
            module: c.module.into(),
            title: c.title.into(),
            seconds: t0.elapsed().as_secs_f64(),
            checks,
        });
    }
    let aggregate = filter.is_none_or(|f| matches_filter(AGGREGATE_ID, "cli", AGGREGATE_TITLE, f));
    if aggregate {
        let t0 = Instant::now();
        let mut checks = Vec::new();
        if results.len() == CRITERIA.len() {
            let failing: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.id.as_str()).collect();
            checks.push(Check::flag("criteria_pass", failing.is_empty()).with_detail(if failing.is_empty() {
                "all".to_string()
            } else {
                format!("failing: {}", failing.join(", "))
            }));
        } else {
            checks.push(Check::error("criteria_pass", "C10 needs every criterion; run without a narrower filter"));
        }
        match (rendered("erf_pair"), rendered("erf_pair")) {
            (Ok(a), Ok(b)) => checks.push(Check::flag("deterministic_csv", a == b)),
            (Err(e), _) | (_, Err(e)) => checks.push(Check::error("deterministic_csv", e)),
        }
        checks.push(Check::budget("total_seconds", start.elapsed().as_secs_f64(), TOTAL_BUDGET));
        results.push(CriterionResult {
            id: AGGREGATE_ID.into(),
            module: "cli".into(),
            title: AGGREGATE_TITLE.into(),
            seconds: t0.elapsed().as_secs_f64(),
            checks,
        });
    }
    Summary { results, seconds: start.elapsed().as_secs_f64() }
}
