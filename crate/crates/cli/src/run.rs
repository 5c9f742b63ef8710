//! Executes scenarios: every kind produces a list of checks and CSV tables.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wr_core::expr::field_of_t;
use wr_core::geomkit::{curvature, DEFAULT_STEP};
use wr_core::hill::{
    build_isocurved_pair, non_isometry_witness, positive_excludes_allperiodic, uniform_grid, IsometryVerdict,
    CURVE_GRID,
};
use wr_core::rigidity::{
    bracket_wedge, classify_theorem_c, commutator_deviation, homomorphism_check, wedge_endomorphism,
    EinsteinPairSpec, TheoremCReport, TheoremCVerdict, WedgeElement,
};
use wr_core::solspace::{classify_1d, OneDProblem, QuadraticFormField, SolutionSpace};
use wr_core::spaceforms::{gram_mu, Tau};
use wr_core::warp::{
    assemble_q, build_warped, decompose, example51_family, lift_solution, mu_forms, mu_gradient_identities,
    oneill_over_grid, trace_relations, BaseSpace, BoundaryFace, WarpedProductSpec,
};

use crate::check::{guarded, Check};
use crate::scenario::{
    CurvatureCrosscheckParams, Face, IsocurvedPairParams, Kind, LieAlgParams, OneDTableParams, Params, Scenario,
    SchemaError, TheoremCParams, WarpedBuildParams, WedgeTerms,
};
use crate::table::{Cell, Table};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub kind: Kind,
    pub checks: Vec<Check>,
    pub tables: Vec<(String, Table)>,
    pub notes: Vec<String>,
    pub unused_overrides: Vec<String>,
}

impl Outcome {
    fn new(name: &str, kind: Kind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            checks: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
            unused_overrides: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn report(&self) -> Report<'_> {
        let mut artifacts: Vec<String> = self.tables.iter().map(|(n, _)| n.clone()).collect();
        artifacts.push("checks.csv".into());
        Report {
            name: &self.name,
            kind: self.kind.name(),
            passed: self.passed(),
            checks: &self.checks,
            artifacts,
            notes: &self.notes,
            unused_overrides: &self.unused_overrides,
        }
    }

    /// Writes `report.json`, `checks.csv` and the data tables into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, table) in self.tables.iter().chain(std::iter::once(&("checks.csv".to_string(), Table::of_checks(&self.checks)))) {
            let path = dir.join(name);
            std::fs::write(&path, table.to_bytes())?;
            written.push(path);
        }
        let path = dir.join("report.json");
        let mut json = serde_json::to_string_pretty(&self.report()).map_err(std::io::Error::other)?;
        json.push('\n');
        std::fs::write(&path, json)?;
        written.push(path);
        Ok(written)
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub name: &'a str,
    pub kind: &'a str,
    pub passed: bool,
    pub checks: &'a [Check],
    pub artifacts: Vec<String>,
    pub notes: &'a [String],
    pub unused_overrides: &'a [String],
}

pub fn run(s: &Scenario) -> Result<Outcome, SchemaError> {
    let mut out = run_params(&s.name, s.params()?)?;
    for (name, tol) in &s.tolerances {
        let mut used = false;
        for c in out.checks.iter_mut().filter(|c| &c.name == name) {
            c.override_tolerance(*tol);
            used = true;
        }
        if !used {
            out.unused_overrides.push(name.clone());
        }
    }
    Ok(out)
}

/// Runs already-validated parameters without tolerance overrides.
pub fn run_params(name: &str, params: Params) -> Result<Outcome, SchemaError> {
    let mut out = Outcome::new(name, params.kind());
    match params {
        Params::OneDTable(p) => one_d_table(&p, &mut out)?,
        Params::WarpedBuild(p) => warped_build(&p, &mut out)?,
        Params::IsocurvedPair(p) => isocurved_pair(&p, &mut out)?,
        Params::LieAlg(p) => liealg(&p, &mut out)?,
        Params::TheoremC(p) => theorem_c(&p, &mut out)?,
        Params::CurvatureCrosscheck(p) => curvature_crosscheck(&p, &mut out)?,
    }
    Ok(out)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn one_d_table(p: &OneDTableParams, out: &mut Outcome) -> Result<(), SchemaError> {
    let mut table = Table::new(&["domain", "tau", "a", "dim", "dim_D", "dim_N"]);
    for (i, row) in p.rows.iter().enumerate() {
        let problem = OneDProblem::with_tau(row.domain()?, row.tau.to_tau()?)?;
        let name = format!("row{i}:{}:tau={}", problem.domain.name(), row.tau.label());
        let c = match classify_1d(&problem) {
            Ok(c) => c,
            Err(e) => {
                out.checks.push(Check::error(name, e.to_string()));
                continue;
            }
        };
        table.push(vec![
            problem.domain.name().into(),
            match &row.tau {
                crate::scenario::TauValue::Const(x) => Cell::Num(*x),
                crate::scenario::TauValue::Expr(s) => s.as_str().into(),
            },
            row.a.map_or(Cell::Empty, Cell::Num),
            c.dim.into(),
            c.dim_d.into(),
            c.dim_n.into(),
        ]);
        if let Some(e) = &row.expect {
            out.checks.push(Check::equals(format!("{name}:dim"), c.dim as f64, e.dim as f64));
            for (label, got, want) in [("dim_D", c.dim_d, e.dim_d), ("dim_N", c.dim_n, e.dim_n)] {
                match (got, want) {
                    (None, None) => {}
                    (Some(g), Some(w)) => out.checks.push(Check::equals(format!("{name}:{label}"), g as f64, w as f64)),
                    _ => out.checks.push(Check::error(
                        format!("{name}:{label}"),
                        format!("computed {got:?}, expected {want:?}"),
                    )),
                }
            }
        }
    }
    out.tables.push(("table1d.csv".into(), table));
    Ok(())
}

fn curvature_crosscheck(p: &CurvatureCrosscheckParams, out: &mut Outcome) -> Result<(), SchemaError> {
    let model = p.space_form.model()?;
    let k = model.k();
    let points = model.sample(p.points, p.seed);
    let mut table = Table::new(&["label", "analytic_residual", "fd_residual"]);
    for (v, label) in model.basis.iter().zip(&model.labels) {
        let mut analytic = 0.0f64;
        let mut fd = 0.0f64;
        let fd_field = v.value_only();
        guarded(&format!("{label}/residual"), &mut out.checks, |_| {
            for x in &points {
                analytic = analytic.max(model.residual(v, x, DEFAULT_STEP)?);
                fd = fd.max(model.residual(&fd_field, x, DEFAULT_STEP)?);
            }
            Ok(())
        });
        table.push(vec![label.as_str().into(), analytic.into(), fd.into()]);
        out.checks.push(Check::at_most(format!("{label}/analytic_residual"), analytic, 1e-7));
        out.checks.push(Check::at_most(format!("{label}/fd_residual"), fd, 1e-4));
    }
    let space = SolutionSpace::new(
        QuadraticFormField::from_tau(model.metric.clone(), &model.spec.tau),
        model.basis.clone(),
        model.labels.clone(),
    );
    guarded("evaluation_rank", &mut out.checks, |checks| {
        let mut min_rank = usize::MAX;
        for x in &points {
            min_rank = min_rank.min(space.evaluation_rank(x)?);
        }
        checks.push(Check::equals("evaluation_rank", min_rank as f64, (k + 1) as f64));
        Ok(())
    });
    if let (true, Tau::Const(tau)) = (k >= 2, &model.spec.tau) {
        guarded("constant_curvature", &mut out.checks, |checks| {
            let mut dev = 0.0f64;
            for x in points.iter().take(10) {
                dev = dev.max(curvature(&model.metric, x, DEFAULT_STEP)?.constant_curvature_deviation(*tau));
            }
            checks.push(Check::at_most("constant_curvature", dev, 1e-4));
            Ok(())
        });
    }
    out.tables.push(("residuals.csv".into(), table));
    Ok(())
}

fn build_base(p: &WarpedBuildParams) -> Result<BaseSpace, SchemaError> {
    let u = field_of_t(&p.base.u)?;
    let [lo, hi] = p.base.interval;
    let mut base = BaseSpace::interval(lo, hi, u)?;
    for face in &p.base.boundary {
        base = base.with_boundary(BoundaryFace {
            axis: 0,
            upper: *face == Face::Upper,
        })?;
    }
    Ok(base)
}

fn warped_grid(wp: &WarpedProductSpec, p: &WarpedBuildParams) -> Vec<Vec<f64>> {
    match &p.grid {
        Some(g) => wp.grid(g.base, g.fiber),
        None => wp.default_grid(),
    }
}

fn warped_build(p: &WarpedBuildParams, out: &mut Outcome) -> Result<(), SchemaError> {
    let base = build_base(p)?;
    let fiber = p.fiber.model()?;
    let tau_const = fiber.spec.tau_const();
    let wp = match build_warped(base, fiber) {
        Ok(wp) => wp,
        Err(e) => {
            out.checks.push(Check::error("build", e.to_string()));
            return Ok(());
        }
    };
    let grid = warped_grid(&wp, p);
    out.notes.push(format!("{} grid points, metric {}", grid.len(), wp.total_metric.name()));
    let n = wp.n();
    let base_pts: Vec<Vec<f64>> = wp.base.grid(17);
    let fiber_pts = wp.fiber.grid(9);
    let q_space = SolutionSpace::new(assemble_q(&wp), vec![], vec![]);

    let mut lifts = Table::new(&["label", "residual", "gauge_z", "v_error", "mu_mean", "mu_spread"]);
    let mut lifted = Vec::new();
    for (v, label) in wp.fiber.basis.iter().zip(&wp.fiber.labels) {
        let name = format!("lift/{label}");
        guarded(&name, &mut out.checks, |checks| {
            let w = lift_solution(&wp, v, &grid)?;
            let residual = q_space.residual(&w, &grid, DEFAULT_STEP)?;
            let d = decompose(&wp, &w, &grid, 1e-8)?;
            let gauge_z = max_of(base_pts.iter().map(|b| d.z.value(b).abs()));
            let v_error = max_of(fiber_pts.iter().map(|y| (d.v.value(y) - v.value(y)).abs()));
            let mu = mu_forms(&wp, &w, &w, &grid)?;
            let mean = mu.mu_w1.iter().sum::<f64>() / mu.mu_w1.len().max(1) as f64;
            lifts.push(vec![
                label.as_str().into(),
                residual.into(),
                gauge_z.into(),
                v_error.into(),
                mean.into(),
                mu.spread_w1.into(),
            ]);
            checks.push(Check::at_most(format!("{name}/residual"), residual, 1e-6));
            checks.push(Check::at_most(format!("{name}/gauge_z"), gauge_z, 1e-8));
            checks.push(Check::at_most(format!("{name}/v_recovery"), v_error, 1e-8));
            if tau_const.is_some() {
                checks.push(Check::at_most(format!("{name}/mu_spread"), mu.spread_w1, 1e-6));
            }
            lifted.push(w);
            Ok(())
        });
    }
    if tau_const.is_some() && lifted.len() >= 2 {
        guarded("mu_pair_spread", &mut out.checks, |checks| {
            let mu = mu_forms(&wp, &lifted[0], &lifted[1], &grid)?;
            checks.push(Check::at_most("mu_pair_spread", mu.spread_w1_w2, 1e-6));
            Ok(())
        });
    }

    guarded("oneill", &mut out.checks, |checks| {
        let r = oneill_over_grid(&wp, &grid)?;
        for (name, v) in [
            ("ricci_horizontal", r.ricci_horizontal),
            ("ricci_vertical", r.ricci_vertical),
            ("ricci_mixed", r.ricci_mixed),
            ("vertical_hessian_u", r.vertical_hessian_u),
            ("scalar", r.scalar),
            ("rho", r.rho),
        ] {
            checks.push(Check::at_most(format!("oneill/{name}"), v, 1e-4));
        }
        Ok(())
    });
    guarded("trace", &mut out.checks, |checks| {
        let r = trace_relations(&wp, &grid)?;
        checks.push(Check::at_most("trace/base", r.base_trace, 1e-6));
        checks.push(Check::at_most("trace/relation", r.relation, 1e-6));
        Ok(())
    });
    if !wp.base.boundary.is_empty() {
        guarded("boundary_gradient", &mut out.checks, |checks| {
            let dev = wp.base.boundary_gradient_deviation(1)?;
            checks.push(Check::at_most("boundary_gradient", dev, 1e-6));
            Ok(())
        });
    }
    if let Some(expect) = p.expect_k_plus_2 {
        guarded("k_plus_2", &mut out.checks, |checks| {
            let ex = example51_family(wp.base.u.clone(), wp.fiber.clone(), (p.base.interval[0], p.base.interval[1]))?;
            checks.push(
                Check::flag("k_plus_2", ex.k_plus_2_condition == expect)
                    .with_detail(format!("deviation {:.3e}, expected {expect}", ex.k_plus_2_deviation)),
            );
            Ok(())
        });
    }
    if let Some(src) = &p.z {
        let z = field_of_t(src)?;
        guarded("mu_gradient", &mut out.checks, |checks| {
            let r = mu_gradient_identities(&wp, &z, &grid)?;
            checks.push(Check::at_most("mu_gradient/lift", r.lift_identity, 1e-6));
            checks.push(Check::at_most("mu_gradient/mixed", r.mixed_identity, 1e-6));
            checks.push(Check::at_most("mu_gradient/square", r.square_identity, 1e-6));
            if let Some(bound) = p.expect_kappa_gap_above {
                checks.push(Check::above("kappa_gap", r.kappa_gap, bound));
            }
            Ok(())
        });
    }

    let mut profile = Table::new(&["t", "u", "kappa", "rho"]);
    let y0 = wp.fiber.metric.chart().center();
    for b in wp.base.grid(33) {
        let x = [&b[..n], &y0[..]].concat();
        let rho = wp.rho(&x).unwrap_or(f64::NAN);
        profile.push(vec![b[0].into(), wp.base.u.value(&b).into(), wp.kappa_at(&x).into(), rho.into()]);
    }
    out.tables.push(("lifts.csv".into(), lifts));
    out.tables.push(("profile.csv".into(), profile));
    Ok(())
}

fn isocurved_pair(p: &IsocurvedPairParams, out: &mut Outcome) -> Result<(), SchemaError> {
    let v1 = field_of_t(&p.v1)?;
    let expect_tau = p.expect_tau.as_deref().map(field_of_t).transpose()?;
    let window = (p.window[0], p.window[1]);
    let pair = match build_isocurved_pair(&v1, p.c2, window, p.tail_bound) {
        Ok(pair) => pair,
        Err(e) => {
            out.checks.push(Check::error("build", e.to_string()));
            return Ok(());
        }
    };
    if pair.positivity.window_only {
        out.notes.push(format!(
            "u(-inf) >= 0 checked on the window only: u({}) = {}",
            window.0, pair.positivity.u_left
        ));
    }
    let ts = uniform_grid(window.0, window.1, CURVE_GRID);
    let mut curve = Table::new(&["t", "tau", "v1", "v2", "wronskian"]);
    let mut shared = 0.0f64;
    let mut expected = 0.0f64;
    let mut w = Vec::with_capacity(ts.len());
    for &t in &ts {
        let tau = pair.tau(t);
        shared = shared.max((tau - pair.tau2(t)).abs());
        if let Some(e) = &expect_tau {
            expected = expected.max((tau - e.value(&[t])).abs());
        }
        let wr = pair.wronskian(t);
        w.push(wr);
        curve.push(vec![t.into(), tau.into(), pair.v1.value(&[t]).into(), pair.v2.value(&[t]).into(), wr.into()]);
    }
    out.checks.push(Check::at_most("tau_shared", shared, 1e-6));
    if expect_tau.is_some() {
        out.checks.push(Check::at_most("tau_closed_form", expected, 1e-6));
    }
    let spread = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - w.iter().cloned().fold(f64::INFINITY, f64::min);
    out.checks.push(Check::at_most("wronskian_spread", spread, 1e-7));
    if let Some(c) = p.expect_wronskian {
        out.checks.push(Check::at_most("wronskian_value", max_of(w.iter().map(|x| (x - c).abs())), 1e-7));
    }

    guarded("gauss_fd", &mut out.checks, |checks| {
        let mut dev = 0.0f64;
        for t in uniform_grid(window.0 + 0.05, window.1 - 0.05, 41) {
            for which in [1, 2] {
                let c = curvature(&pair.metric(which), &[t, 0.0], DEFAULT_STEP)?;
                dev = dev.max((c.sectional(0, 1) - pair.tau(t)).abs());
            }
        }
        checks.push(Check::at_most("gauss_fd", dev, 1e-4));
        Ok(())
    });
    guarded("ratio_monotone", &mut out.checks, |checks| {
        let r = positive_excludes_allperiodic(&pair.v1, &pair.v2, window)?;
        checks.push(Check::flag("ratio_monotone", r.strictly_monotone));
        checks.push(Check::above("ratio_min_slope", r.min_slope, 0.0));
        Ok(())
    });
    let witness = non_isometry_witness(&pair);
    let not_isometric = witness.verdict == IsometryVerdict::NotIsometric;
    out.notes.push(format!(
        "witness: {:?} on {:?}, log-derivative gap in [{:.6e}, {:.6e}]",
        witness.verdict, witness.monotone_window, witness.min_gap, witness.max_gap
    ));
    if let Some(expect) = p.expect_not_isometric {
        out.checks.push(
            Check::flag("isometry_witness", not_isometric == expect)
                .with_detail(format!("not isometric: {not_isometric}, expected {expect}")),
        );
    }
    out.tables.push(("curve.csv".into(), curve));
    Ok(())
}

fn wedge(terms: &WedgeTerms, dim: usize) -> Result<WedgeElement, SchemaError> {
    let mut z = WedgeElement::zero();
    for &(c, i, j) in terms {
        if i >= dim || j >= dim {
            return Err(SchemaError::Invalid(format!("wedge index ({i}, {j}) outside a basis of size {dim}")));
        }
        z.add_term(c, i, j);
    }
    Ok(z)
}

fn random_wedge(rng: &mut ChaCha8Rng, dim: usize) -> WedgeElement {
    let mut z = WedgeElement::zero();
    for i in 0..dim {
        for j in i + 1..dim {
            z.add_term(rng.random_range(-1.0..1.0), i, j);
        }
    }
    z
}

fn liealg(p: &LieAlgParams, out: &mut Outcome) -> Result<(), SchemaError> {
    let model = p.space_form.model()?;
    let gram = match gram_mu(&model) {
        Ok(g) => g.matrix,
        Err(e) => {
            out.checks.push(Check::error("gram", e.to_string()));
            return Ok(());
        }
    };
    let dim = model.basis.len();
    let mut explicit = Vec::new();
    for pair in &p.pairs {
        let expect = pair.expect.as_ref().map(|e| wedge(e, dim)).transpose()?;
        explicit.push((wedge(&pair.z1, dim)?, wedge(&pair.z2, dim)?, expect));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let random: Vec<(WedgeElement, WedgeElement)> =
        (0..p.random).map(|_| (random_wedge(&mut rng, dim), random_wedge(&mut rng, dim))).collect();
    let points = model.sample(p.points, p.seed);

    let mut table = Table::new(&["z1", "z2", "z3", "antisymmetry", "commutator", "homomorphism"]);
    let mut antisym = 0.0f64;
    let mut comm = 0.0f64;
    let mut hom = 0.0f64;
    let mut golden = 0.0f64;
    let mut injective = f64::INFINITY;
    let n_hom = explicit.len() + random.len().min(5);
    let all: Vec<(&WedgeElement, &WedgeElement)> =
        explicit.iter().map(|(a, b, _)| (a, b)).chain(random.iter().map(|(a, b)| (a, b))).collect();
    guarded("brackets", &mut out.checks, |_| {
        for (idx, (z1, z2)) in all.iter().enumerate() {
            let z3 = bracket_wedge(&gram, z1, z2)?;
            let l1 = wedge_endomorphism(&gram, z1)?;
            let a = l1.antisymmetry_residual(&gram);
            let c = commutator_deviation(&gram, z1, z2)?;
            if !z1.is_zero() {
                injective = injective.min(l1.matrix.abs().max());
            }
            let h = if idx < n_hom {
                homomorphism_check(&model.metric, &model.basis, &gram, z1, z2, &points)?
            } else {
                f64::NAN
            };
            if let Some((_, _, Some(e))) = explicit.get(idx) {
                golden = golden.max(z3.add(&e.scale(-1.0)).max_abs());
            }
            antisym = antisym.max(a);
            comm = comm.max(c);
            if h.is_finite() {
                hom = hom.max(h);
            }
            table.push(vec![
                z1.to_string().into(),
                z2.to_string().into(),
                z3.to_string().into(),
                a.into(),
                c.into(),
                if h.is_finite() { h.into() } else { Cell::Empty },
            ]);
        }
        Ok(())
    });
    out.checks.push(Check::at_most("antisymmetry", antisym, 1e-12));
    out.checks.push(Check::at_most("commutator", comm, 1e-10));
    out.checks.push(Check::at_most("homomorphism", hom, 1e-5));
    if explicit.iter().any(|(_, _, e)| e.is_some()) {
        out.checks.push(Check::at_most("golden_brackets", golden, 1e-12));
    }
    if injective.is_finite() {
        out.checks.push(Check::above("injectivity", injective, 1e-9));
    }
    if p.random > 0 {
        guarded("jacobi", &mut out.checks, |checks| {
            let b = |x: &WedgeElement, y: &WedgeElement| bracket_wedge(&gram, x, y);
            let mut worst = 0.0f64;
            for _ in 0..p.random {
                let (x, y, z) = (random_wedge(&mut rng, dim), random_wedge(&mut rng, dim), random_wedge(&mut rng, dim));
                let cyc = b(&b(&x, &y)?, &z)?.add(&b(&b(&y, &z)?, &x)?).add(&b(&b(&z, &x)?, &y)?);
                worst = worst.max(cyc.max_abs());
            }
            checks.push(Check::at_most("jacobi", worst, 1e-10));
            Ok(())
        });
    }
    let mut gram_table = Table::new(&(0..dim).map(|i| format!("e{i}")).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..dim {
        gram_table.push((0..dim).map(|j| Cell::Num(gram[(i, j)])).collect());
    }
    out.tables.push(("brackets.csv".into(), table));
    out.tables.push(("gram.csv".into(), gram_table));
    Ok(())
}

/// Runs the classifier on a pair and on its swap.
pub fn theorem_c_reports(p: &TheoremCParams) -> Result<wr_core::Result<(TheoremCReport, TheoremCReport)>, SchemaError> {
    if p.d == 0 {
        return Err(SchemaError::Invalid("fiber dimension d must be at least 1".into()));
    }
    let (m, w1, w2) = p.fields()?;
    let mut spec = EinsteinPairSpec::new(m, w1, w2, p.d, p.kappa1, p.kappa2)?;
    if let Some(margin) = p.margin {
        spec = spec.with_margin(margin);
    }
    Ok(classify_theorem_c(&spec).and_then(|a| Ok((a, classify_theorem_c(&spec.swapped())?))))
}

fn verdict_row(side: &str, r: &TheoremCReport) -> Vec<Cell> {
    let (stage, flagged, reason) = match &r.verdict {
        TheoremCVerdict::HypothesisFailed { stage, flagged, reason } => (stage.clone(), *flagged, reason.clone()),
        _ => (String::new(), false, String::new()),
    };
    let (lo, hi) = r.tau.map_or((Cell::Empty, Cell::Empty), |(a, b)| (a.into(), b.into()));
    vec![
        side.into(),
        r.verdict.kind().into(),
        stage.into(),
        flagged.into(),
        r.k.into(),
        lo,
        hi,
        r.ricci_deviation.into(),
        reason.into(),
    ]
}

fn theorem_c(p: &TheoremCParams, out: &mut Outcome) -> Result<(), SchemaError> {
    let (a, b) = match theorem_c_reports(p)? {
        Ok(r) => r,
        Err(e) => {
            out.checks.push(Check::error("classify", e.to_string()));
            return Ok(());
        }
    };
    let mut table = Table::new(&["side", "verdict", "stage", "flagged", "k", "tau_min", "tau_max", "ricci_deviation", "reason"]);
    table.push(verdict_row("original", &a));
    table.push(verdict_row("swapped", &b));
    out.checks.push(
        Check::flag("swap_symmetric", a.verdict.kind() == b.verdict.kind())
            .with_detail(format!("{} / {}", a.verdict.kind(), b.verdict.kind())),
    );
    if let Some(e) = &p.expect {
        out.checks.push(Check::flag("verdict", a.verdict.kind() == e).with_detail(a.verdict.kind()));
    }
    if p.base.is_compact() {
        out.checks.push(Check::flag(
            "compact_not_exceptional",
            a.verdict.kind() != "ExceptionalSurfacePair" && b.verdict.kind() != "ExceptionalSurfacePair",
        ));
    }
    for (side, r) in [("original", &a), ("swapped", &b)] {
        match &r.verdict {
            TheoremCVerdict::HypothesisFailed { stage, flagged, .. } => {
                if let Some(s) = &p.expect_stage {
                    out.checks.push(Check::flag(format!("{side}/stage"), stage == s).with_detail(stage.clone()));
                }
                if let Some(f) = p.expect_flagged {
                    out.checks.push(Check::flag(format!("{side}/flagged"), *flagged == f));
                }
            }
            TheoremCVerdict::Isometric { certificates, .. } => {
                for (i, c) in certificates.iter().enumerate() {
                    out.checks.push(Check::at_most(format!("{side}/E{}_spread", i + 1), c.spread, 1e-4));
                    if let Some(k) = p.expect_curvature {
                        out.checks.push(Check::at_most(format!("{side}/E{}_curvature", i + 1), (c.mean - k).abs(), 1e-4));
                    }
                }
            }
            TheoremCVerdict::ExceptionalSurfacePair { witness } => {
                out.notes.push(format!(
                    "{side}: log-derivative gap in [{:.6e}, {:.6e}], Wronskian {:.12}",
                    witness.min_gap, witness.max_gap, witness.wronskian_mean
                ));
            }
        }
    }
    out.tables.push(("theoremc.csv".into(), table));
    Ok(())
}

/// Solution of `w″ = −τ(t) w` sampled on a uniform grid.
pub fn ode_table(tau: &str, span: (f64, f64), w0: f64, dw0: f64, samples: usize) -> Result<Table, SchemaError> {
    let tau = crate::scenario::TauValue::Expr(tau.to_string()).to_tau()?;
    let f = match tau {
        Tau::Function(f) => f,
        Tau::Const(_) => unreachable!(),
    };
    let problem = wr_core::hill::OdeProblem::from_arc(std::sync::Arc::new(move |t| -f(t)), span)?;
    let sol = wr_core::hill::solve_ivp(&problem, span.0, w0, dw0)?;
    let mut t = Table::new(&["t", "w", "dw"]);
    for s in uniform_grid(span.0, span.1, samples.max(2)) {
        t.push(vec![s.into(), sol.value(s).into(), sol.derivative(s).into()]);
    }
    Ok(t)
}
