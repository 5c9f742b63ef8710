//! Scenario files: JSON descriptions of one verification run.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wr_core::expr::parse;
use wr_core::geomkit::{Chart, Interval, MetricChart, ScalarField};
use wr_core::solspace::Domain1D;
use wr_core::spaceforms::{make_space_form, SpaceFormModel, SpaceFormSpec, Tau, DEFAULT_WINDOW};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid parameters for kind {kind}: {message}")]
    Parameters { kind: Kind, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl From<wr_core::Error> for SchemaError {
    fn from(e: wr_core::Error) -> Self {
        SchemaError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    #[serde(rename = "oneD_table")]
    OneDTable,
    #[serde(rename = "warped_build")]
    WarpedBuild,
    #[serde(rename = "isocurved_pair")]
    IsocurvedPair,
    #[serde(rename = "liealg")]
    LieAlg,
    #[serde(rename = "theoremC")]
    TheoremC,
    #[serde(rename = "curvature_crosscheck")]
    CurvatureCrosscheck,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::OneDTable,
        Kind::WarpedBuild,
        Kind::IsocurvedPair,
        Kind::LieAlg,
        Kind::TheoremC,
        Kind::CurvatureCrosscheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::OneDTable => "oneD_table",
            Kind::WarpedBuild => "warped_build",
            Kind::IsocurvedPair => "isocurved_pair",
            Kind::LieAlg => "liealg",
            Kind::TheoremC => "theoremC",
            Kind::CurvatureCrosscheck => "curvature_crosscheck",
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub description: Option<String>,
    pub parameters: serde_json::Value,
    /// Replacement limits for tolerance checks, keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl Scenario {
    pub fn from_json(src: &str) -> Result<Self, SchemaError> {
        let s: Scenario = serde_json::from_str(src)?;
        if s.name.trim().is_empty() {
            return Err(SchemaError::Invalid("scenario name must not be empty".into()));
        }
        for (k, v) in &s.tolerances {
            if !(v.is_finite() && *v > 0.0) {
                return Err(SchemaError::Invalid(format!("tolerance {k} must be a positive number, got {v}")));
            }
        }
        s.params()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let src = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&src)
    }

    fn typed<T: DeserializeOwned>(&self) -> Result<T, SchemaError> {
        serde_json::from_value(self.parameters.clone()).map_err(|e| SchemaError::Parameters {
            kind: self.kind,
            message: e.to_string(),
        })
    }

    pub fn params(&self) -> Result<Params, SchemaError> {
        Ok(match self.kind {
            Kind::OneDTable => Params::OneDTable(self.typed()?),
            Kind::WarpedBuild => Params::WarpedBuild(self.typed()?),
            Kind::IsocurvedPair => Params::IsocurvedPair(self.typed()?),
            Kind::LieAlg => Params::LieAlg(self.typed()?),
            Kind::TheoremC => Params::TheoremC(self.typed()?),
            Kind::CurvatureCrosscheck => Params::CurvatureCrosscheck(self.typed()?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum Params {
    OneDTable(OneDTableParams),
    WarpedBuild(WarpedBuildParams),
    IsocurvedPair(IsocurvedPairParams),
    LieAlg(LieAlgParams),
    TheoremC(TheoremCParams),
    CurvatureCrosscheck(CurvatureCrosscheckParams),
}

impl Params {
    pub fn kind(&self) -> Kind {
        match self {
            Params::OneDTable(_) => Kind::OneDTable,
            Params::WarpedBuild(_) => Kind::WarpedBuild,
            Params::IsocurvedPair(_) => Kind::IsocurvedPair,
            Params::LieAlg(_) => Kind::LieAlg,
            Params::TheoremC(_) => Kind::TheoremC,
            Params::CurvatureCrosscheck(_) => Kind::CurvatureCrosscheck,
        }
    }
}

/// A constant or an expression in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauValue {
    Const(f64),
    Expr(String),
}

impl TauValue {
    pub fn to_tau(&self) -> Result<Tau, SchemaError> {
        Ok(match self {
            TauValue::Const(c) => Tau::Const(*c),
            TauValue::Expr(src) => Tau::Function(parse(src, &["t"])?.to_fn1()?),
        })
    }

    pub fn label(&self) -> String {
        match self {
            TauValue::Const(c) => format!("{c}"),
            TauValue::Expr(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormName {
    Sphere,
    Euclidean,
    Hyperbolic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFormParams {
    pub kind: FormName,
    pub dim: usize,
    /// Curvature; fixed for the sphere (1) and euclidean space (0), default
    /// −1 for hyperbolic space. An expression in `t` gives a line with
    /// variable `τ` (euclidean, dim 1).
    #[serde(default)]
    pub tau: Option<TauValue>,
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

impl SpaceFormParams {
    pub fn spec(&self) -> Result<SpaceFormSpec, SchemaError> {
        let mut spec = match (self.kind, &self.tau) {
            (FormName::Sphere, _) => SpaceFormSpec::sphere(self.dim),
            (FormName::Euclidean, _) => SpaceFormSpec::euclidean(self.dim),
            (FormName::Hyperbolic, None) => SpaceFormSpec::hyperbolic(self.dim, -1.0),
            (FormName::Hyperbolic, Some(TauValue::Const(c))) => SpaceFormSpec::hyperbolic(self.dim, *c),
            (FormName::Hyperbolic, Some(TauValue::Expr(_))) => {
                return Err(SchemaError::Invalid("a variable tau needs kind euclidean".into()))
            }
        };
        if let Some(t) = &self.tau {
            spec.tau = t.to_tau()?;
        }
        spec.window = self.window.map_or(DEFAULT_WINDOW, |w| (w[0], w[1]));
        spec.validate()?;
        Ok(spec)
    }

    pub fn model(&self) -> Result<SpaceFormModel, SchemaError> {
        Ok(make_space_form(self.spec()?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    Line,
    Circle,
    HalfLine,
    Interval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectDims {
    pub dim: usize,
    #[serde(default)]
    pub dim_d: Option<usize>,
    #[serde(default)]
    pub dim_n: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneDRow {
    pub domain: DomainName,
    pub tau: TauValue,
    /// Circle radius, or `a` in the interval `[0, 2πa]`.
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub expect: Option<ExpectDims>,
}

impl OneDRow {
    pub fn domain(&self) -> Result<Domain1D, SchemaError> {
        let a = || {
            self.a
                .ok_or_else(|| SchemaError::Invalid(format!("domain {:?} needs a", self.domain)))
        };
        Ok(match self.domain {
            DomainName::Line => Domain1D::Line,
            DomainName::HalfLine => Domain1D::HalfLine,
            DomainName::Circle => Domain1D::Circle { radius: a()? },
            DomainName::Interval => Domain1D::Interval { length: 2.0 * PI * a()? },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneDTableParams {
    pub rows: Vec<OneDRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseParams {
    pub interval: [f64; 2],
    /// Warping function, an expression in `t`.
    pub u: String,
    #[serde(default)]
    pub boundary: Vec<Face>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub base: usize,
    pub fiber: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedBuildParams {
    pub base: BaseParams,
    pub fiber: SpaceFormParams,
    #[serde(default)]
    pub grid: Option<GridParams>,
    /// A second base solution in `t` for the gradient identities.
    #[serde(default)]
    pub z: Option<String>,
    /// Expected outcome of the `dim W = k + 2` criterion.
    #[serde(default)]
    pub expect_k_plus_2: Option<bool>,
    /// Lower bound expected for `max |κ − κ_B|`.
    #[serde(default)]
    pub expect_kappa_gap_above: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsocurvedPairParams {
    /// Positive profile, an expression in `t`.
    pub v1: String,
    pub c2: f64,
    pub window: [f64; 2],
    #[serde(default)]
    pub tail_bound: Option<f64>,
    /// Closed form expected for the shared curvature, in `t`.
    #[serde(default)]
    pub expect_tau: Option<String>,
    #[serde(default)]
    pub expect_wronskian: Option<f64>,
    #[serde(default)]
    pub expect_not_isometric: Option<bool>,
}

/// `[coefficient, i, j]` triples.
pub type WedgeTerms = Vec<(f64, usize, usize)>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WedgePair {
    pub z1: WedgeTerms,
    pub z2: WedgeTerms,
    /// Golden value of the bracket.
    #[serde(default)]
    pub expect: Option<WedgeTerms>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LieAlgParams {
    pub space_form: SpaceFormParams,
    #[serde(default)]
    pub pairs: Vec<WedgePair>,
    /// Number of random wedge pairs (and triples for the Jacobi identity).
    #[serde(default)]
    pub random: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Sample points for the vector-field homomorphism check.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_seed() -> u64 {
    1
}

fn default_points() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairBase {
    #[serde(default)]
    pub interval: Option<[f64; 2]>,
    /// Radius of a circle, coordinate `t ∈ [0, 2πr)`.
    #[serde(default)]
    pub circle: Option<f64>,
    #[serde(default)]
    pub space_form: Option<SpaceFormParams>,
}

impl PairBase {
    /// The metric and the names of its coordinates.
    pub fn metric(&self) -> Result<(MetricChart, Vec<String>), SchemaError> {
        match (&self.interval, &self.circle, &self.space_form) {
            (Some([lo, hi]), None, None) => {
                let chart = Chart::new(vec![Interval::closed(*lo, *hi)])?;
                Ok((MetricChart::euclidean(chart), vec!["t".into()]))
            }
            (None, Some(r), None) => {
                if !(*r > 0.0) {
                    return Err(SchemaError::Invalid(format!("circle radius must be positive, got {r}")));
                }
                let period = 2.0 * PI * r;
                let chart = Chart::cube(1, 0.0, period)?.with_period(0, period)?;
                Ok((MetricChart::euclidean(chart), vec!["t".into()]))
            }
            (None, None, Some(sf)) => {
                let m = sf.model()?;
                let vars = m.variables();
                Ok((m.metric, vars))
            }
            _ => Err(SchemaError::Invalid(
                "base needs exactly one of interval, circle, space_form".into(),
            )),
        }
    }

    pub fn is_compact(&self) -> bool {
        self.circle.is_some()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremCParams {
    pub base: PairBase,
    /// Warping functions in the base coordinates.
    pub w1: String,
    pub w2: String,
    pub d: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    #[serde(default)]
    pub margin: Option<f64>,
    /// Expected verdict: `Isometric`, `ExceptionalSurfacePair` or `HypothesisFailed`.
    #[serde(default)]
    pub expect: Option<String>,
    #[serde(default)]
    pub expect_stage: Option<String>,
    #[serde(default)]
    pub expect_flagged: Option<bool>,
    /// Curvature expected for both total spaces in the isometric case.
    #[serde(default)]
    pub expect_curvature: Option<f64>,
}

impl TheoremCParams {
    pub fn fields(&self) -> Result<(MetricChart, ScalarField, ScalarField), SchemaError> {
        let (m, vars) = self.base.metric()?;
        let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
        let w1 = parse(&self.w1, &vars)?.to_field(vars.len())?;
        let w2 = parse(&self.w2, &vars)?.to_field(vars.len())?;
        Ok((m, w1, w2))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureCrosscheckParams {
    pub space_form: SpaceFormParams,
    #[serde(default = "default_sample")]
    pub points: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_sample() -> usize {
    50
}
