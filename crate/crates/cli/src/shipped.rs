//! Scenario files shipped in `scenarios/`, embedded at build time.

use crate::scenario::{Scenario, SchemaError};

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        pub const SCENARIOS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../scenarios/", $name, ".json")))),*
        ];
    };
}

shipped!(
    "oned_table",
    "obata_sphere",
    "hyperbolic_plane",
    "round_sphere",
    "cosh_circle",
    "cosh_hyperbolic_line",
    "erf_pair",
    "cosh_pair",
    "liealg_sphere",
    "liealg_euclidean",
    "liealg_hyperbolic",
    "theoremc_hyperbolic",
    "theoremc_erf",
    "theoremc_dependent",
    "theoremc_circle",
    "theoremc_einstein",
);

pub fn source(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<Scenario, SchemaError> {
    let src = source(name).ok_or_else(|| SchemaError::Invalid(format!("no shipped scenario named {name}")))?;
    Scenario::from_json(src)
}
