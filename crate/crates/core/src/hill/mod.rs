//! Linear second-order ODEs `w″ = Θ(t) w`: integration, Wronskians, period
//! maps and warping-profile pairs with equal curvature.

mod floquet;
mod ode;
mod quad;
mod surfaces;

pub use floquet::{
    coexistence, coexistence_from, monodromy, monodromy_options, wronskian, Coexistence,
    CoexistenceVerdict, PERIODIC_TOL,
};
pub use ode::{solve_ivp, solve_ivp_with, OdeOptions, OdeProblem, OdeSolution, Theta};
pub use quad::{integrate, quad};
pub use surfaces::{
    build_isocurved_pair, gaussian_profile, gaussian_tail, non_isometry_witness,
    positive_excludes_allperiodic, profile_wronskian, uniform_grid, IsometryVerdict,
    NonIsometryReport, PositivityCheck, RatioWitness, SurfacePair, CURVE_GRID,
};
