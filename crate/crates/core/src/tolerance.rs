//! Default numeric thresholds for all residual checks.

/// Jacobi, Casimir, Poisson-map and involution residuals.
pub const RESIDUAL: f64 = 1e-9;

/// Pointwise identities between two closed-form expressions.
pub const IDENTITY: f64 = 1e-10;

/// Agreement with a printed vector field, chart formulas and stationary states.
pub const EXACT: f64 = 1e-12;

/// Pullback/bracket commutation for accepted Poisson maps.
pub const PULLBACK_COMMUTATION: f64 = 1e-8;

/// Relative pivot threshold for numerical rank.
pub const RANK_RELATIVE: f64 = 1e-8;

/// Relative drift of first integrals along a trajectory.
pub const DRIFT: f64 = 1e-6;

/// Relative drift of the Hamiltonian along its own flow (t = 10, h = 1e-3).
pub const ENERGY_DRIFT: f64 = 1e-8;

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// RKF45 defaults.
pub const RKF45_RTOL: f64 = 1e-9;
pub const RKF45_ATOL: f64 = 1e-12;
