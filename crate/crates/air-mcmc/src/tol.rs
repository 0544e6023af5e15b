//! Centralised numerical tolerances.
//!
//! Every tolerance used by validations, cross-method checks, and audits lives
//! here so the values are pinned in one place and the tests exercise the same
//! constants as the library.

/// Residual allowed on direct linear solves (stationary law, Poisson equation).
pub const SOLVE_RESIDUAL: f64 = 1e-10;

/// Agreement required between two independent computation routes
/// (linear solve vs truncated series, simplex vs closed forms).
pub const CROSS_METHOD: f64 = 1e-8;

/// Row-sum deviation allowed on a stochastic matrix.
pub const ROW_SUM: f64 = 1e-12;

/// Residual allowed on invariance checks pi P = pi.
pub const INVARIANT_RESIDUAL: f64 = 1e-10;

/// Relative residual allowed on the martingale decomposition identity.
pub const DECOMPOSITION_IDENTITY: f64 = 1e-8;

/// Relative snap window for ceil(j^beta): a float power this close to an
/// integer is treated as exactly that integer, so platform rounding cannot
/// shift adaptation times.
pub const POWER_SNAP: f64 = 1e-9;

/// Slack allowed when asserting closed-form bounds (Poisson bound, drift
/// inequalities, duality) against exactly computed quantities.
pub const BOUND_SLACK: f64 = 1e-10;

/// Tolerance on optimal-transport certificates (dual feasibility, primal-dual gap,
/// marginal reproduction).
pub const TRANSPORT_CERTIFICATE: f64 = 1e-9;

/// Definitional round-trips of the diminishing-adaptation sequence,
/// (1-gamma_j)^{k_j} = 1 - e^{-(j+1)}.
pub const SEQUENCE_ROUND_TRIP: f64 = 1e-12;
