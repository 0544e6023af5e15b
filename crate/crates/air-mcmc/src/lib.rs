//! Adaptive increasingly rare (AIR) Markov chain Monte Carlo: schedules,
//! kernel families, adaptation rules, an exact finite-state analysis engine,
//! and a replication harness for the strong-law and rate guarantees.
//!
//! An AIR chain adapts only at the deterministic times Tₘ = Σ_{j≤m} ⌈j^β⌉,
//! so adaptations become increasingly rare at rate controlled by β > 0. The
//! crate exposes each layer separately:
//!
//! * [`schedule`]: adaptation times, window lookups, growth envelopes.
//! * [`geometry`]: states, distance-like functions, Lipschitz machinery.
//! * [`kernels`]: parametrised transition kernel families with exact laws.
//! * [`adaptation`]: update rules, window statistics, the stuck-chain
//!   counterexample, and the waning-adaptation statistic.
//! * [`analysis`]: exact transport values, contraction coefficients,
//!   Poisson-equation solutions, and drift/minorisation audits.
//! * [`decomposition`]: the martingale + remainder + boundary decomposition
//!   of partial sums, checked against the exact analysis layer.
//! * [`runner`]: seeded simulation, replication, rate certification, and
//!   theorem admissibility sweeps.

pub mod adaptation;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod report;
pub mod runner;
pub mod schedule;
pub mod tol;

pub use adaptation::{
    apply_update, counterexample_gamma, counterexample_rule, counterexample_window_gamma,
    waning_statistic, Adaptor, ParamBox, UpdateRule, WindowStats,
};
pub use analysis::{
    contraction_coefficient, duality_gap, eccentricities, eccentricity, find_family_contraction,
    fit_drift, lyapunov_audit, max_eccentricity, minorisation_audit, poisson_bound_check,
    poisson_series, poisson_solve, stationary_law, total_variation, transport_plan, wasserstein,
    wasserstein_exact, ContractionReport, DualityGap, FamilyContraction, LyapunovAudit,
    LyapunovSpec, MinorisationAudit, PoissonBoundAudit, PoissonSolution, TransportPlan,
};
pub use config::{config_hash, parse_config, serialize, Config};
pub use decomposition::{
    decompose, martingale_audit, martingale_mean_zscores, remainder_audit, BoundInputs,
    DecompositionReport, MartingaleAudit, RemainderAudit, Trajectory,
};
pub use error::{AirError, Result};
pub use geometry::{
    lipschitz_constant, state_fn_from_table, AugmentedState, DistanceKind, DistanceLike, PairFn,
    Point, StateFn,
};
pub use kernels::{
    doeblin_family, grid_metropolis_family, kernel_power, rwm_family, two_state_family,
    two_state_matrix, KernelFamily, Param, ParamKey, SpaceKind,
};
pub use report::{
    load_matrix, matrix_text, read_trajectory, study_lines, study_text, trajectory_text,
    Manifest, StoredTrajectory, ARTIFACT_VERSION,
};
pub use runner::{
    admissibility, counterexample_config, extend_integrand, geometric_checkpoints, measure_rho,
    normalized_sums, replicate, run_air, splitmix64, stuck_probability, stuck_probability_limit,
    theorem_sweep, waning_path, RateDiagnostics, RateKind, RateSpec, ReplicationRecord,
    RunConfig, RunOutput, Study, StudySummary, SweepCell, WindowLog,
};
pub use schedule::{AirSchedule, Window};
