//! Martingale decomposition of adaptive partial sums.
//!
//! For a trajectory (Y_j, Γ_j) and an integrand h, the centred partial sum
//! splits exactly into three parts,
//!
//!   Σ_{j=1}^n (h(Y_j) − π_{Γ_{j−1}}(h)) = M_n + R_m + g_n,
//!
//! where M_n = Σ Δ_j is a martingale with increments
//! Δ_j = u_{Γ_{j−1}}(Y_j) − (P_{Γ_{j−1}} u_{Γ_{j−1}})(Y_{j−1}), R_m collects
//! the Poisson-solution jumps at the m completed adaptation times, and
//! g_n = h(Y_n) − h(Y_0) + u_{Γ_0}(Y_0) − u_{Γ_n}(Y_n) is a boundary term.
//! Because the parameter only changes at adaptation times, the per-step
//! parameter-change sum Σ_{j=1}^n (u_{Γ_j} − u_{Γ_{j−1}})(Y_j) collapses to
//! the adaptation-time sum; both routes are computed here and must agree to
//! the last bit.
//!
//! All Poisson data comes from the exact analysis engine, so the identity is
//! enforced, not just reported: a residual above the documented tolerance is
//! an error in the bookkeeping or the solutions, never something to average
//! away.

use std::collections::HashMap;

use crate::analysis::PoissonSolution;
use crate::error::{AirError, Result};
use crate::geometry::{AugmentedState, Point, StateFn};
use crate::kernels::{Param, ParamKey};
use crate::schedule::AirSchedule;
use crate::tol;

/// A recorded path: states `Y_0, ..., Y_n` and the installed parameters
/// `Γ_0, ..., Γ_n`, where `Γ_j` is the parameter in force after time `j`
/// (it generates the step to `Y_{j+1}`).
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States `Y_0, ..., Y_n`.
    pub states: Vec<AugmentedState>,
    /// Parameters `Γ_0, ..., Γ_n`; `params[j]` generates step `j + 1`.
    pub params: Vec<Param>,
}

impl Trajectory {
    /// Build a trajectory, validating that states and parameters align.
    pub fn new(states: Vec<AugmentedState>, params: Vec<Param>) -> Result<Self> {
        if states.is_empty() {
            return Err(AirError::Domain("trajectory must contain Y_0".into()));
        }
        if states.len() != params.len() {
            return Err(AirError::Domain(format!(
                "trajectory has {} states but {} parameters; both run over 0..=n",
                states.len(),
                params.len()
            )));
        }
        Ok(Self { states, params })
    }

    /// The horizon `n` (number of generated steps).
    pub fn n(&self) -> u64 {
        (self.states.len() - 1) as u64
    }
}

/// Resolve a state to its finite-support index.
fn state_index(y: &AugmentedState) -> Result<usize> {
    match &y.x {
        Point::Label(i) => Ok(*i),
        Point::Coords(_) => Err(AirError::Domain(
            "continuous coordinates admit no exact Poisson solution; bridge the \
             target onto a finite grid (for example the grid Metropolis family) \
             before decomposing"
                .into(),
        )),
    }
}

/// The exact split of a centred adaptive partial sum.
#[derive(Debug, Clone)]
pub struct DecompositionReport {
    /// Horizon `n`.
    pub n: u64,
    /// Completed adaptation count `m = #{ℓ ≥ 1 : T_ℓ ≤ n}`.
    pub m: u64,
    /// Directly summed left-hand side `Σ_{j=1}^n (h(Y_j) − π_{Γ_{j−1}}(h))`.
    pub lhs: f64,
    /// Martingale value `M_n = Σ_{j=1}^n Δ_j`.
    pub m_n: f64,
    /// Running martingale path `M_0, ..., M_n`.
    pub m_path: Vec<f64>,
    /// Increments `Δ_1, ..., Δ_n`.
    pub deltas: Vec<f64>,
    /// `max_j |Δ_j|`.
    pub delta_max: f64,
    /// `Σ_j Δ_j²`.
    pub delta_sumsq: f64,
    /// Adaptation-time remainder `R_m`.
    pub r_m: f64,
    /// The same quantity accumulated the slow way, as the per-step sum
    /// `Σ_{j=1}^n (u_{Γ_j}(Y_j) − u_{Γ_{j−1}}(Y_j))`; must equal `r_m`
    /// bitwise because within-window terms are exactly zero.
    pub per_step_parameter_terms: f64,
    /// Boundary term `g_n = h(Y_n) − h(Y_0) + u_{Γ_0}(Y_0) − u_{Γ_n}(Y_n)`.
    pub g_n: f64,
    /// `|lhs − (m_n + r_m + g_n)|`.
    pub identity_residual: f64,
}

fn solution_for<'a>(
    solutions: &'a HashMap<ParamKey, PoissonSolution>,
    param: &Param,
    step: u64,
) -> Result<&'a PoissonSolution> {
    solutions.get(&param.key()).ok_or_else(|| {
        AirError::MissingParam(format!(
            "no Poisson solution for parameter {param:?} in force at step {step}"
        ))
    })
}

/// Evaluate `u` at a state, bounds-checking the index.
fn u_at(sol: &PoissonSolution, y: &AugmentedState) -> Result<f64> {
    let i = state_index(y)?;
    if i >= sol.u.len() {
        return Err(AirError::Domain(format!(
            "state label {i} outside the {}-state Poisson solution",
            sol.u.len()
        )));
    }
    Ok(sol.u[i])
}

/// Split a recorded trajectory into martingale, remainder, and boundary
/// parts, and enforce the exact identity.
///
/// Every parameter appearing in the trajectory (including the final, possibly
/// freshly installed `Γ_n`) must have an entry in `solutions`; each solution
/// carries its own invariant law and `π(h)`. The stored integrand is checked
/// against `h` at every visited state, so a solutions map built for a
/// different integrand fails loudly instead of producing a wrong residual.
pub fn decompose(
    traj: &Trajectory,
    h: &StateFn,
    solutions: &HashMap<ParamKey, PoissonSolution>,
    sched: &AirSchedule,
) -> Result<DecompositionReport> {
    let n = traj.n();
    if n == 0 {
        return Ok(DecompositionReport {
            n: 0,
            m: 0,
            lhs: 0.0,
            m_n: 0.0,
            m_path: vec![0.0],
            deltas: Vec::new(),
            delta_max: 0.0,
            delta_sumsq: 0.0,
            r_m: 0.0,
            per_step_parameter_terms: 0.0,
            g_n: 0.0,
            identity_residual: 0.0,
        });
    }
    let m = sched.completed_adaptations(n)?;

    let mut lhs = 0.0f64;
    let mut m_n = 0.0f64;
    let mut m_path = Vec::with_capacity(traj.states.len());
    m_path.push(0.0);
    let mut deltas = Vec::with_capacity(n as usize);
    let mut delta_max = 0.0f64;
    let mut delta_sumsq = 0.0f64;
    let mut per_step_parameter_terms = 0.0f64;

    for j in 1..=n as usize {
        let prev_param = &traj.params[j - 1];
        let sol = solution_for(solutions, prev_param, j as u64)?;
        let y_j = &traj.states[j];
        let y_prev = &traj.states[j - 1];
        let i_j = state_index(y_j)?;
        let i_prev = state_index(y_prev)?;
        if i_j >= sol.f.len() || i_prev >= sol.f.len() {
            return Err(AirError::Domain(format!(
                "state label outside the {}-state Poisson solution at step {j}",
                sol.f.len()
            )));
        }
        let h_j = h(y_j);
        if (h_j - sol.f[i_j]).abs() > 1e-12 {
            return Err(AirError::Audit(format!(
                "Poisson solution for {prev_param:?} was solved for a different \
                 integrand: h(Y_{j}) = {h_j} vs stored {}",
                sol.f[i_j]
            )));
        }
        lhs += h_j - sol.pi_f;

        let delta = sol.u[i_j] - sol.pu[i_prev];
        deltas.push(delta);
        delta_max = delta_max.max(delta.abs());
        delta_sumsq += delta * delta;
        m_n += delta;
        m_path.push(m_n);

        // The per-step parameter-change term; zero bitwise inside a window
        // because both lookups hit the same solution.
        let cur_param = &traj.params[j];
        let sol_cur = solution_for(solutions, cur_param, j as u64)?;
        let term = u_at(sol_cur, y_j)? - sol.u[i_j];
        if cur_param.key() == prev_param.key() && term != 0.0 {
            return Err(AirError::Audit(format!(
                "within-window parameter term {term:e} at step {j} is not exactly zero"
            )));
        }
        per_step_parameter_terms += term;
    }

    // The collapsed route: only the m completed adaptation times contribute.
    let mut r_m = 0.0f64;
    for ell in 1..=m {
        let t = sched.adaptation_time(ell)? as usize;
        let y_t = &traj.states[t];
        let sol_new = solution_for(solutions, &traj.params[t], t as u64)?;
        let sol_old = solution_for(solutions, &traj.params[t - 1], t as u64)?;
        r_m += u_at(sol_new, y_t)? - u_at(sol_old, y_t)?;
    }
    if r_m.to_bits() != per_step_parameter_terms.to_bits() {
        return Err(AirError::Audit(format!(
            "adaptation-time remainder {r_m} disagrees with the per-step route \
             {per_step_parameter_terms}; window boundary bookkeeping is wrong"
        )));
    }

    let sol_0 = solution_for(solutions, &traj.params[0], 0)?;
    let sol_n = solution_for(solutions, &traj.params[n as usize], n)?;
    let g_n = h(&traj.states[n as usize]) - h(&traj.states[0]) + u_at(sol_0, &traj.states[0])?
        - u_at(sol_n, &traj.states[n as usize])?;

    let identity_residual = (lhs - (m_n + r_m + g_n)).abs();
    if identity_residual > tol::DECOMPOSITION_IDENTITY * (1.0 + lhs.abs()) {
        return Err(AirError::Audit(format!(
            "decomposition identity violated: |{lhs} - ({m_n} + {r_m} + {g_n})| \
             = {identity_residual:e}"
        )));
    }

    Ok(DecompositionReport {
        n,
        m,
        lhs,
        m_n,
        m_path,
        deltas,
        delta_max,
        delta_sumsq,
        r_m,
        per_step_parameter_terms,
        g_n,
        identity_residual,
    })
}

/// The constants entering the increment and remainder bounds: a uniform
/// contraction witness `(k0, τ)`, the one-step bound `M`, the integrand's
/// Lipschitz constant `L`, and the eccentricity bound `K`.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs {
    /// Uniform contraction lag.
    pub k0: u32,
    /// Lipschitz constant of the integrand under the chosen distance.
    pub lipschitz: f64,
    /// One-step bound `M = max_γ max(1, τ(P_γ))`.
    pub m_bound: f64,
    /// Uniform contraction value `τ < 1` at lag `k0`.
    pub tau: f64,
    /// Eccentricity bound `K = max_y Σ_z d(y, z) π(z)` over the family.
    pub ecc_bound: f64,
}

impl BoundInputs {
    /// Assemble from a family contraction scan.
    pub fn from_family(
        fc: &crate::analysis::FamilyContraction,
        lipschitz: f64,
        ecc_bound: f64,
    ) -> Self {
        Self {
            k0: fc.k0,
            lipschitz,
            m_bound: fc.m_bound,
            tau: fc.tau,
            ecc_bound,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.tau < 1.0) {
            return Err(AirError::Domain(format!(
                "increment and remainder bounds need τ < 1, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Uniform bound on `sup_y |u_γ(y)|`: `k₀ L M^{k₀} K / (1 − τ)`.
    pub fn u_bound(&self) -> f64 {
        self.k0 as f64 * self.lipschitz * self.m_bound.powi(self.k0 as i32) * self.ecc_bound
            / (1.0 - self.tau)
    }
}

/// Result of checking the martingale-increment bound.
#[derive(Debug, Clone)]
pub struct MartingaleAudit {
    /// The proved bound `2 k₀ L M^{k₀} K / (1 − τ)`.
    pub bound: f64,
    /// Observed `max_j |Δ_j|`.
    pub observed_max: f64,
    /// `bound − observed_max`.
    pub slack: f64,
    /// Whether the observation respects the bound.
    pub ok: bool,
}

/// Check `max_j |Δ_j| ≤ 2 k₀ L M^{k₀} K / (1 − τ)` on one report.
pub fn martingale_audit(report: &DecompositionReport, inputs: &BoundInputs) -> Result<MartingaleAudit> {
    inputs.check()?;
    let bound = 2.0 * inputs.u_bound();
    let observed_max = report.delta_max;
    let slack = bound - observed_max;
    Ok(MartingaleAudit {
        bound,
        observed_max,
        slack,
        ok: slack >= -tol::BOUND_SLACK,
    })
}

/// Mean-zero z-scores of `M_n` over replications at the given checkpoints.
///
/// Under the martingale property each `M_n` has mean zero, so the
/// standardised replication mean should stay within CLT range (|z| ≤ 4 is
/// the documented acceptance band). A checkpoint past some report's horizon
/// is an error; identical-to-the-bit degenerate samples give z = 0.
pub fn martingale_mean_zscores(
    reports: &[DecompositionReport],
    checkpoints: &[u64],
) -> Result<Vec<(u64, f64)>> {
    if reports.is_empty() {
        return Err(AirError::Domain("no replications to standardise".into()));
    }
    let r = reports.len() as f64;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &n in checkpoints {
        let mut values = Vec::with_capacity(reports.len());
        for rep in reports {
            let path = &rep.m_path;
            if n as usize >= path.len() {
                return Err(AirError::Domain(format!(
                    "checkpoint {n} past replication horizon {}",
                    path.len() - 1
                )));
            }
            values.push(path[n as usize]);
        }
        let mean = values.iter().sum::<f64>() / r;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (r - 1.0).max(1.0);
        let se = (var / r).sqrt();
        let z = if se == 0.0 { 0.0 } else { mean / se };
        out.push((n, z));
    }
    Ok(out)
}

/// Result of checking the adaptation-remainder bound.
#[derive(Debug, Clone)]
pub struct RemainderAudit {
    /// The bound `n^{1/(1+β)} (2 c_β)^{1/(1+β)} k₀ L M^{k₀} K / (1 − τ)`.
    pub bound: f64,
    /// Observed `|R_m|`.
    pub observed: f64,
    /// `bound − observed`.
    pub slack: f64,
    /// Whether the observation respects the bound.
    pub ok: bool,
}

/// Check `|R_m| ≤ n^{1/(1+β)} (2 c_β)^{1/(1+β)} k₀ L M^{k₀} K / (1 − τ)`
/// where `c_β = 1/(1+β)` is the schedule's lower envelope constant.
pub fn remainder_audit(
    report: &DecompositionReport,
    inputs: &BoundInputs,
    beta: f64,
) -> Result<RemainderAudit> {
    inputs.check()?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(AirError::Domain(format!(
            "schedule exponent must be positive and finite, got {beta}"
        )));
    }
    let c_beta = 1.0 / (1.0 + beta);
    let exponent = 1.0 / (1.0 + beta);
    let bound = (report.n as f64).powf(exponent) * (2.0 * c_beta).powf(exponent) * inputs.u_bound();
    let observed = report.r_m.abs();
    let slack = bound - observed;
    Ok(RemainderAudit {
        bound,
        observed,
        slack,
        ok: slack >= -tol::BOUND_SLACK,
    })
}
