//! Stationary laws and Poisson-equation solutions for finite kernels.
//!
//! [`poisson_solve`] produces the function `u` with
//! `(I - P) u = f - π(f)` and `π(u) = 0`, the object that turns ergodic
//! averages into martingales. Every solve travels two independent routes: a
//! direct LU solve of the regularised system `(I - P + 1πᵀ) u = f - π(f)`
//! (one iterative-refinement pass), and the truncated series
//! `Σ_{ℓ<=L} P^ℓ (f - π(f))` with `L` chosen so the geometric tail bound
//! derived from the total-variation contraction of a power of `P` is below
//! the solve tolerance. Disagreement is an error, not a warning.

use nalgebra::{DMatrix, DVector};

use crate::error::{AirError, Result};
use crate::kernels::validate_stochastic;
use crate::tol;

use super::ContractionReport;

/// Invariant law of `P` by direct linear solve: the system `(I - Pᵀ) π = 0`
/// with its first row replaced by the normalisation `Σ π = 1`.
///
/// One iterative-refinement pass is applied before validation; the residual
/// `‖Pᵀ π - π‖_∞` must come out at most [`tol::SOLVE_RESIDUAL`]. A singular
/// or defective system (non-unique stationary law) is an error. Use
/// [`ergodicity_warnings`] for the reducibility/periodicity screen.
pub fn stationary_law(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    validate_stochastic(p)?;
    let n = p.nrows();
    let mut a = DMatrix::identity(n, n) - p.transpose();
    for j in 0..n {
        a[(0, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[0] = 1.0;
    let lu = a.clone().full_piv_lu();
    let mut pi = lu.solve(&b).ok_or_else(|| {
        AirError::Solve("stationary system is singular: the invariant law is not unique".into())
    })?;
    let correction = lu.solve(&(&b - &a * &pi)).ok_or_else(|| {
        AirError::Solve("stationary refinement solve failed".into())
    })?;
    pi += correction;
    if pi.iter().any(|&x| x < -1e-10) {
        return Err(AirError::Solve(format!(
            "stationary solve produced negative mass (min {:e}); the chain looks defective",
            pi.min()
        )));
    }
    let mass: f64 = pi.iter().map(|x| x.max(0.0)).sum();
    let pi = DVector::from_iterator(n, pi.iter().map(|x| x.max(0.0) / mass));
    let residual = (p.transpose() * &pi - &pi).abs().max();
    if residual > tol::SOLVE_RESIDUAL {
        return Err(AirError::Solve(format!(
            "stationarity residual {residual:e} exceeds {:e}",
            tol::SOLVE_RESIDUAL
        )));
    }
    Ok(pi)
}

/// Warning-level ψ-irreducibility/aperiodicity screen: a boolean
/// reachability closure for irreducibility and a Wielandt-exponent boolean
/// power for primitivity. Returns human-readable warnings, empty when the
/// matrix looks primitive.
pub fn ergodicity_warnings(p: &DMatrix<f64>) -> Vec<String> {
    let n = p.nrows();
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| p[(i, j)] > 0.0).collect())
        .collect();
    let bool_mul = |a: &Vec<Vec<bool>>, b: &Vec<Vec<bool>>| -> Vec<Vec<bool>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).any(|k| a[i][k] && b[k][j]))
                    .collect()
            })
            .collect()
    };
    // Reachability closure: (I ∨ A)^n.
    let mut closure: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i == j || adj[i][j]).collect())
        .collect();
    let mut steps = 1usize;
    while steps < n {
        closure = bool_mul(&closure, &closure);
        steps *= 2;
    }
    if !(0..n).all(|i| (0..n).all(|j| closure[i][j])) {
        return vec![
            "kernel appears reducible: some state cannot reach some other state".to_string(),
        ];
    }
    // Primitivity: A^e strictly positive at the Wielandt exponent.
    let wielandt = n * n - 2 * n + 2;
    let mut power = adj.clone();
    let mut base = adj;
    let mut e = wielandt.max(1) - 1;
    while e > 0 {
        if e & 1 == 1 {
            power = bool_mul(&power, &base);
        }
        e >>= 1;
        if e > 0 {
            base = bool_mul(&base, &base);
        }
    }
    if !(0..n).all(|i| (0..n).all(|j| power[i][j])) {
        return vec![
            "kernel appears periodic: no strictly positive power within the Wielandt exponent"
                .to_string(),
        ];
    }
    Vec::new()
}

/// Total-variation contraction coefficient of a single matrix:
/// `max_{i<j} TV(P(i, ·), P(j, ·))`.
fn tv_coefficient(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut tv = 0.0;
            for k in 0..n {
                tv += (p[(i, k)] - p[(j, k)]).abs();
            }
            worst = worst.max(0.5 * tv);
        }
    }
    worst
}

/// Truncated-series route to the Poisson solution.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    /// `Σ_{ℓ<=L} P^ℓ (f - π(f))`, recentred to `π(u) = 0`.
    pub u: DVector<f64>,
    /// Number of series terms `L + 1`.
    pub terms: usize,
    /// Geometric bound on the discarded tail, below [`tol::SOLVE_RESIDUAL`].
    pub tail_bound: f64,
}

/// Sum the Poisson series directly, with a certified geometric tail bound.
///
/// The lag `k0` is the first power (up to 64) whose total-variation
/// contraction coefficient drops to 0.99 or below; the tail after `L` terms
/// is bounded by `2 ‖f - π(f)‖_∞ k0 τ^{⌊(L+1)/k0⌋} / (1 - τ)`.
pub fn poisson_series(
    p: &DMatrix<f64>,
    f: &DVector<f64>,
    pi: &DVector<f64>,
) -> Result<SeriesSolution> {
    let n = p.nrows();
    let fbar = f - DVector::from_element(n, pi.dot(f));
    let span = fbar.abs().max();
    if span == 0.0 {
        return Ok(SeriesSolution {
            u: DVector::zeros(n),
            terms: 1,
            tail_bound: 0.0,
        });
    }
    let mut k0 = 0usize;
    let mut tau = 1.0f64;
    let mut power = p.clone();
    for ell in 1..=64usize {
        let t = tv_coefficient(&power);
        if t <= 0.99 {
            k0 = ell;
            tau = t;
            break;
        }
        power = &power * p;
    }
    if k0 == 0 {
        return Err(AirError::Solve(
            "no total-variation contraction within 64 steps; series route unavailable".into(),
        ));
    }
    let tail = |terms: usize| -> f64 {
        2.0 * span * k0 as f64 * tau.powi((terms / k0) as i32) / (1.0 - tau)
    };
    let target = 0.5 * tol::SOLVE_RESIDUAL;
    let mut terms = 1usize;
    let cap = 500_000usize;
    while tail(terms) > target {
        terms += k0;
        if terms > cap {
            return Err(AirError::Solve(format!(
                "series tail bound still {:e} after {cap} terms",
                tail(terms)
            )));
        }
    }
    let mut u = fbar.clone();
    let mut g = fbar;
    for _ in 1..terms {
        g = p * g;
        u += &g;
    }
    let u = &u - DVector::from_element(n, pi.dot(&u));
    Ok(SeriesSolution {
        u,
        terms,
        tail_bound: tail(terms),
    })
}

/// A certified solution of the Poisson equation for `(P, f)`.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    /// Solution table with `π(u) = 0`.
    pub u: DVector<f64>,
    /// `P u`, computed honestly by matrix-vector product at solve time.
    pub pu: DVector<f64>,
    /// The integrand.
    pub f: DVector<f64>,
    /// Invariant law of `P`.
    pub pi: DVector<f64>,
    /// `π(f)`.
    pub pi_f: f64,
    /// `‖(u - P u) - (f - π(f))‖_∞`; at most [`tol::SOLVE_RESIDUAL`].
    pub residual: f64,
    /// `‖u_solve - u_series‖_∞`; at most [`tol::CROSS_METHOD`].
    pub series_agreement: f64,
    /// Terms used by the series route.
    pub series_terms: usize,
}

/// Solve `(I - P) u = f - π(f)` with side condition `π(u) = 0`.
///
/// Direct route: LU solve of the regularised matrix `I - P + 1πᵀ` plus one
/// iterative-refinement pass. The truncated-series route re-derives `u`
/// independently; residual or cross-method disagreement is an error.
pub fn poisson_solve(p: &DMatrix<f64>, f: &DVector<f64>) -> Result<PoissonSolution> {
    validate_stochastic(p)?;
    let n = p.nrows();
    if f.len() != n {
        return Err(AirError::Domain(format!(
            "integrand has {} entries for a {n}-state kernel",
            f.len()
        )));
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(AirError::Domain("integrand must be finite-valued".into()));
    }
    let pi = stationary_law(p)?;
    let pi_f = pi.dot(f);
    let fbar = f - DVector::from_element(n, pi_f);
    let ones = DVector::from_element(n, 1.0);
    let a = DMatrix::identity(n, n) - p + &ones * pi.transpose();
    let lu = a.clone().full_piv_lu();
    let mut u = lu
        .solve(&fbar)
        .ok_or_else(|| AirError::Solve("regularised Poisson system is singular".into()))?;
    let correction = lu
        .solve(&(&fbar - &a * &u))
        .ok_or_else(|| AirError::Solve("Poisson refinement solve failed".into()))?;
    u += correction;
    u -= DVector::from_element(n, pi.dot(&u));
    let pu = p * &u;
    let residual = (&u - &pu - &fbar).abs().max();
    if residual > tol::SOLVE_RESIDUAL {
        return Err(AirError::Solve(format!(
            "Poisson identity residual {residual:e} exceeds {:e}",
            tol::SOLVE_RESIDUAL
        )));
    }
    let centred = pi.dot(&u).abs();
    if centred > tol::SOLVE_RESIDUAL {
        return Err(AirError::Solve(format!(
            "side condition π(u) = 0 violated by {centred:e}"
        )));
    }
    let series = poisson_series(p, f, &pi)?;
    let series_agreement = (&u - &series.u).abs().max();
    if series_agreement > tol::CROSS_METHOD {
        return Err(AirError::Solve(format!(
            "solve/series disagreement {series_agreement:e} exceeds {:e}",
            tol::CROSS_METHOD
        )));
    }
    Ok(PoissonSolution {
        u,
        pu,
        f: f.clone(),
        pi,
        pi_f,
        residual,
        series_agreement,
        series_terms: series.terms,
    })
}

/// Per-state audit of the eccentricity bound
/// `|u(y)| <= k0 L M^{k0} E(y) / (1 - τ)`.
#[derive(Debug, Clone)]
pub struct PoissonBoundAudit {
    /// Bound value per state.
    pub bound: Vec<f64>,
    /// `bound(y) - |u(y)|` per state.
    pub slack: Vec<f64>,
    /// Smallest slack over states.
    pub min_slack: f64,
    /// Whether every slack is at least `-`[`tol::BOUND_SLACK`].
    pub ok: bool,
}

/// Check `|u(y)| <= k0 L M^{k0} E(y) / (1 - τ)` state by state, where
/// `E(y) = Σ_y' d(y, y') π(y')` and `(k0, M, τ)` come from the contraction
/// report.
pub fn poisson_bound_check(
    sol: &PoissonSolution,
    d: &[Vec<f64>],
    lipschitz: f64,
    report: &ContractionReport,
) -> Result<PoissonBoundAudit> {
    if report.tau >= 1.0 {
        return Err(AirError::Domain(format!(
            "bound needs τ < 1, got τ = {}",
            report.tau
        )));
    }
    let n = sol.u.len();
    if d.len() != n || d.iter().any(|row| row.len() != n) {
        return Err(AirError::Domain(
            "distance matrix shape does not match the state space".into(),
        ));
    }
    let prefactor =
        report.k0 as f64 * lipschitz * report.m_bound.powi(report.k0 as i32) / (1.0 - report.tau);
    let mut bound = Vec::with_capacity(n);
    let mut slack = Vec::with_capacity(n);
    for y in 0..n {
        let ecc: f64 = (0..n).map(|z| d[y][z] * sol.pi[z]).sum();
        let b = prefactor * ecc;
        bound.push(b);
        slack.push(b - sol.u[y].abs());
    }
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PoissonBoundAudit {
        bound,
        slack,
        min_slack,
        ok: min_slack >= -tol::BOUND_SLACK,
    })
}
