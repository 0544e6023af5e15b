//! Drift (Lyapunov) and minorisation audits.
//!
//! The geometric-ergodicity toolkit: verify a declared drift condition
//! `P V <= κ V + b`, push it through Jensen's inequality to fractional
//! powers `P V^q <= κ^q V^q + b^q`, bound the stationary mass `π(V) <=
//! b / (1 - κ)`, and measure the best minorisation constant a kernel admits
//! on a given small set.

use nalgebra::{DMatrix, DVector};

use crate::error::{AirError, Result};
use crate::kernels::validate_stochastic;

use super::poisson::stationary_law;

/// A declared drift condition `P V <= κ V + b` with weight `V >= 1`.
#[derive(Debug, Clone)]
pub struct LyapunovSpec {
    /// Weight table over the state space, entrywise at least one.
    pub v: DVector<f64>,
    /// Contraction factor in (0, 1).
    pub kappa: f64,
    /// Additive constant, positive.
    pub b: f64,
}

impl LyapunovSpec {
    /// Validate field ranges (not the drift inequality itself).
    pub fn new(v: DVector<f64>, kappa: f64, b: f64) -> Result<Self> {
        if v.iter().any(|&x| !(x >= 1.0) || !x.is_finite()) {
            return Err(AirError::Domain(
                "Lyapunov weight must map into [1, inf)".into(),
            ));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(AirError::Domain(format!(
                "drift factor must lie in (0, 1), got {kappa}"
            )));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(AirError::Domain(format!(
                "drift constant must be positive and finite, got {b}"
            )));
        }
        Ok(Self { v, kappa, b })
    }
}

/// Fit the tightest drift pair for a given weight by scanning a `κ` grid
/// (step 1/1000) and minimising the stationary-mass bound `b(κ)/(1-κ)`,
/// where `b(κ) = max_y (P V - κ V)(y)`.
pub fn fit_drift(p: &DMatrix<f64>, v: &DVector<f64>) -> Result<LyapunovSpec> {
    validate_stochastic(p)?;
    if v.len() != p.nrows() {
        return Err(AirError::Domain(
            "weight length does not match the state space".into(),
        ));
    }
    let pv = p * v;
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 1..1000u32 {
        let kappa = i as f64 / 1000.0;
        let b = (&pv - v * kappa).max();
        if b <= 0.0 {
            continue;
        }
        let objective = b / (1.0 - kappa);
        if best.map_or(true, |(_, _, obj)| objective < obj) {
            best = Some((kappa, b, objective));
        }
    }
    let (kappa, b, _) = best.ok_or_else(|| {
        AirError::Audit("no admissible drift pair on the κ grid".into())
    })?;
    LyapunovSpec::new(v.clone(), kappa, b)
}

/// Outcome of a fractional-power drift audit.
#[derive(Debug, Clone)]
pub struct LyapunovAudit {
    /// The power audited.
    pub q: f64,
    /// Smallest slack `κ^q V^q(y) + b^q - P V^q(y)` over states.
    pub worst_slack: f64,
    /// Stationary mass `π(V)`.
    pub pi_v: f64,
    /// The bound `b / (1 - κ)` that must dominate `π(V)`.
    pub pi_v_bound: f64,
    /// Whether both the power inequality and the stationary bound hold.
    pub ok: bool,
}

/// Audit `P V^q <= κ^q V^q + b^q` for one power `q in (0, 1]`, plus the
/// stationary-mass bound `π(V) <= b / (1 - κ)`.
///
/// The declared base drift `P V <= κ V + b` is re-verified first; its
/// failure is an error naming the worst state, since the fractional
/// inequality is only claimed as a consequence of the base one.
pub fn lyapunov_audit(p: &DMatrix<f64>, spec: &LyapunovSpec, q: f64) -> Result<LyapunovAudit> {
    validate_stochastic(p)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(AirError::Domain(format!(
            "drift power must lie in (0, 1], got {q}"
        )));
    }
    if spec.v.len() != p.nrows() {
        return Err(AirError::Domain(
            "weight length does not match the state space".into(),
        ));
    }
    let pv = p * &spec.v;
    let mut worst_state = 0usize;
    let mut worst_violation = f64::NEG_INFINITY;
    for y in 0..p.nrows() {
        let violation = pv[y] - spec.kappa * spec.v[y] - spec.b;
        if violation > worst_violation {
            worst_violation = violation;
            worst_state = y;
        }
    }
    if worst_violation > 1e-12 {
        return Err(AirError::Audit(format!(
            "declared drift fails at state {worst_state}: PV = {} > κV + b = {}",
            pv[worst_state],
            spec.kappa * spec.v[worst_state] + spec.b
        )));
    }
    let vq = spec.v.map(|x| x.powf(q));
    let pvq = p * &vq;
    let mut worst_slack = f64::INFINITY;
    for y in 0..p.nrows() {
        let slack = spec.kappa.powf(q) * vq[y] + spec.b.powf(q) - pvq[y];
        worst_slack = worst_slack.min(slack);
    }
    let pi = stationary_law(p)?;
    let pi_v = pi.dot(&spec.v);
    let pi_v_bound = spec.b / (1.0 - spec.kappa);
    let ok = worst_slack >= -1e-12 && pi_v <= pi_v_bound + 1e-12;
    Ok(LyapunovAudit {
        q,
        worst_slack,
        pi_v,
        pi_v_bound,
        ok,
    })
}

/// Result of measuring the minorisation `P(x, ·) >= δ η(· ∩ C)` on a small
/// set.
#[derive(Debug, Clone)]
pub struct MinorisationAudit {
    /// Whether the requested `δ` is attainable.
    pub ok: bool,
    /// The largest attainable constant `Σ_{z in C} min_{x in C} P(x, z)`.
    pub delta_max: f64,
    /// The normalised minorising law on `C` (zeros off `C`); `None` when
    /// the row minima vanish identically.
    pub eta: Option<DVector<f64>>,
}

/// Measure the best minorisation constant of `P` on the small set `c_set`
/// and decide whether the requested `δ` is attainable.
pub fn minorisation_audit(
    p: &DMatrix<f64>,
    c_set: &[usize],
    delta: f64,
) -> Result<MinorisationAudit> {
    validate_stochastic(p)?;
    if c_set.is_empty() {
        return Err(AirError::Domain("empty small set".into()));
    }
    if !(delta > 0.0) {
        return Err(AirError::Domain(format!(
            "minorisation constant must be positive, got {delta}"
        )));
    }
    let n = p.nrows();
    if c_set.iter().any(|&x| x >= n) {
        return Err(AirError::Domain(format!(
            "small set contains a state outside the {n}-state space"
        )));
    }
    let mut zeta = DVector::zeros(n);
    for &z in c_set {
        zeta[z] = c_set
            .iter()
            .map(|&x| p[(x, z)])
            .fold(f64::INFINITY, f64::min);
    }
    let delta_max: f64 = zeta.iter().sum();
    let eta = (delta_max > 0.0).then(|| &zeta / delta_max);
    Ok(MinorisationAudit {
        ok: delta_max >= delta - 1e-12,
        delta_max,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{doeblin_family, two_state_matrix, Param};

    #[test]
    fn fit_drift_two_state_frozen_values() {
        let p = two_state_matrix(0.25).unwrap();
        let v = DVector::from_row_slice(&[1.0, 2.0]);
        let spec = fit_drift(&p, &v).unwrap();
        assert!((spec.kappa - 0.5).abs() < 1e-12, "kappa {}", spec.kappa);
        assert!((spec.b - 0.75).abs() < 1e-12, "b {}", spec.b);
        let audit = lyapunov_audit(&p, &spec, 1.0).unwrap();
        assert!(audit.ok);
        // pi(V) = 1.5 equals b / (1 - kappa) exactly: the fit is tight.
        assert!((audit.pi_v - 1.5).abs() < 1e-12);
        assert!((audit.pi_v_bound - 1.5).abs() < 1e-12);
    }

    #[test]
    fn q_one_reduces_to_declared_drift() {
        let p = two_state_matrix(0.3).unwrap();
        let v = DVector::from_row_slice(&[1.0, 3.0]);
        let spec = fit_drift(&p, &v).unwrap();
        let audit = lyapunov_audit(&p, &spec, 1.0).unwrap();
        assert!(audit.ok);
        assert!(audit.worst_slack >= -1e-12);
    }

    #[test]
    fn constant_weight_holds_with_equality_structure() {
        let p = two_state_matrix(0.4).unwrap();
        let v = DVector::from_element(2, 1.0);
        let spec = LyapunovSpec::new(v, 0.5, 0.5).unwrap();
        for q in [0.25, 0.5, 0.75, 1.0] {
            let audit = lyapunov_audit(&p, &spec, q).unwrap();
            assert!(audit.ok, "q = {q}");
        }
    }

    #[test]
    fn fractional_powers_pass_on_fitted_kernels() {
        for seed in 0..30u64 {
            let fam = doeblin_family(6, 0.3, 1, 500 + seed).unwrap();
            let p = fam.transition_matrix(&Param::Index(0)).unwrap();
            let v = DVector::from_fn(6, |i, _| 1.0 + (i as f64) * 0.8 + (seed % 3) as f64);
            let spec = fit_drift(&p, &v).unwrap();
            for q in [0.25, 0.5, 0.75, 1.0] {
                let audit = lyapunov_audit(&p, &spec, q).unwrap();
                assert!(
                    audit.ok,
                    "seed {seed}, q {q}: slack {}, pi_v {} vs {}",
                    audit.worst_slack, audit.pi_v, audit.pi_v_bound
                );
            }
        }
    }

    #[test]
    fn false_drift_declaration_is_rejected() {
        let p = two_state_matrix(0.25).unwrap();
        let v = DVector::from_row_slice(&[1.0, 2.0]);
        // kappa and b far too small for this kernel.
        let spec = LyapunovSpec::new(v, 0.1, 0.05).unwrap();
        let err = lyapunov_audit(&p, &spec, 0.5);
        assert!(matches!(err, Err(AirError::Audit(_))), "{err:?}");
    }

    #[test]
    fn minorisation_two_state_frozen_values() {
        let p = two_state_matrix(0.25).unwrap();
        let audit = minorisation_audit(&p, &[0, 1], 0.5).unwrap();
        assert!(audit.ok);
        assert!((audit.delta_max - 0.5).abs() < 1e-12);
        let eta = audit.eta.unwrap();
        assert!((eta[0] - 0.5).abs() < 1e-12);
        // delta above the attainable maximum fails.
        let too_much = minorisation_audit(&p, &[0, 1], 0.51).unwrap();
        assert!(!too_much.ok);
    }

    #[test]
    fn doeblin_member_minorises_at_alpha() {
        let alpha = 0.35;
        let fam = doeblin_family(5, alpha, 1, 77).unwrap();
        let p = fam.transition_matrix(&Param::Index(0)).unwrap();
        let all: Vec<usize> = (0..5).collect();
        let audit = minorisation_audit(&p, &all, alpha).unwrap();
        assert!(audit.ok, "delta_max {}", audit.delta_max);
        assert!(audit.delta_max >= alpha - 1e-12);
    }

    #[test]
    fn disjoint_row_supports_fail() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let audit = minorisation_audit(&p, &[0, 1], 0.1).unwrap();
        assert!(!audit.ok);
        assert_eq!(audit.delta_max, 0.0);
        assert!(audit.eta.is_none());
        assert!(minorisation_audit(&p, &[], 0.1).is_err());
    }
}
