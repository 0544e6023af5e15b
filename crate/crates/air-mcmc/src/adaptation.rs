//! Parameter-update rules applied at adaptation times.
//!
//! The runner calls [`apply_update`] only at the times `T_m` of its
//! schedule; between those times the parameter is frozen. Rules consume a
//! streaming [`WindowStats`] summary of the trajectory (constant memory, no
//! stored paths) and never look ahead.
//!
//! The module also houses the deterministic two-state sequence
//! `γ_j = 1 - (1 - e^{-(j+1)})^{1/k_j}` whose adaptive chain gets stuck with
//! positive probability, and the waning statistic
//! `(1/k^ρ) Σ_{j=1}^k ‖Γ_{T_j} - Γ_{T_{j-1}}‖` used to measure how fast an
//! adaptation rule settles down.

use crate::error::{AirError, Result};
use crate::kernels::Param;
use crate::schedule::AirSchedule;

/// Closed parameter box `[lo, hi]` for scalar rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    /// Lower clamp bound.
    pub lo: f64,
    /// Upper clamp bound.
    pub hi: f64,
}

impl ParamBox {
    /// A validated box with `0 < lo <= hi < inf`.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(AirError::Domain(format!(
                "parameter box must satisfy 0 < lo <= hi < inf, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Clamp a scalar into the box; NaN maps to the lower edge.
    pub fn clamp(&self, x: f64) -> f64 {
        if x.is_nan() {
            self.lo
        } else {
            x.clamp(self.lo, self.hi)
        }
    }

    /// Whether `x` lies inside the box.
    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }
}

/// How the parameter is revised at each adaptation time.
#[derive(Debug, Clone)]
pub enum UpdateRule {
    /// Install the `m`-th listed value at the `m`-th adaptation
    /// (0-indexed list; entry 0 doubles as the natural initial parameter).
    FixedSequence {
        /// Parameter values by adaptation index.
        values: Vec<Param>,
        /// Wrap around when the list is exhausted; otherwise hold the last
        /// value.
        cycle: bool,
    },
    /// Robbins-Monro style acceptance-rate targeting,
    /// `γ <- clamp(γ exp(m^{-gain_exponent} (rate - target)))`,
    /// using the acceptance rate of the window just completed.
    AcceptanceTargeting {
        /// Desired acceptance rate in (0, 1).
        target: f64,
        /// Gain decay exponent; the gain at adaptation `m` is
        /// `m^{-gain_exponent}`.
        gain_exponent: f64,
        /// Clamp box for the scalar parameter.
        bounds: ParamBox,
    },
    /// Moment matching, `γ <- clamp(scale (sample variance + ridge))` on the
    /// cumulative history of observed values.
    EmpiricalMoment {
        /// Multiplier applied to the regularised variance.
        scale: f64,
        /// Additive regulariser keeping the parameter away from zero.
        ridge: f64,
        /// Clamp box for the scalar parameter.
        bounds: ParamBox,
    },
}

/// Streaming sufficient statistics for the update rules: acceptance counts
/// and first/second moments, both for the current window and cumulatively.
#[derive(Debug, Clone, Default)]
pub struct WindowStats {
    /// Steps observed in the current window.
    pub window_steps: u64,
    /// Accepted moves in the current window.
    pub window_accepted: u64,
    window_sum: f64,
    window_sumsq: f64,
    /// Steps observed since the start of the run.
    pub total_steps: u64,
    /// Accepted moves since the start of the run.
    pub total_accepted: u64,
    total_sum: f64,
    total_sumsq: f64,
}

impl WindowStats {
    /// Fresh, empty statistics.
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one step: a scalar observable of the new state and whether
    /// the move was an acceptance.
    pub fn observe(&mut self, value: f64, accepted: bool) {
        self.window_steps += 1;
        self.total_steps += 1;
        if accepted {
            self.window_accepted += 1;
            self.total_accepted += 1;
        }
        self.window_sum += value;
        self.total_sum += value;
        self.window_sumsq += value * value;
        self.total_sumsq += value * value;
    }

    /// Reset the window part; cumulative statistics persist.
    pub fn close_window(&mut self) {
        self.window_steps = 0;
        self.window_accepted = 0;
        self.window_sum = 0.0;
        self.window_sumsq = 0.0;
    }

    /// Acceptance rate of the current window, if any step was observed.
    pub fn window_acceptance_rate(&self) -> Option<f64> {
        (self.window_steps > 0).then(|| self.window_accepted as f64 / self.window_steps as f64)
    }

    /// Population variance of all values observed so far, if any.
    pub fn cumulative_variance(&self) -> Option<f64> {
        (self.total_steps > 0).then(|| {
            let n = self.total_steps as f64;
            let mean = self.total_sum / n;
            (self.total_sumsq / n - mean * mean).max(0.0)
        })
    }
}

/// Compute the parameter `Γ_{T_m}` installed at the `m`-th adaptation.
///
/// `stats` summarises the trajectory up to and including `Y_{T_m}`; the
/// window part covers exactly the window just completed. Moment-based rules
/// with an empty history return the current parameter unchanged.
pub fn apply_update(
    rule: &UpdateRule,
    stats: &WindowStats,
    m: u64,
    current: &Param,
) -> Result<Param> {
    match rule {
        UpdateRule::FixedSequence { values, cycle } => {
            if values.is_empty() {
                return Err(AirError::Domain("empty fixed parameter sequence".into()));
            }
            let idx = if *cycle {
                (m as usize) % values.len()
            } else {
                (m as usize).min(values.len() - 1)
            };
            Ok(values[idx].clone())
        }
        UpdateRule::AcceptanceTargeting {
            target,
            gain_exponent,
            bounds,
        } => {
            if m == 0 {
                return Err(AirError::Domain(
                    "acceptance targeting needs adaptation index m >= 1".into(),
                ));
            }
            let gamma = current.as_scalar()?;
            let Some(rate) = stats.window_acceptance_rate() else {
                return Ok(current.clone());
            };
            let gain = (m as f64).powf(-gain_exponent);
            Ok(Param::Scalar(
                bounds.clamp(gamma * (gain * (rate - target)).exp()),
            ))
        }
        UpdateRule::EmpiricalMoment {
            scale,
            ridge,
            bounds,
        } => {
            let Some(variance) = stats.cumulative_variance() else {
                return Ok(current.clone());
            };
            Ok(Param::Scalar(bounds.clamp(scale * (variance + ridge))))
        }
    }
}

/// An update rule together with its owned streaming statistics; one
/// instance per replication, never shared.
#[derive(Debug, Clone)]
pub struct Adaptor {
    /// The configured rule.
    pub rule: UpdateRule,
    /// Streaming history summary.
    pub stats: WindowStats,
}

impl Adaptor {
    /// Wrap a rule with fresh statistics.
    pub fn new(rule: UpdateRule) -> Self {
        Self {
            rule,
            stats: WindowStats::new(),
        }
    }

    /// Record one step of the trajectory.
    pub fn observe(&mut self, value: f64, accepted: bool) {
        self.stats.observe(value, accepted);
    }

    /// Apply the rule at adaptation `m` and close the current window.
    pub fn adapt(&mut self, m: u64, current: &Param) -> Result<Param> {
        let next = apply_update(&self.rule, &self.stats, m, current)?;
        self.stats.close_window();
        Ok(next)
    }
}

/// The deterministic two-state sequence `γ_j = 1 - (1 - e^{-(j+1)})^{1/k_j}`
/// with `k_0 := 1`.
pub fn counterexample_gamma(sched: &AirSchedule, j: u64) -> Result<f64> {
    let k = if j == 0 { 1 } else { sched.window_length(j)? };
    Ok(kth_root_complement((-(j as f64 + 1.0)).exp(), k))
}

/// `1 - (1 - x)^{1/k}` evaluated through `ln_1p`/`exp_m1` so that tiny `x`
/// (far below machine epsilon relative to 1) still produces the correct
/// magnitude `x / k` instead of collapsing to zero.
fn kth_root_complement(x: f64, k: u64) -> f64 {
    -(((-x).ln_1p()) / k as f64).exp_m1()
}

/// The window-matched installation of the deterministic sequence:
/// `γ` installed at adaptation `m` so that the window it generates (of
/// length `k_{m+1}`) has stay probability exactly `1 - e^{-(m+1)}`.
///
/// Installing [`counterexample_gamma`] values verbatim would misalign each
/// `γ_j` with the window length it was solved against, because the value
/// installed at time `T_m` generates `k_{m+1}` steps, not `k_m`. This
/// alignment makes the chain started at state 1 stay there over the first
/// `T_ℓ` steps with probability exactly `Π_{j=0}^{ℓ-1} (1 - e^{-j-1})`.
pub fn counterexample_window_gamma(sched: &AirSchedule, m: u64) -> Result<f64> {
    let k = sched.window_length(m + 1)?;
    Ok(kth_root_complement((-(m as f64 + 1.0)).exp(), k))
}

/// Fixed-sequence rule installing [`counterexample_window_gamma`] values;
/// entry 0 is the initial parameter `Γ_0 = e^{-1}`.
pub fn counterexample_rule(sched: &AirSchedule, adaptations: u64) -> Result<UpdateRule> {
    let values = (0..=adaptations)
        .map(|m| counterexample_window_gamma(sched, m).map(Param::Scalar))
        .collect::<Result<Vec<_>>>()?;
    Ok(UpdateRule::FixedSequence {
        values,
        cycle: false,
    })
}

/// The waning statistic `(1/k^ρ) Σ_{j=1}^k ‖Γ_{T_j} - Γ_{T_{j-1}}‖` with the
/// Euclidean norm on embedded parameters.
///
/// `params` must hold at least `Γ_{T_0}, ..., Γ_{T_k}`.
pub fn waning_statistic(params: &[Param], rho: f64, k: usize) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(AirError::Domain(format!(
            "waning exponent must lie in (0, 1), got {rho}"
        )));
    }
    if k == 0 {
        return Err(AirError::Domain("waning statistic needs k >= 1".into()));
    }
    if params.len() < k + 1 {
        return Err(AirError::Domain(format!(
            "waning statistic over k = {k} windows needs {} parameters, got {}",
            k + 1,
            params.len()
        )));
    }
    let mut sum = 0.0;
    for j in 1..=k {
        let a = params[j - 1].embed();
        let b = params[j].embed();
        if a.len() != b.len() {
            return Err(AirError::Domain(format!(
                "parameters at adaptations {} and {j} embed into different dimensions",
                j - 1
            )));
        }
        sum += a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
    }
    Ok(sum / (k as f64).powf(rho))
}
