//! End-to-end simulation of AIR chains, rate diagnostics, and replication
//! studies.
//!
//! A run steps the chain with the parameter installed at the current
//! window's start and invokes the update rule exactly at the adaptation
//! times T₁, T₂, …; the installed parameter and per-window acceptance
//! statistics are logged. Diagnostics renormalise the centred partial sums
//! S_n = Σ_{j≤n} (f(X_j) − ν(f)) by a configurable rate r(n) and track the
//! path-wise constant Ĉ = max_n |S_n|/r(n). Replication studies fan the same
//! configuration across derived seeds; the reduction order is fixed by
//! replication index, so results are byte-identical for any worker count.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::adaptation::{Adaptor, UpdateRule};
use crate::decomposition::Trajectory;
use crate::error::{AirError, Result};
use crate::geometry::{AugmentedState, Point, StateFn};
use crate::kernels::{KernelFamily, Param};
use crate::schedule::AirSchedule;

/// Renormalisation rate for partial-sum diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateKind {
    /// `r(n) = √n (ln n)^{1/2+ε}`: the almost-sure rate for β ≥ 1.
    SqrtLog,
    /// `r(n) = n^{1/2+ε}`: the polynomial rate for β ∈ (0, 1).
    Poly,
}

/// A rate `r(n)` together with its admissible start index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSpec {
    /// Which functional form to use.
    pub kind: RateKind,
    /// The excess exponent ε > 0.
    pub epsilon: f64,
    /// First index diagnostics are evaluated at (≥ 2; `ln 1 = 0` would
    /// divide by zero for the square-root-log kind).
    pub n_min: u64,
}

impl RateSpec {
    /// Build a rate spec, validating ε > 0 and n_min ≥ 2.
    pub fn new(kind: RateKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(AirError::Domain(format!(
                "rate exponent must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self {
            kind,
            epsilon,
            n_min: 2,
        })
    }

    /// Evaluate `r(n)`. Natural logarithm throughout.
    pub fn rate_value(&self, n: u64) -> Result<f64> {
        if n < self.n_min {
            return Err(AirError::Domain(format!(
                "rate undefined below n_min = {}: got n = {n}",
                self.n_min
            )));
        }
        let x = n as f64;
        Ok(match self.kind {
            RateKind::SqrtLog => x.sqrt() * x.ln().powf(0.5 + self.epsilon),
            RateKind::Poly => x.powf(0.5 + self.epsilon),
        })
    }
}

/// Renormalised partial-sum diagnostics for one run.
#[derive(Debug, Clone)]
pub struct RateDiagnostics {
    /// Horizon the stream was consumed to.
    pub n: u64,
    /// `(n, S_n / r(n))` at the requested checkpoints.
    pub checkpoints: Vec<(u64, f64)>,
    /// `Ĉ = max_{n_min ≤ n ≤ N} |S_n| / r(n)`.
    pub c_hat: f64,
    /// The index attaining `Ĉ`.
    pub c_hat_argmax: u64,
    /// `S_N / r(N)`.
    pub tail_value: f64,
}

/// Single-pass renormalised sums over a stream of integrand values
/// `f(X_1), ..., f(X_N)` with exactly known mean `ν(f)`.
///
/// The maximum `Ĉ` is tracked in-stream over every admissible index
/// (checkpoints only control what is reported). By construction
/// `Ĉ ≥ |S_N|/r(N)`, the path-wise bound `|S_n f − ν(f)| ≤ Ĉ r(n)/n`
/// holds for all n in range.
pub fn normalized_sums(
    f_values: &[f64],
    nu_f: f64,
    spec: &RateSpec,
    checkpoints: &[u64],
) -> Result<RateDiagnostics> {
    let n_total = f_values.len() as u64;
    if n_total < spec.n_min {
        return Err(AirError::Domain(format!(
            "stream of length {n_total} never reaches n_min = {}",
            spec.n_min
        )));
    }
    let mut want: Vec<u64> = checkpoints
        .iter()
        .copied()
        .filter(|&c| c >= spec.n_min && c <= n_total)
        .collect();
    want.sort_unstable();
    want.dedup();
    let mut next_checkpoint = 0usize;
    let mut out = Vec::with_capacity(want.len());
    let mut sum = 0.0f64;
    let mut c_hat = 0.0f64;
    let mut c_hat_argmax = spec.n_min;
    let mut tail_value = 0.0f64;
    for (i, &v) in f_values.iter().enumerate() {
        let n = i as u64 + 1;
        sum += v - nu_f;
        if n < spec.n_min {
            continue;
        }
        let normalised = sum / spec.rate_value(n)?;
        if normalised.abs() > c_hat {
            c_hat = normalised.abs();
            c_hat_argmax = n;
        }
        if next_checkpoint < want.len() && want[next_checkpoint] == n {
            out.push((n, normalised));
            next_checkpoint += 1;
        }
        if n == n_total {
            tail_value = normalised;
        }
    }
    Ok(RateDiagnostics {
        n: n_total,
        checkpoints: out,
        c_hat,
        c_hat_argmax,
        tail_value,
    })
}

/// Geometric checkpoint grid `⌈n_min · 1.1^k⌉`, deduplicated, capped at and
/// always including `n_max`.
pub fn geometric_checkpoints(n_min: u64, n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let value = (n_min as f64 * 1.1f64.powi(k as i32)).ceil() as u64;
        if value >= n_max {
            break;
        }
        if out.last() != Some(&value) {
            out.push(value);
        }
        k += 1;
        if k > 400 {
            break;
        }
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    out
}

/// Extend an integrand on X to `h = f · 1_Φ` on the augmented state space,
/// where Φ is the region `phi = 0`.
pub fn extend_integrand(f: StateFn) -> StateFn {
    Arc::new(move |y: &AugmentedState| if y.phi == 0 { f(y) } else { 0.0 })
}

/// A full simulation configuration.
#[derive(Clone)]
pub struct RunConfig {
    /// The kernel family stepped by the run.
    pub family: KernelFamily,
    /// The update rule invoked at adaptation times.
    pub rule: UpdateRule,
    /// Schedule exponent β > 0.
    pub beta: f64,
    /// Deterministic initial state Y₀.
    pub y0: AugmentedState,
    /// Deterministic initial parameter Γ₀.
    pub gamma0: Param,
    /// Horizon N ≥ 2.
    pub horizon: u64,
    /// Integrand f on X; it is extended to `h = f · 1_Φ` internally.
    pub f: StateFn,
    /// Exact ν(f) when known; required for rate diagnostics.
    pub nu_f: Option<f64>,
    /// Renormalisation rate.
    pub rate: RateSpec,
    /// Replication count R ≥ 1.
    pub replications: u64,
    /// Master seed; per-replication seeds are derived by `splitmix64`.
    pub master_seed: u64,
}

impl RunConfig {
    /// Validate the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(AirError::Domain(format!(
                "horizon must be at least 2, got {}",
                self.horizon
            )));
        }
        if self.replications < 1 {
            return Err(AirError::Domain("replication count must be at least 1".into()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(AirError::Domain(format!(
                "schedule exponent must be positive and finite, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// One derived seed per replication: standard splitmix64 finalizer over the
/// master seed advanced by the golden-ratio increment.
pub fn splitmix64(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One row of the per-window parameter log.
#[derive(Debug, Clone)]
pub struct WindowLog {
    /// Adaptation index m ≥ 1.
    pub m: u64,
    /// The adaptation time T_m.
    pub time: u64,
    /// Parameter installed at T_m (generating the next window).
    pub installed: Param,
    /// Acceptance rate of the window that just closed.
    pub acceptance_rate: Option<f64>,
    /// Length of the window that just closed.
    pub window_steps: u64,
}

/// Everything one simulation produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// States and installed parameters over 0..=N.
    pub trajectory: Trajectory,
    /// Parameter log, one entry per completed adaptation.
    pub windows: Vec<WindowLog>,
    /// `h(Y_1), ..., h(Y_N)` with `h = f · 1_Φ`.
    pub f_values: Vec<f64>,
}

/// The scalar summary fed to update rules observing the chain: the label
/// for finite chains, the first coordinate for continuous ones.
fn state_statistic(y: &AugmentedState) -> f64 {
    match &y.x {
        Point::Label(i) => *i as f64,
        Point::Coords(v) => v.first().copied().unwrap_or(0.0),
    }
}

fn check_finite(y: &AugmentedState, step: u64) -> Result<()> {
    if let Point::Coords(v) = &y.x {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(AirError::Kernel(format!(
                "non-finite state at step {step}: {v:?}"
            )));
        }
    }
    Ok(())
}

/// Simulate one AIR chain: step with the installed parameter, adapt exactly
/// at T₁, T₂, … (including an adaptation landing on the horizon itself), and
/// log the parameter path. Deterministic given `(config, seed)`.
pub fn run_air(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    let sched = AirSchedule::new(config.beta)?;
    let h = extend_integrand(config.f.clone());
    let n = config.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adaptor = Adaptor::new(config.rule.clone());
    let mut param = config.gamma0.clone();
    let mut states = Vec::with_capacity(n as usize + 1);
    let mut params = Vec::with_capacity(n as usize + 1);
    let mut f_values = Vec::with_capacity(n as usize);
    let mut windows = Vec::new();
    states.push(config.y0.clone());
    params.push(param.clone());
    let mut m_next = 1u64;
    let mut t_next = sched.adaptation_time(1)?;
    let mut window_start = 0u64;
    for j in 1..=n {
        let (y, accepted) = config.family.step(&param, &states[j as usize - 1], &mut rng)?;
        check_finite(&y, j)?;
        adaptor.observe(state_statistic(&y), accepted);
        f_values.push(h(&y));
        states.push(y);
        if j == t_next {
            let acceptance_rate = adaptor.stats.window_acceptance_rate();
            let new_param = adaptor.adapt(m_next, &param)?;
            windows.push(WindowLog {
                m: m_next,
                time: t_next,
                installed: new_param.clone(),
                acceptance_rate,
                window_steps: t_next - window_start,
            });
            param = new_param;
            window_start = t_next;
            m_next += 1;
            t_next = sched.adaptation_time(m_next)?;
        }
        params.push(param.clone());
    }
    Ok(RunOutput {
        trajectory: Trajectory::new(states, params)?,
        windows,
        f_values,
    })
}

/// The installed-parameter path `Γ_{T_0}, Γ_{T_1}, ..., Γ_{T_m}` of a run.
pub fn adaptation_path(config: &RunConfig, output: &RunOutput) -> Vec<Param> {
    let mut path = Vec::with_capacity(output.windows.len() + 1);
    path.push(config.gamma0.clone());
    path.extend(output.windows.iter().map(|w| w.installed.clone()));
    path
}

/// Waning statistics at every epoch: entry `k − 1` holds
/// `(1/k^ρ) Σ_{j=1}^k ‖Γ_{T_j} − Γ_{T_{j−1}}‖`, computed incrementally.
pub fn waning_path(params: &[Param], rho: f64) -> Result<Vec<f64>> {
    if params.len() < 2 {
        return Ok(Vec::new());
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(AirError::Domain(format!(
            "waning exponent must lie in (0, 1), got {rho}"
        )));
    }
    let mut out = Vec::with_capacity(params.len() - 1);
    let mut sum = 0.0f64;
    let mut prev = params[0].embed();
    for (k, param) in params.iter().enumerate().skip(1) {
        let cur = param.embed();
        if cur.len() != prev.len() {
            return Err(AirError::Domain(
                "parameter path mixes embedding dimensions".into(),
            ));
        }
        sum += cur
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        out.push(sum / (k as f64).powf(rho));
        prev = cur;
    }
    Ok(out)
}

/// Least-squares slope of `ln Σ_{j≤k} ‖ΔΓ_j‖` against `ln k` over the second
/// half of the adaptation epochs: the measured waning exponent ρ̂. `None`
/// when fewer than two usable epochs exist; exactly 0 for a frozen path.
pub fn measure_rho(params: &[Param]) -> Option<f64> {
    if params.len() < 3 {
        return None;
    }
    let mut sums = Vec::with_capacity(params.len() - 1);
    let mut total = 0.0f64;
    let mut prev = params[0].embed();
    for param in params.iter().skip(1) {
        let cur = param.embed();
        total += cur
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        sums.push(total);
        prev = cur;
    }
    if total == 0.0 {
        return Some(0.0);
    }
    let m = sums.len();
    let points: Vec<(f64, f64)> = (m / 2..m)
        .filter(|&i| sums[i] > 0.0)
        .map(|i| ((i as f64 + 1.0).ln(), sums[i].ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    Some(sxy / sxx)
}

/// Per-replication study results.
#[derive(Debug, Clone)]
pub struct ReplicationRecord {
    /// Replication index.
    pub rep: u64,
    /// Derived seed.
    pub seed: u64,
    /// Path-wise constant over this replication.
    pub c_hat: f64,
    /// `S_N / r(N)`.
    pub tail_value: f64,
    /// Empirical mean of the integrand, `(1/N) Σ f(X_j)`.
    pub mean_f: f64,
    /// Whether the chain never left its initial state.
    pub stuck: bool,
    /// Measured waning exponent of the parameter path.
    pub rho_hat: Option<f64>,
    /// Waning statistic at ρ = 1/2 per adaptation epoch.
    pub waning: Vec<f64>,
    /// Parameter in force at the horizon.
    pub final_param: Param,
}

/// Across-replication aggregates.
#[derive(Debug, Clone)]
pub struct StudySummary {
    /// Replication count.
    pub replications: u64,
    /// Horizon.
    pub horizon: u64,
    /// Mean of Ĉ over replications.
    pub c_hat_mean: f64,
    /// Median of Ĉ.
    pub c_hat_median: f64,
    /// Maximum Ĉ.
    pub c_hat_max: f64,
    /// Median |tail value|.
    pub tail_abs_median: f64,
    /// 95th percentile of |tail value|.
    pub tail_abs_q95: f64,
    /// Fraction of replications with |tail value| < 0.1.
    pub tail_within_tenth: f64,
    /// Across-replication mean of `mean_f`.
    pub mean_f_mean: f64,
    /// Standard error of that mean.
    pub mean_f_se: f64,
    /// Strong-law failure flag: mean_f deviates from ν(f) by more than five
    /// standard errors. `None` when ν(f) is unknown.
    pub lln_failure: Option<bool>,
    /// Fraction of replications that never left the initial state.
    pub stuck_fraction: f64,
    /// Binomial standard error of the stuck fraction.
    pub stuck_se: f64,
    /// Whether the ρ = 1/2 waning statistic is non-increasing over the last
    /// half of adaptation epochs (reported, not fatal); `None` when the rule
    /// is not acceptance targeting or there are too few epochs.
    pub waning_decreasing: Option<bool>,
    /// Median measured waning exponent.
    pub rho_hat_median: Option<f64>,
}

/// A complete replication study: ordered per-replication records plus the
/// sequentially folded summary.
#[derive(Debug, Clone)]
pub struct Study {
    /// One record per replication, in replication order.
    pub records: Vec<ReplicationRecord>,
    /// Aggregates folded in replication order.
    pub summary: StudySummary,
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

fn run_one_replication(config: &RunConfig, rep: u64) -> Result<ReplicationRecord> {
    let seed = splitmix64(config.master_seed, rep);
    let output = run_air(config, seed)?;
    let n = config.horizon;
    let checkpoints = geometric_checkpoints(config.rate.n_min, n);
    let (c_hat, tail_value) = match config.nu_f {
        Some(nu_f) => {
            let diag = normalized_sums(&output.f_values, nu_f, &config.rate, &checkpoints)?;
            (diag.c_hat, diag.tail_value)
        }
        None => (f64::NAN, f64::NAN),
    };
    let mean_f = output.f_values.iter().sum::<f64>() / n as f64;
    let stuck = output
        .trajectory
        .states
        .iter()
        .all(|y| *y == config.y0);
    let path = adaptation_path(config, &output);
    let waning = waning_path(&path, 0.5)?;
    let rho_hat = measure_rho(&path);
    let final_param = output.trajectory.params.last().cloned().unwrap_or_else(|| config.gamma0.clone());
    Ok(ReplicationRecord {
        rep,
        seed,
        c_hat,
        tail_value,
        mean_f,
        stuck,
        rho_hat,
        waning,
        final_param,
    })
}

/// Run `R` independent replications across `workers` threads.
///
/// Seeds are derived per replication from the master seed, the parallel map
/// preserves replication order, and every aggregate is folded sequentially
/// over that order, so the study is byte-identical for any worker count.
/// Any replication failure aborts the study with that error.
pub fn replicate(config: &RunConfig, workers: usize) -> Result<Study> {
    config.validate()?;
    if workers == 0 {
        return Err(AirError::Domain("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AirError::Domain(format!("thread pool: {e}")))?;
    let records: Vec<ReplicationRecord> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| run_one_replication(config, rep))
            .collect::<Result<Vec<_>>>()
    })?;

    let r = records.len() as f64;
    let mut c_hats: Vec<f64> = records.iter().map(|x| x.c_hat).collect();
    let mut tails_abs: Vec<f64> = records.iter().map(|x| x.tail_value.abs()).collect();
    let have_diagnostics = config.nu_f.is_some();
    let c_hat_mean = if have_diagnostics {
        c_hats.iter().sum::<f64>() / r
    } else {
        f64::NAN
    };
    c_hats.sort_by(f64::total_cmp);
    tails_abs.sort_by(f64::total_cmp);
    let mean_f_mean = records.iter().map(|x| x.mean_f).sum::<f64>() / r;
    let mean_f_var = records
        .iter()
        .map(|x| (x.mean_f - mean_f_mean) * (x.mean_f - mean_f_mean))
        .sum::<f64>()
        / (r - 1.0).max(1.0);
    let mean_f_se = (mean_f_var / r).sqrt();
    let lln_failure = config
        .nu_f
        .map(|nu_f| (mean_f_mean - nu_f).abs() > 5.0 * mean_f_se);
    let stuck_count = records.iter().filter(|x| x.stuck).count() as f64;
    let stuck_fraction = stuck_count / r;
    let stuck_se = (stuck_fraction * (1.0 - stuck_fraction) / r).sqrt();
    let tail_within_tenth = if have_diagnostics {
        records
            .iter()
            .filter(|x| x.tail_value.abs() < 0.1)
            .count() as f64
            / r
    } else {
        f64::NAN
    };
    let waning_decreasing = if matches!(config.rule, UpdateRule::AcceptanceTargeting { .. }) {
        mean_waning_decreasing(&records)
    } else {
        None
    };
    let mut rhos: Vec<f64> = records.iter().filter_map(|x| x.rho_hat).collect();
    rhos.sort_by(f64::total_cmp);
    let rho_hat_median = if rhos.is_empty() {
        None
    } else {
        Some(median(&rhos))
    };
    let summary = StudySummary {
        replications: config.replications,
        horizon: config.horizon,
        c_hat_mean,
        c_hat_median: median(&c_hats),
        c_hat_max: c_hats.last().copied().unwrap_or(f64::NAN),
        tail_abs_median: median(&tails_abs),
        tail_abs_q95: quantile(&tails_abs, 0.95),
        tail_within_tenth,
        mean_f_mean,
        mean_f_se,
        lln_failure,
        stuck_fraction,
        stuck_se,
        waning_decreasing,
        rho_hat_median,
    };
    Ok(Study { records, summary })
}

/// Whether the across-replication mean waning statistic (ρ = 1/2) is
/// non-increasing over the last half of adaptation epochs.
fn mean_waning_decreasing(records: &[ReplicationRecord]) -> Option<bool> {
    let epochs = records.iter().map(|x| x.waning.len()).min().unwrap_or(0);
    if epochs < 4 {
        return None;
    }
    let mean_at = |k: usize| -> f64 {
        records.iter().map(|x| x.waning[k]).sum::<f64>() / records.len() as f64
    };
    let start = epochs / 2;
    let mut prev = mean_at(start);
    for k in start + 1..epochs {
        let cur = mean_at(k);
        if cur > prev + 1e-12 {
            return Some(false);
        }
        prev = cur;
    }
    Some(true)
}

/// The stuck-state chain study: a two-state family driven by the window-
/// matched deterministic sequence, started at the sticky state, with the
/// indicator of that state as integrand (`ν(f) = 1/2`).
///
/// A chain that never moves up to T_ℓ has probability exactly
/// `Π_{j=0}^{ℓ−1} (1 − e^{−j−1})`, which converges to ≈ 0.504428654725967:
/// a positive fraction of runs carries an empirical mean stuck at `f`'s
/// value on the initial state, so the strong law fails.
pub fn counterexample_config(
    adaptations: u64,
    replications: u64,
    master_seed: u64,
) -> Result<RunConfig> {
    if adaptations < 1 {
        return Err(AirError::Domain(
            "the stuck-chain study needs at least one adaptation".into(),
        ));
    }
    let sched = AirSchedule::new(1.0)?;
    let rule = crate::adaptation::counterexample_rule(&sched, adaptations)?;
    let gamma0 = match &rule {
        UpdateRule::FixedSequence { values, .. } => values[0].clone(),
        _ => unreachable!("the stuck-chain rule is a fixed sequence"),
    };
    let family = crate::kernels::two_state_family();
    let f: StateFn = Arc::new(|y: &AugmentedState| match &y.x {
        Point::Label(1) => 1.0,
        _ => 0.0,
    });
    Ok(RunConfig {
        family,
        rule,
        beta: 1.0,
        y0: AugmentedState::label(1),
        gamma0,
        horizon: sched.adaptation_time(adaptations)?,
        f,
        nu_f: Some(0.5),
        rate: RateSpec::new(RateKind::Poly, 0.25)?,
        replications,
        master_seed,
    })
}

/// The limiting stuck probability `Π_{j=0}^∞ (1 − e^{−j−1})`, accurate to
/// well below 1e-12 (factors beyond j = 40 differ from 1 by < 1e-17).
pub fn stuck_probability_limit() -> f64 {
    (0..60).map(|j| 1.0 - (-(j as f64) - 1.0).exp()).product()
}

/// Truncated stuck probability `Π_{j=0}^{ℓ−1} (1 − e^{−j−1})`.
pub fn stuck_probability(adaptations: u64) -> f64 {
    (0..adaptations)
        .map(|j| 1.0 - (-(j as f64) - 1.0).exp())
        .product()
}

/// One cell of a theorem-admissibility sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    /// Schedule exponent.
    pub beta: f64,
    /// Rate excess exponent.
    pub epsilon: f64,
    /// Square-root-log rate hypothesis: β ≥ 1 (any ε > 0).
    pub sqrt_log_admissible: bool,
    /// Polynomial rate hypothesis: β ∈ (0, 1) and ε > 1/(1+β) − 1/2.
    pub poly_admissible: bool,
    /// Moment-regime hypothesis for order p: ε > max{0, 1/(1+β) + 1/p − 1/2}.
    pub moment_admissible: Option<bool>,
    /// Waning-adaptation hypothesis: β ≥ 2ρ − 1 for the measured ρ.
    pub waning_admissible: Option<bool>,
    /// Measured |tail value| when any hypothesis is admissible.
    pub tail_value: Option<f64>,
}

/// Pure admissibility arithmetic for one `(β, ε)` cell.
pub fn admissibility(
    beta: f64,
    epsilon: f64,
    p: Option<f64>,
    rho: Option<f64>,
) -> (bool, bool, Option<bool>, Option<bool>) {
    let sqrt_log = beta >= 1.0 && epsilon > 0.0;
    let poly = beta > 0.0 && beta < 1.0 && epsilon > 1.0 / (1.0 + beta) - 0.5;
    let moment = p.map(|p| epsilon > (1.0 / (1.0 + beta) + 1.0 / p - 0.5).max(0.0));
    let waning = rho.map(|rho| beta >= 2.0 * rho - 1.0);
    (sqrt_log, poly, moment, waning)
}

/// Sweep a `(β, ε)` grid, marking each theorem's hypothesis and measuring
/// the tail normalised value of one seeded run per admissible cell. The
/// template's rate kind is kept; β and ε vary per cell.
pub fn theorem_sweep(
    template: &RunConfig,
    betas: &[f64],
    epsilons: &[f64],
    p: Option<f64>,
    rho: Option<f64>,
) -> Result<Vec<SweepCell>> {
    if betas.is_empty() || epsilons.is_empty() {
        return Err(AirError::Domain("sweep grids must be nonempty".into()));
    }
    let mut cells = Vec::with_capacity(betas.len() * epsilons.len());
    for (bi, &beta) in betas.iter().enumerate() {
        for (ei, &epsilon) in epsilons.iter().enumerate() {
            let (sqrt_log, poly, moment, waning) = admissibility(beta, epsilon, p, rho);
            let admissible =
                sqrt_log || poly || moment.unwrap_or(false) || waning.unwrap_or(false);
            let tail_value = if admissible {
                let mut config = template.clone();
                config.beta = beta;
                config.rate = RateSpec::new(template.rate.kind, epsilon)?;
                let seed = splitmix64(template.master_seed, (bi * epsilons.len() + ei) as u64);
                let output = run_air(&config, seed)?;
                let nu_f = config.nu_f.ok_or_else(|| {
                    AirError::Domain("sweep measurement needs exact ν(f)".into())
                })?;
                let diag = normalized_sums(
                    &output.f_values,
                    nu_f,
                    &config.rate,
                    &geometric_checkpoints(config.rate.n_min, config.horizon),
                )?;
                Some(diag.tail_value.abs())
            } else {
                None
            };
            cells.push(SweepCell {
                beta,
                epsilon,
                sqrt_log_admissible: sqrt_log,
                poly_admissible: poly,
                moment_admissible: moment,
                waning_admissible: waning,
                tail_value,
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{waning_statistic, ParamBox};
    use crate::kernels::{doeblin_family, two_state_family};
    use rand::Rng;

    fn two_state_config(values: Vec<f64>, beta: f64, horizon: u64) -> RunConfig {
        let family = two_state_family();
        let gamma0 = Param::Scalar(values[0]);
        let f: StateFn = Arc::new(|y: &AugmentedState| match &y.x {
            Point::Label(0) => 1.0,
            _ => 0.0,
        });
        RunConfig {
            family,
            rule: UpdateRule::FixedSequence {
                values: values.into_iter().map(Param::Scalar).collect(),
                cycle: false,
            },
            beta,
            y0: AugmentedState::label(0),
            gamma0,
            horizon,
            f,
            nu_f: Some(0.5),
            rate: RateSpec::new(RateKind::SqrtLog, 0.5).unwrap(),
            replications: 1,
            master_seed: 99,
        }
    }

    #[test]
    fn rate_value_frozen_examples() {
        let poly = RateSpec::new(RateKind::Poly, 0.5).unwrap();
        assert_eq!(poly.rate_value(16).unwrap(), 16.0);
        let sqrt_log = RateSpec::new(RateKind::SqrtLog, 0.5).unwrap();
        let at7 = sqrt_log.rate_value(7).unwrap();
        let at8 = sqrt_log.rate_value(8).unwrap();
        assert!((at7 - 5.148394328076988).abs() < 1e-12, "{at7}");
        assert!((at8 - 5.881548860811283).abs() < 1e-12, "{at8}");
    }

    #[test]
    fn rate_value_below_start_index_errors() {
        let spec = RateSpec::new(RateKind::SqrtLog, 0.5).unwrap();
        assert!(spec.rate_value(1).is_err());
        assert!(spec.rate_value(2).is_ok());
        assert!(RateSpec::new(RateKind::Poly, 0.0).is_err());
        assert!(RateSpec::new(RateKind::Poly, -0.1).is_err());
    }

    #[test]
    fn rate_value_monotone_from_three() {
        for kind in [RateKind::SqrtLog, RateKind::Poly] {
            for epsilon in [0.01, 0.5, 1.5] {
                let spec = RateSpec::new(kind, epsilon).unwrap();
                let mut prev = spec.rate_value(3).unwrap();
                let mut n = 3u64;
                while n < 1_000_000 {
                    n = (n * 11).div_euclid(10).max(n + 1);
                    let cur = spec.rate_value(n).unwrap();
                    assert!(
                        cur > prev,
                        "{kind:?} ε = {epsilon}: r({n}) = {cur} vs previous {prev}"
                    );
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn constant_stream_has_zero_diagnostics() {
        let spec = RateSpec::new(RateKind::Poly, 0.25).unwrap();
        let values = vec![1.25; 400];
        let diag = normalized_sums(&values, 1.25, &spec, &[10, 400]).unwrap();
        assert_eq!(diag.c_hat, 0.0);
        assert_eq!(diag.tail_value, 0.0);
        assert!(diag.checkpoints.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn diagnostics_match_brute_force_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = RateSpec::new(RateKind::SqrtLog, 0.25).unwrap();
        let checkpoints = geometric_checkpoints(2, 500);
        let diag = normalized_sums(&values, 0.1, &spec, &checkpoints).unwrap();
        let mut best = 0.0f64;
        let mut best_n = 2;
        for n in 2..=500usize {
            let s: f64 = values[..n].iter().map(|v| v - 0.1).sum();
            let ratio = s.abs() / spec.rate_value(n as u64).unwrap();
            if ratio > best {
                best = ratio;
                best_n = n;
            }
        }
        assert_eq!(diag.c_hat, best);
        assert_eq!(diag.c_hat_argmax as usize, best_n);
        assert!(diag.c_hat >= diag.tail_value.abs());
        for &(n, v) in &diag.checkpoints {
            let s: f64 = values[..n as usize].iter().map(|x| x - 0.1).sum();
            assert_eq!(v, s / spec.rate_value(n).unwrap());
        }
    }

    #[test]
    fn checkpoints_are_geometric_and_complete() {
        let grid = geometric_checkpoints(2, 1_000_000);
        assert_eq!(*grid.first().unwrap(), 2);
        assert_eq!(*grid.last().unwrap(), 1_000_000);
        for w in grid.windows(2) {
            assert!(w[1] > w[0], "not strictly increasing: {w:?}");
            assert!(
                (w[1] as f64) <= (w[0] as f64) * 1.1 + 2.0,
                "gap too wide: {w:?}"
            );
        }
        assert!(grid.len() < 200, "O(log N) grid, got {}", grid.len());
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let config = two_state_config(vec![0.25, 0.4, 0.3], 1.0, 300);
        let a = run_air(&config, 42).unwrap();
        let b = run_air(&config, 42).unwrap();
        assert_eq!(a.trajectory.states, b.trajectory.states);
        assert_eq!(a.f_values, b.f_values);
        let c = run_air(&config, 43).unwrap();
        assert_ne!(a.trajectory.states, c.trajectory.states);
    }

    #[test]
    fn parameters_switch_exactly_at_adaptation_times() {
        let values = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let config = two_state_config(values.clone(), 1.0, 30);
        let output = run_air(&config, 7).unwrap();
        let sched = AirSchedule::new(1.0).unwrap();
        for j in 0..=30u64 {
            let m = sched.completed_adaptations(j).unwrap() as usize;
            let expect = values[m.min(values.len() - 1)];
            let got = output.trajectory.params[j as usize].as_scalar().unwrap();
            assert_eq!(got, expect, "Γ_{j} wrong");
        }
        // β = 1: T = 1, 3, 6, 10, 15, 21, 28, so seven adaptations by n = 30.
        assert_eq!(output.windows.len(), 7);
        assert_eq!(
            output.windows.iter().map(|w| w.time).collect::<Vec<_>>(),
            vec![1, 3, 6, 10, 15, 21, 28]
        );
    }

    #[test]
    fn adaptation_landing_on_horizon_still_installs() {
        let config = two_state_config(vec![0.1, 0.2, 0.3, 0.4], 1.0, 6);
        let output = run_air(&config, 7).unwrap();
        // T_3 = 6 = N: three windows closed, Γ_N is the fresh value.
        assert_eq!(output.windows.len(), 3);
        assert_eq!(
            output.trajectory.params.last().unwrap().as_scalar().unwrap(),
            0.4
        );
    }

    #[test]
    fn window_log_lengths_match_schedule() {
        let config = two_state_config(vec![0.25], 1.5, 100);
        let output = run_air(&config, 11).unwrap();
        let sched = AirSchedule::new(1.5).unwrap();
        for w in &output.windows {
            assert_eq!(w.window_steps, sched.window_length(w.m).unwrap());
            assert_eq!(w.time, sched.adaptation_time(w.m).unwrap());
            assert!(w.acceptance_rate.is_some());
        }
    }

    #[test]
    fn stuck_paths_follow_the_partial_products() {
        // R = 2000 at T_5: the stuck fraction estimates
        // Π_{j=0}^{4}(1 − e^{−j−1}) ≈ 0.506412370327305 within 3 SE.
        let config = counterexample_config(5, 2000, 20240818).unwrap();
        let study = replicate(&config, 4).unwrap();
        let theta_5 = stuck_probability(5);
        assert!((theta_5 - 0.506412370327305).abs() < 1e-12);
        let se = (theta_5 * (1.0 - theta_5) / 2000.0).sqrt();
        assert!(
            (study.summary.stuck_fraction - theta_5).abs() <= 3.0 * se,
            "stuck fraction {} vs {theta_5} (SE {se})",
            study.summary.stuck_fraction
        );
    }

    #[test]
    fn stuck_limit_matches_frozen_constant() {
        assert!((stuck_probability_limit() - 0.504428654725967).abs() < 1e-12);
        assert!((stuck_probability(20) - 0.504428655331051).abs() < 1e-12);
    }

    #[test]
    fn counterexample_flags_strong_law_failure() {
        // The across-replication mean sits near θ·1 + (1−θ)·(escapee mean)
        // ≈ 0.55, about 0.05 above ν(f) = 1/2, while the replication spread
        // is ≈ 0.45 (the mean is bimodal); five standard errors fall below
        // the deviation once R reaches a few thousand.
        let config = counterexample_config(8, 10_000, 7).unwrap();
        let study = replicate(&config, 4).unwrap();
        assert_eq!(
            study.summary.lln_failure,
            Some(true),
            "mean {} vs 0.5 with SE {}",
            study.summary.mean_f_mean,
            study.summary.mean_f_se
        );
        // Stuck replications keep the empirical mean pinned at f(Y_0) = 1.
        for rec in study.records.iter().filter(|x| x.stuck) {
            assert_eq!(rec.mean_f, 1.0, "rep {}", rec.rep);
        }
    }

    #[test]
    fn healthy_chain_does_not_flag_lln() {
        let config = two_state_config(vec![0.25], 1.0, 4000);
        let mut config = config;
        config.replications = 100;
        let study = replicate(&config, 4).unwrap();
        assert_eq!(study.summary.lln_failure, Some(false));
        assert!(study.summary.stuck_fraction == 0.0);
    }

    #[test]
    fn worker_count_never_changes_the_study() {
        let mut config = two_state_config(vec![0.25, 0.4], 1.0, 200);
        config.replications = 16;
        let base = replicate(&config, 1).unwrap();
        for workers in [2, 4, 8] {
            let other = replicate(&config, workers).unwrap();
            assert_eq!(base.records.len(), other.records.len());
            for (a, b) in base.records.iter().zip(other.records.iter()) {
                assert_eq!(a.seed, b.seed);
                assert_eq!(a.c_hat.to_bits(), b.c_hat.to_bits());
                assert_eq!(a.tail_value.to_bits(), b.tail_value.to_bits());
                assert_eq!(a.mean_f.to_bits(), b.mean_f.to_bits());
            }
            assert_eq!(
                base.summary.c_hat_mean.to_bits(),
                other.summary.c_hat_mean.to_bits()
            );
            assert_eq!(
                base.summary.tail_abs_median.to_bits(),
                other.summary.tail_abs_median.to_bits()
            );
        }
    }

    #[test]
    fn full_regeneration_family_matches_its_law_by_chi_square() {
        // α = 1 regenerates from η every step: states are i.i.d. draws.
        let family = doeblin_family(5, 1.0, 1, 31).unwrap();
        let eta = family.invariant_law(&Param::Index(0)).unwrap();
        let f: StateFn = Arc::new(|y: &AugmentedState| match &y.x {
            Point::Label(i) => *i as f64,
            _ => f64::NAN,
        });
        let nu_f: f64 = (0..5).map(|i| i as f64 * eta[i]).sum();
        let config = RunConfig {
            family,
            rule: UpdateRule::FixedSequence {
                values: vec![Param::Index(0)],
                cycle: false,
            },
            beta: 1.0,
            y0: AugmentedState::label(0),
            gamma0: Param::Index(0),
            horizon: 20_000,
            f,
            nu_f: Some(nu_f),
            rate: RateSpec::new(RateKind::Poly, 0.25).unwrap(),
            replications: 1,
            master_seed: 5,
        };
        let output = run_air(&config, 77).unwrap();
        let mut counts = [0usize; 5];
        for y in &output.trajectory.states[1..] {
            match &y.x {
                Point::Label(i) => counts[*i] += 1,
                _ => unreachable!(),
            }
        }
        let n = 20_000.0;
        let chi2: f64 = (0..5)
            .map(|i| {
                let expected = eta[i] * n;
                let diff = counts[i] as f64 - expected;
                diff * diff / expected
            })
            .sum();
        // df = 4; the 99.9th percentile is 18.47.
        assert!(chi2 < 18.47, "chi-square {chi2} with counts {counts:?}");
    }

    #[test]
    fn iid_tail_values_concentrate_at_clt_scale() {
        // i.i.d. chain, poly ε = 0.25: S_N/N^{0.75} has standard deviation
        // σ N^{-1/4}; at N = 10⁴ that is 0.1 σ with σ = 1/2 for a balanced
        // indicator, so a 0.1 band holds with large margin.
        let family = doeblin_family(2, 1.0, 1, 8).unwrap();
        let eta = family.invariant_law(&Param::Index(0)).unwrap();
        let f: StateFn = Arc::new(|y: &AugmentedState| match &y.x {
            Point::Label(0) => 1.0,
            _ => 0.0,
        });
        let config = RunConfig {
            family,
            rule: UpdateRule::FixedSequence {
                values: vec![Param::Index(0)],
                cycle: false,
            },
            beta: 1.0,
            y0: AugmentedState::label(0),
            gamma0: Param::Index(0),
            horizon: 10_000,
            f,
            nu_f: Some(eta[0]),
            rate: RateSpec::new(RateKind::Poly, 0.25).unwrap(),
            replications: 100,
            master_seed: 303,
        };
        let study = replicate(&config, 4).unwrap();
        let hits = study
            .records
            .iter()
            .filter(|x| x.tail_value.abs() < 0.1)
            .count();
        assert!(
            hits >= 95,
            "only {hits}/100 inside the 0.1 band; median {}",
            study.summary.tail_abs_median
        );
    }

    #[test]
    fn waning_path_matches_the_direct_statistic() {
        let params: Vec<Param> = [0.9, 0.5, 0.3, 0.35, 0.33, 0.34]
            .iter()
            .map(|&x| Param::Scalar(x))
            .collect();
        let path = waning_path(&params, 0.5).unwrap();
        assert_eq!(path.len(), 5);
        for k in 1..=5usize {
            let direct = waning_statistic(&params, 0.5, k).unwrap();
            assert!(
                (path[k - 1] - direct).abs() < 1e-15,
                "epoch {k}: {} vs {direct}",
                path[k - 1]
            );
        }
    }

    #[test]
    fn measured_rho_recovers_power_growth() {
        // The path Γ_{T_k} = k^ρ has monotone increments, so the cumulative
        // increment mass at epoch k telescopes to exactly k^ρ and the
        // log-log regression must recover ρ to rounding error.
        for rho in [0.3, 0.5, 0.8] {
            let params: Vec<Param> = (0..400u32)
                .map(|k| Param::Scalar((k as f64).powf(rho)))
                .collect();
            let got = measure_rho(&params).unwrap();
            assert!(
                (got - rho).abs() < 1e-6,
                "target {rho}: measured {got}"
            );
        }
        let frozen: Vec<Param> = (0..10).map(|_| Param::Scalar(0.4)).collect();
        assert_eq!(measure_rho(&frozen), Some(0.0));
    }

    #[test]
    fn acceptance_targeting_reports_waning_audit() {
        let family = two_state_family();
        let f: StateFn = Arc::new(|y: &AugmentedState| match &y.x {
            Point::Label(0) => 1.0,
            _ => 0.0,
        });
        let config = RunConfig {
            family,
            rule: UpdateRule::AcceptanceTargeting {
                target: 0.5,
                gain_exponent: 0.6,
                bounds: ParamBox::new(0.05, 0.95).unwrap(),
            },
            beta: 1.0,
            y0: AugmentedState::label(0),
            gamma0: Param::Scalar(0.3),
            horizon: 3000,
            f,
            nu_f: Some(0.5),
            rate: RateSpec::new(RateKind::SqrtLog, 0.5).unwrap(),
            replications: 30,
            master_seed: 1234,
        };
        let study = replicate(&config, 4).unwrap();
        assert!(
            study.summary.waning_decreasing.is_some(),
            "acceptance targeting must report the waning audit"
        );
        assert!(study.summary.rho_hat_median.is_some());
    }

    #[test]
    fn sweep_admissibility_matches_stated_thresholds() {
        let (s, p34, m, w) = admissibility(1.0, 0.01, None, None);
        assert!(s && !p34);
        assert_eq!(m, None);
        assert_eq!(w, None);
        // 1/(1 + 0.5) − 1/2 = 1/6 ≈ 0.1667 > 0.1.
        let (_, p34, _, _) = admissibility(0.5, 0.1, None, None);
        assert!(!p34);
        let (_, p34, _, _) = admissibility(0.5, 0.2, None, None);
        assert!(p34);
        // β = 1, p = 4: threshold max{0, 1/2 + 1/4 − 1/2} = 1/4.
        let (_, _, m, _) = admissibility(1.0, 0.3, Some(4.0), None);
        assert_eq!(m, Some(true));
        let (_, _, m, _) = admissibility(1.0, 0.2, Some(4.0), None);
        assert_eq!(m, Some(false));
        // ρ = 0.6 needs β ≥ 0.2.
        let (_, _, _, w) = admissibility(0.2, 0.1, None, Some(0.6));
        assert_eq!(w, Some(true));
        let (_, _, _, w) = admissibility(0.1, 0.1, None, Some(0.6));
        assert_eq!(w, Some(false));
    }

    #[test]
    fn sweep_measures_only_admissible_cells() {
        let template = two_state_config(vec![0.25], 1.0, 200);
        let cells = theorem_sweep(&template, &[0.5, 1.0], &[0.05, 0.3], Some(4.0), None).unwrap();
        assert_eq!(cells.len(), 4);
        for cell in &cells {
            let admissible = cell.sqrt_log_admissible
                || cell.poly_admissible
                || cell.moment_admissible.unwrap_or(false)
                || cell.waning_admissible.unwrap_or(false);
            assert_eq!(cell.tail_value.is_some(), admissible, "cell {cell:?}");
        }
        // β = 0.5, ε = 0.05 fails every hypothesis (1/6 threshold, moment
        // threshold 5/12); β = 1 cells pass the square-root-log test.
        assert!(cells
            .iter()
            .find(|c| c.beta == 0.5 && c.epsilon == 0.05)
            .unwrap()
            .tail_value
            .is_none());
        assert!(cells
            .iter()
            .find(|c| c.beta == 1.0 && c.epsilon == 0.05)
            .unwrap()
            .tail_value
            .is_some());
    }

    #[test]
    fn splitmix_seeds_are_distinct_and_stable() {
        let a = splitmix64(0, 0);
        let b = splitmix64(0, 1);
        let c = splitmix64(1, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, splitmix64(0, 0));
        let mut seen = std::collections::HashSet::new();
        for r in 0..10_000u64 {
            assert!(seen.insert(splitmix64(777, r)), "collision at {r}");
        }
    }

    #[test]
    fn integrand_extension_vanishes_off_the_region() {
        let f: StateFn = Arc::new(|_: &AugmentedState| 3.5);
        let h = extend_integrand(f);
        assert_eq!(h(&AugmentedState::label(0)), 3.5);
        assert_eq!(h(&AugmentedState::labeled(0, 1)), 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = two_state_config(vec![0.25], 1.0, 100);
        config.horizon = 1;
        assert!(config.validate().is_err());
        let mut config = two_state_config(vec![0.25], 1.0, 100);
        config.replications = 0;
        assert!(config.validate().is_err());
        let mut config = two_state_config(vec![0.25], 1.0, 100);
        config.beta = 0.0;
        assert!(config.validate().is_err());
    }
}
