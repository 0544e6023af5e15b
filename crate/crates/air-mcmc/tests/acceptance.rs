//! End-to-end acceptance gate: ten numbered criteria covering contraction
//! coefficients, Poisson solutions and their uniform bound, the pathwise
//! decomposition identity, transport duality, drift audits, the stuck-chain
//! counterexample, large-horizon rate concentration, schedule envelopes,
//! and bit-level reproducibility across worker counts.
//!
//! Each criterion prints one `[PASS]`/`[FAIL]` line (visible under
//! `cargo test --test acceptance -- --nocapture`) with its runtime and
//! budget; the test fails if any criterion fails or overruns its budget.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use air_mcmc::decomposition::decompose;
use air_mcmc::runner::RunConfig;
use air_mcmc::schedule::AirSchedule;
use air_mcmc::{
    contraction_coefficient, counterexample_config, doeblin_family, duality_gap, fit_drift,
    lipschitz_constant, lyapunov_audit, parse_config, poisson_bound_check, poisson_solve,
    replicate, state_fn_from_table, stuck_probability_limit, study_text, two_state_family,
    two_state_matrix, wasserstein, AugmentedState, DistanceLike, Param, RateKind, RateSpec,
    StateFn, UpdateRule,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn err<T>(e: T) -> String
where
    T: std::fmt::Display,
{
    e.to_string()
}

/// Strictly positive rows keep every random kernel irreducible and
/// aperiodic, so stationary laws are unique and one-step contraction under
/// the trivial distance is strict.
fn random_stochastic(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut p = DMatrix::from_fn(n, n, |_, _| 0.02 + rng.gen::<f64>());
    for i in 0..n {
        let row_sum: f64 = p.row(i).iter().sum();
        for j in 0..n {
            p[(i, j)] /= row_sum;
        }
    }
    p
}

fn random_law(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn label_support(n: usize) -> Vec<AugmentedState> {
    (0..n).map(AugmentedState::label).collect()
}

/// The 500 shared Poisson instances: kernel sizes 2..=20 and integrand
/// values in [-1, 1], regenerated deterministically wherever needed.
fn poisson_instances() -> Vec<(DMatrix<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    (0..500)
        .map(|_| {
            let n = rng.gen_range(2..=20);
            let p = random_stochastic(n, &mut rng);
            let f = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            (p, f)
        })
        .collect()
}

fn criterion_two_state_contraction() -> Outcome {
    let support = label_support(2);
    let d = DistanceLike::trivial();
    let mut max_err = 0.0f64;
    for i in 1..=19 {
        let gamma = i as f64 * 0.05;
        let p = two_state_matrix(gamma).map_err(err)?;
        let report = contraction_coefficient(&p, &d, &support, 1).map_err(err)?;
        let exact = (1.0 - 2.0 * gamma).abs();
        let e = (report.tau_ell - exact).abs();
        if e > max_err {
            max_err = e;
        }
    }
    if max_err > 1e-10 {
        return Err(format!(
            "contraction coefficient strays {max_err:.3e} from |1 - 2 gamma|, tolerance 1e-10"
        ));
    }
    Ok(format!(
        "tau equals |1 - 2 gamma| for 19 flip probabilities, max error {max_err:.1e}"
    ))
}

fn criterion_poisson_exactness() -> Outcome {
    let mut worst_residual = 0.0f64;
    let mut worst_series = 0.0f64;
    for (k, (p, f)) in poisson_instances().into_iter().enumerate() {
        let sol = poisson_solve(&p, &f).map_err(|e| format!("instance {k}: {e}"))?;
        if sol.residual > worst_residual {
            worst_residual = sol.residual;
        }
        if sol.series_agreement > worst_series {
            worst_series = sol.series_agreement;
        }
    }
    if worst_residual > 1e-10 {
        return Err(format!(
            "worst Poisson residual {worst_residual:.3e} exceeds 1e-10"
        ));
    }
    if worst_series > 1e-8 {
        return Err(format!(
            "worst solve-vs-series gap {worst_series:.3e} exceeds 1e-8"
        ));
    }
    Ok(format!(
        "500 kernels solved: worst residual {worst_residual:.1e}, worst series gap {worst_series:.1e}"
    ))
}

fn criterion_poisson_bound() -> Outcome {
    let d = DistanceLike::trivial();
    let mut min_slack = f64::INFINITY;
    for (k, (p, f)) in poisson_instances().into_iter().enumerate() {
        let n = p.nrows();
        let support = label_support(n);
        let sol = poisson_solve(&p, &f).map_err(|e| format!("instance {k}: {e}"))?;
        let report =
            contraction_coefficient(&p, &d, &support, 1).map_err(|e| format!("instance {k}: {e}"))?;
        let d_matrix = d.matrix(&support).map_err(err)?;
        let f_values: Vec<f64> = f.iter().copied().collect();
        let lipschitz = lipschitz_constant(&f_values, &d_matrix);
        let audit = poisson_bound_check(&sol, &d_matrix, lipschitz, &report)
            .map_err(|e| format!("instance {k}: {e}"))?;
        if !audit.ok {
            return Err(format!(
                "instance {k} ({n} states) violates the uniform bound by {:.3e}",
                -audit.min_slack
            ));
        }
        if audit.min_slack < min_slack {
            min_slack = audit.min_slack;
        }
    }

    // Tightness: the two-state chain at gamma = 1/4 with the indicator
    // integrand has u = (1, -1), tau = 1/2, eccentricity 1/2, L = 1, so the
    // bound is exactly 1 = |u| at both states.
    let p = two_state_matrix(0.25).map_err(err)?;
    let f = DVector::from_vec(vec![1.0, 0.0]);
    let support = label_support(2);
    let sol = poisson_solve(&p, &f).map_err(err)?;
    let report = contraction_coefficient(&p, &d, &support, 1).map_err(err)?;
    let d_matrix = d.matrix(&support).map_err(err)?;
    let f_values: Vec<f64> = f.iter().copied().collect();
    let lipschitz = lipschitz_constant(&f_values, &d_matrix);
    let audit = poisson_bound_check(&sol, &d_matrix, lipschitz, &report).map_err(err)?;
    if audit.min_slack.abs() > 1e-10 {
        return Err(format!(
            "two-state tight case has slack {:.3e}, expected 0 within 1e-10",
            audit.min_slack
        ));
    }
    Ok(format!(
        "bound holds on all 500 instances (tightest slack {min_slack:.2e}); two-state slack {:.1e}",
        audit.min_slack.abs()
    ))
}

fn criterion_decomposition_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEC0);
    let betas = [0.5, 1.0, 2.0];
    let mut worst_rel = 0.0f64;
    for i in 0..100u64 {
        let beta = betas[(i % 3) as usize];
        let (family, values, f, states) = if i % 2 == 0 {
            let count = rng.gen_range(2..=4);
            let values: Vec<Param> = (0..count)
                .map(|_| Param::Scalar(rng.gen_range(0.05..0.95)))
                .collect();
            let table: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (two_state_family(), values, state_fn_from_table(table), 2)
        } else {
            let n = rng.gen_range(3..=7);
            let grid = rng.gen_range(2..=4);
            let family = doeblin_family(n, 0.5, grid, rng.gen()).map_err(err)?;
            let values: Vec<Param> = (0..grid).map(Param::Index).collect();
            let table: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (family, values, state_fn_from_table(table), n)
        };
        let config = RunConfig {
            family: family.clone(),
            rule: UpdateRule::FixedSequence {
                values: values.clone(),
                cycle: true,
            },
            beta,
            y0: AugmentedState::label(rng.gen_range(0..states)),
            gamma0: values[0].clone(),
            horizon: rng.gen_range(100..=10_000),
            f: f.clone(),
            nu_f: None,
            rate: RateSpec::new(RateKind::SqrtLog, 0.5).map_err(err)?,
            replications: 1,
            master_seed: rng.gen(),
        };
        let output = run_for(&config, rng.gen()).map_err(|e| format!("run {i}: {e}"))?;

        let mut solutions = HashMap::new();
        for param in &output.trajectory.params {
            let key = param.key();
            if solutions.contains_key(&key) {
                continue;
            }
            let p = family.transition_matrix(param).map_err(err)?;
            let fv = DVector::from_fn(p.nrows(), |s, _| f(&AugmentedState::label(s)));
            let sol = poisson_solve(&p, &fv).map_err(err)?;
            solutions.insert(key, sol);
        }
        let sched = AirSchedule::new(beta).map_err(err)?;
        let report = decompose(&output.trajectory, &f, &solutions, &sched)
            .map_err(|e| format!("run {i}: {e}"))?;
        let scale = report.lhs.abs().max(1.0);
        let rel = report.identity_residual / scale;
        if rel > 1e-8 {
            return Err(format!(
                "run {i} (beta {beta}, horizon {}): relative identity residual {rel:.3e} exceeds 1e-8",
                config.horizon
            ));
        }
        if rel > worst_rel {
            worst_rel = rel;
        }
        if report.r_m.to_bits() != report.per_step_parameter_terms.to_bits() {
            return Err(format!(
                "run {i}: per-step remainder route {} differs from adaptation-time route {}",
                report.per_step_parameter_terms, report.r_m
            ));
        }
    }
    Ok(format!(
        "100 runs: worst relative identity residual {worst_rel:.1e}; remainder routes bitwise equal"
    ))
}

fn run_for(config: &RunConfig, seed: u64) -> Result<air_mcmc::runner::RunOutput, String> {
    air_mcmc::run_air(config, seed).map_err(err)
}

fn criterion_contraction_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A06);
    let mut worst_submult = f64::NEG_INFINITY;
    let mut worst_gap = f64::NEG_INFINITY;
    for k in 0..200usize {
        let n = rng.gen_range(2..=8);
        let p = random_stochastic(n, &mut rng);
        let support = label_support(n);
        let table: Vec<f64> = (0..n).map(|_| 1.0 + 3.0 * rng.gen::<f64>()).collect();
        let v: StateFn = state_fn_from_table(table);
        let q = rng.gen_range(0.2..=1.0);
        let distances = [
            DistanceLike::trivial(),
            DistanceLike::v_weighted(v.clone(), q).map_err(err)?,
            DistanceLike::weak_harris(DistanceLike::trivial(), v.clone(), q).map_err(err)?,
        ];
        for (which, d) in distances.iter().enumerate() {
            let t1 = contraction_coefficient(&p, d, &support, 1).map_err(err)?.tau_ell;
            let t2 = contraction_coefficient(&p, d, &support, 2).map_err(err)?.tau_ell;
            let t3 = contraction_coefficient(&p, d, &support, 3).map_err(err)?.tau_ell;
            for (name, lhs, rhs) in [
                ("tau_2 <= tau_1^2", t2, t1 * t1),
                ("tau_3 <= tau_1 tau_2", t3, t1 * t2),
            ] {
                let margin = lhs - rhs;
                if margin > 1e-10 * (1.0 + rhs) {
                    return Err(format!(
                        "kernel {k}, distance {which}: {name} fails by {margin:.3e}"
                    ));
                }
                if margin > worst_submult {
                    worst_submult = margin;
                }
            }

            // Contractivity of the transport value itself.
            let mu1 = random_law(n, &mut rng);
            let mu2 = random_law(n, &mut rng);
            let push = |mu: &[f64]| -> Vec<f64> {
                (0..n)
                    .map(|j| (0..n).map(|i| mu[i] * p[(i, j)]).sum())
                    .collect()
            };
            let before = wasserstein(d, &support, &mu1, &mu2).map_err(err)?;
            let after =
                wasserstein(d, &support, &push(&mu1), &push(&mu2)).map_err(err)?;
            if after > t1 * before + 1e-10 * (1.0 + t1 * before) {
                return Err(format!(
                    "kernel {k}, distance {which}: W(mu1 P, mu2 P) = {after} exceeds tau * W = {}",
                    t1 * before
                ));
            }

            // Kantorovich duality: probed lower bounds never beat the exact
            // value, and the trivial-distance probe set is exhaustive.
            let gap = duality_gap(d, &support, &mu1, &mu2, 16, rng.gen()).map_err(err)?;
            if gap.lower > gap.exact + 1e-10 {
                return Err(format!(
                    "kernel {k}, distance {which}: dual lower bound {} exceeds exact {}",
                    gap.lower, gap.exact
                ));
            }
            if which == 0 && (gap.exact - gap.lower).abs() > 1e-10 {
                return Err(format!(
                    "kernel {k}: trivial-distance duality gap {:.3e} should vanish",
                    gap.exact - gap.lower
                ));
            }
            if which == 0 && gap.gap > worst_gap {
                worst_gap = gap.gap;
            }
        }
    }
    Ok(format!(
        "200 kernels x 3 distances: submultiplicativity margin <= {worst_submult:.1e}, trivial duality gap <= {worst_gap:.1e}"
    ))
}

fn criterion_lyapunov_powers() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x17AF);
    let mut worst_slack = f64::INFINITY;
    for k in 0..100usize {
        let n = rng.gen_range(2..=15);
        let p = random_stochastic(n, &mut rng);
        let v = DVector::from_fn(n, |_, _| 1.0 + 4.0 * rng.gen::<f64>());
        let spec = fit_drift(&p, &v).map_err(|e| format!("kernel {k}: {e}"))?;
        for q in [0.25, 0.5, 0.75, 1.0] {
            let audit =
                lyapunov_audit(&p, &spec, q).map_err(|e| format!("kernel {k}, q {q}: {e}"))?;
            if !audit.ok {
                return Err(format!(
                    "kernel {k} ({n} states), q = {q}: drift audit fails with slack {:.3e}, pi(V) = {}, bound = {}",
                    audit.worst_slack, audit.pi_v, audit.pi_v_bound
                ));
            }
            if audit.pi_v > audit.pi_v_bound {
                return Err(format!(
                    "kernel {k}: stationary mass {} exceeds b/(1 - kappa) = {}",
                    audit.pi_v, audit.pi_v_bound
                ));
            }
            if audit.worst_slack < worst_slack {
                worst_slack = audit.worst_slack;
            }
        }
    }
    Ok(format!(
        "100 fitted drifts pass all four powers; tightest slack {worst_slack:.2e}"
    ))
}

fn criterion_counterexample_study() -> Outcome {
    let theta = stuck_probability_limit();
    let replications = 10_000u64;
    let config = counterexample_config(20, replications, 20240817).map_err(err)?;
    let study = replicate(&config, 8).map_err(err)?;
    let s = &study.summary;
    let se = (theta * (1.0 - theta) / replications as f64).sqrt();
    let dev = (s.stuck_fraction - theta).abs();
    if dev > 3.0 * se {
        return Err(format!(
            "stuck fraction {} strays {dev:.4} (> 3 SE = {:.4}) from theta = {theta:.10}",
            s.stuck_fraction,
            3.0 * se
        ));
    }
    if s.lln_failure != Some(true) {
        return Err(format!(
            "law-of-large-numbers failure not flagged: mean f {} vs nu(f) 0.5 with SE {}",
            s.mean_f_mean, s.mean_f_se
        ));
    }
    Ok(format!(
        "stuck fraction {:.4} within {:.2} SE of theta = {theta:.10}; LLN failure flagged",
        s.stuck_fraction,
        dev / se
    ))
}

fn doeblin_rate_config(alpha: f64) -> Result<RunConfig, String> {
    let family = doeblin_family(5, alpha, 3, 914).map_err(err)?;
    let nu = family.invariant_law(&Param::Index(0)).map_err(err)?;
    let nu_f = nu[0];
    Ok(RunConfig {
        family,
        rule: UpdateRule::FixedSequence {
            values: vec![Param::Index(0), Param::Index(1), Param::Index(2)],
            cycle: true,
        },
        beta: 1.0,
        y0: AugmentedState::label(0),
        gamma0: Param::Index(0),
        horizon: 1_000_000,
        f: Arc::new(|y: &AugmentedState| match &y.x {
            air_mcmc::Point::Label(0) => 1.0,
            _ => 0.0,
        }),
        nu_f: Some(nu_f),
        rate: RateSpec::new(RateKind::SqrtLog, 0.5).map_err(err)?,
        replications: 200,
        master_seed: 20240817,
    })
}

fn criterion_rate_concentration() -> Outcome {
    // Calibration first: with alpha = 1 every kernel equals the rank-one
    // kernel nu, the samples are independent, and the 0.1 threshold must
    // already be comfortable there before the adaptive chain is judged.
    let iid = replicate(&doeblin_rate_config(1.0)?, 8).map_err(err)?;
    if iid.summary.tail_within_tenth < 0.95 {
        return Err(format!(
            "iid calibration: only {:.3} of replications end below 0.1",
            iid.summary.tail_within_tenth
        ));
    }
    let adaptive = replicate(&doeblin_rate_config(0.5)?, 8).map_err(err)?;
    if adaptive.summary.tail_within_tenth < 0.95 {
        return Err(format!(
            "adaptive chain: only {:.3} of replications end below 0.1 (iid baseline {:.3})",
            adaptive.summary.tail_within_tenth, iid.summary.tail_within_tenth
        ));
    }
    Ok(format!(
        "terminal |S_N / r(N)| < 0.1 in {:.1}% of 200 adaptive replications (iid baseline {:.1}%)",
        100.0 * adaptive.summary.tail_within_tenth,
        100.0 * iid.summary.tail_within_tenth
    ))
}

fn criterion_schedule_envelope() -> Outcome {
    for beta in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let sched = AirSchedule::new(beta).map_err(err)?;
        for m in 1..=10_000u64 {
            let t = sched.adaptation_time(m).map_err(err)? as f64;
            let (lower, upper) = sched.growth_envelope(m);
            if !(lower <= t && t <= upper) {
                return Err(format!(
                    "envelope broken at beta = {beta}, m = {m}: {lower} <= {t} <= {upper} fails"
                ));
            }
        }
    }
    Ok("envelope brackets T_m for all m <= 10^4 and five exponents".to_string())
}

fn criterion_reproducibility() -> Outcome {
    let mut config = parse_config(air_mcmc::config::example_config_text()).map_err(err)?;
    config.run.replications = 32;
    config.run.horizon = 10_000;
    let run_config = config.to_run_config().map_err(err)?;
    let mut texts = Vec::new();
    for workers in [1usize, 4, 8] {
        let study = replicate(&run_config, workers).map_err(err)?;
        texts.push(study_text(&config, &study).map_err(err)?);
    }
    if texts[0] != texts[1] || texts[0] != texts[2] {
        return Err("study outputs differ across 1/4/8 workers".to_string());
    }
    let summary_line = texts[0]
        .lines()
        .last()
        .ok_or_else(|| "empty study output".to_string())?;
    if !summary_line.contains("\"record\":\"summary\"") {
        return Err(format!(
            "study output does not end with a summary record: {summary_line}"
        ));
    }
    Ok(format!(
        "byte-identical {}-line studies across 1, 4, and 8 workers",
        texts[0].lines().count()
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, f64, fn() -> Outcome)> = vec![
        (
            "two-state contraction closed form",
            1.0,
            criterion_two_state_contraction,
        ),
        ("Poisson exactness on 500 kernels", 30.0, criterion_poisson_exactness),
        ("Poisson uniform bound and tightness", 30.0, criterion_poisson_bound),
        (
            "pathwise decomposition identity",
            120.0,
            criterion_decomposition_identity,
        ),
        ("contraction coefficient algebra", 60.0, criterion_contraction_algebra),
        ("Lyapunov drift powers", 30.0, criterion_lyapunov_powers),
        ("stuck-chain counterexample study", 120.0, criterion_counterexample_study),
        ("large-horizon rate concentration", 600.0, criterion_rate_concentration),
        ("schedule growth envelope", 1.0, criterion_schedule_envelope),
        ("reproducibility across workers", 120.0, criterion_reproducibility),
    ];

    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for (index, (name, budget, run)) in criteria.into_iter().enumerate() {
        let number = index + 1;
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(detail) if elapsed <= budget => (true, detail),
            Ok(detail) => (
                false,
                format!("{detail}; runtime {elapsed:.1}s exceeds the {budget:.0}s budget"),
            ),
            Err(reason) => (false, reason),
        };
        let line = format!(
            "[{}] {number:>2}. {name}: {detail} ({elapsed:.2}s, budget {budget:.0}s)",
            if ok { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        if !ok {
            failed.push(number);
        }
        lines.push(line);
    }
    assert!(
        failed.is_empty(),
        "acceptance criteria {failed:?} failed:\n{}",
        lines.join("\n")
    );
}
