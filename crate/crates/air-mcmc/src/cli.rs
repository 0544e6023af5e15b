//! Command-line front end: configuration loading, flag overrides,
//! subcommand dispatch, and output management.
//!
//! Subcommands: `run` (one chain, replayable trajectory), `replicate`
//! (a seeded study across parallel workers), `analyze` (exact audits of a
//! finite kernel), `decompose` (replay a stored trajectory through the
//! martingale decomposition), `schedule` (adaptation-time tables and
//! envelope checks), `counterexample` (the stuck-chain strong-law failure
//! study), and `sweep` (theorem-admissibility grids).
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 audit or acceptance failure. All randomness flows from one 64-bit
//! master seed (`--seed` overrides the config) through the per-replication
//! splitting scheme, so identical invocations produce identical bytes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};

use crate::analysis::{
    contraction_coefficient, find_family_contraction, max_eccentricity, poisson_bound_check,
    poisson_solve, stationary_law, PoissonSolution,
};
use crate::config::{
    config_hash, parse_config, serialize, Config, IntegrandKind, ParamLiteral,
};
use crate::decomposition::{decompose, martingale_audit, remainder_audit, BoundInputs};
use crate::error::{AirError, Result};
use crate::geometry::{lipschitz_constant, AugmentedState, DistanceLike, StateFn};
use crate::kernels::{two_state_matrix, validate_stochastic, KernelFamily, Param};
use crate::report::{
    load_matrix, read_trajectory, study_text, trajectory_text, Manifest,
};
use crate::runner::{
    counterexample_config, geometric_checkpoints, normalized_sums, replicate, run_air,
    stuck_probability, stuck_probability_limit, theorem_sweep, RunOutput,
};
use crate::schedule::AirSchedule;

/// Adaptive increasingly rare MCMC: simulation, exact finite-state
/// analysis, and replication studies.
#[derive(Debug, Parser)]
#[command(name = "air-mcmc", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one chain and write its replayable trajectory.
    Run(CommonArgs),
    /// Run a replication study and write manifest-stamped study records.
    Replicate(CommonArgs),
    /// Exact analysis audits of a finite kernel: stationary law,
    /// contraction coefficient, Poisson solution, and bounds.
    Analyze(AnalyzeArgs),
    /// Replay a stored trajectory through the martingale decomposition.
    Decompose(DecomposeArgs),
    /// Print adaptation times, window lengths, and envelope checks.
    Schedule(ScheduleArgs),
    /// The stuck-chain study: a strong-law failure under vanishing
    /// adaptation without increasing rarity.
    Counterexample(CounterexampleArgs),
    /// Theorem-admissibility sweep over a (beta, epsilon) grid.
    Sweep(CommonArgs),
}

/// Flags shared by the config-driven subcommands.
#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file (sectioned key=value text).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Schedule exponent override (beta > 0).
    #[arg(long)]
    beta: Option<f64>,
    /// Rate exponent override (epsilon > 0).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Replication count override.
    #[arg(long)]
    replications: Option<u64>,
    /// Horizon override.
    #[arg(long)]
    horizon: Option<u64>,
    /// Worker threads for replication studies.
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Print results only, no progress detail.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Built-in kernel name (currently 'twostate').
    #[arg(long, default_value = "twostate")]
    kernel: String,
    /// Flip probability for the two-state kernel.
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    /// Plain-text transition-matrix file instead of a built-in kernel.
    #[arg(long)]
    kernel_file: Option<PathBuf>,
    /// Integrand: 'indicator:k', 'identity', or 'coordinate:k'.
    #[arg(long, default_value = "indicator:0")]
    integrand: String,
    /// Contraction powers to scan for a uniform contraction.
    #[arg(long, default_value_t = 64)]
    ell_max: u32,
    /// Print results only, no progress detail.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Stored trajectory file written by `run`.
    #[arg(long)]
    trajectory: PathBuf,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    /// Schedule exponent beta > 0.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Number of adaptation times to print.
    #[arg(long, default_value_t = 5)]
    m: u64,
}

#[derive(Debug, Args)]
struct CounterexampleArgs {
    /// Scheduled adaptations; the horizon is T_adaptations.
    #[arg(long, default_value_t = 20)]
    adaptations: u64,
    /// Replication count.
    #[arg(long, default_value_t = 10_000)]
    replications: u64,
    /// Master seed.
    #[arg(long, default_value_t = 20240817)]
    seed: u64,
    /// Output directory for the study file; omit to skip writing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Print results only, no progress detail.
    #[arg(long)]
    quiet: bool,
}

/// Parse argv and dispatch; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

/// Exit-code mapping: configuration errors 2, audit failures 3,
/// every other runtime failure 1.
pub fn exit_code_for(err: &AirError) -> i32 {
    match err {
        AirError::Config(_) => 2,
        AirError::Audit(_) => 3,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Replicate(args) => cmd_replicate(&args),
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Decompose(args) => cmd_decompose(&args),
        Command::Schedule(args) => cmd_schedule(&args),
        Command::Counterexample(args) => cmd_counterexample(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

/// Read, parse, override, and revalidate a configuration. Overrides are
/// folded in before hashing, so the manifest describes the run actually
/// performed.
fn load_config(common: &CommonArgs) -> Result<Config> {
    let text = fs::read_to_string(&common.config).map_err(|e| {
        AirError::Config(format!("cannot read {}: {e}", common.config.display()))
    })?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    }
    if let Some(beta) = common.beta {
        config.schedule.beta = beta;
    }
    if let Some(epsilon) = common.epsilon {
        config.rate.epsilon = epsilon;
    }
    if let Some(replications) = common.replications {
        config.run.replications = replications;
    }
    if let Some(horizon) = common.horizon {
        config.run.horizon = horizon;
    }
    // Re-parse the canonical form so overrides pass the same validation
    // as file contents (rejecting, say, `--beta 0`).
    parse_config(&serialize(&config))
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| AirError::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(AirError::from)
}

fn cmd_run(common: &CommonArgs) -> Result<()> {
    let config = load_config(common)?;
    let run = config.to_run_config()?;
    let output = run_air(&run, run.master_seed)?;
    let n = run.horizon;
    let mean_f = output.f_values.iter().sum::<f64>() / n as f64;
    println!(
        "run: horizon {n}, {} adaptations, seed {}",
        output.windows.len(),
        run.master_seed
    );
    println!("mean f = {mean_f:.12}");
    if let Some(nu_f) = run.nu_f {
        let diag = normalized_sums(
            &output.f_values,
            nu_f,
            &run.rate,
            &geometric_checkpoints(run.rate.n_min, n),
        )?;
        println!(
            "C_hat = {:.12} at n = {}, tail S_N/r(N) = {:.12}",
            diag.c_hat, diag.c_hat_argmax, diag.tail_value
        );
    }
    if !common.quiet {
        for w in &output.windows {
            let rate = w
                .acceptance_rate
                .map(|r| format!("{r:.4}"))
                .unwrap_or_else(|| "-".into());
            println!(
                "  adaptation {} at T = {}: installed {}, window acceptance {rate}",
                w.m,
                w.time,
                ParamLiteral::from_param(&w.installed)?.to_text()
            );
        }
    }
    if common.out.is_some() || config.output.trajectory {
        let dir = out_dir(&common.out)?;
        let path = dir.join(format!("{}.trajectory.txt", config.output.prefix));
        write_file(&path, &trajectory_text(&config, &output)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_replicate(common: &CommonArgs) -> Result<()> {
    let config = load_config(common)?;
    let run = config.to_run_config()?;
    let study = replicate(&run, common.workers.max(1))?;
    let summary = &study.summary;
    println!(
        "study: {} replications, horizon {}, seed {}",
        summary.replications, summary.horizon, config.run.seed
    );
    if run.nu_f.is_some() {
        println!(
            "C_hat: mean {:.6}, median {:.6}, max {:.6}",
            summary.c_hat_mean, summary.c_hat_median, summary.c_hat_max
        );
        println!(
            "|tail|: median {:.6}, q95 {:.6}, within 0.1: {:.1}%",
            summary.tail_abs_median,
            summary.tail_abs_q95,
            100.0 * summary.tail_within_tenth
        );
    }
    println!(
        "mean f = {:.9} (SE {:.9})",
        summary.mean_f_mean, summary.mean_f_se
    );
    if let Some(flag) = summary.lln_failure {
        println!("LLN failure flagged: {flag}");
    }
    if summary.stuck_fraction > 0.0 {
        println!(
            "stuck fraction = {:.6} (SE {:.6})",
            summary.stuck_fraction, summary.stuck_se
        );
    }
    if let Some(decreasing) = summary.waning_decreasing {
        println!(
            "waning statistic (rho = 0.5) non-increasing over the last half of epochs: {decreasing}"
        );
    }
    if let Some(rho) = summary.rho_hat_median {
        println!("measured waning exponent rho_hat (median) = {rho:.4}");
    }
    let dir = out_dir(&common.out)?;
    let path = dir.join(format!("{}.study.jsonl", config.output.prefix));
    write_file(&path, &study_text(&config, &study)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Render a vector for display at full audit precision.
fn vector_text(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12}")).collect();
    format!("({})", parts.join(", "))
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let (p, label) = match &args.kernel_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                AirError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            let p = load_matrix(&text)?;
            validate_stochastic(&p)?;
            (p, format!("{} ({} states)", path.display(), text.lines().count()))
        }
        None => match args.kernel.as_str() {
            "twostate" => (
                two_state_matrix(args.gamma)?,
                format!("two_state(gamma = {})", args.gamma),
            ),
            other => {
                return Err(AirError::Config(format!(
                    "unknown built-in kernel '{other}'; use 'twostate' or --kernel-file"
                )))
            }
        },
    };
    let n = p.nrows();
    let integrand = IntegrandKind::parse(&args.integrand)?;
    let h = integrand.to_fn();
    let f = DVector::from_fn(n, |i, _| h(&AugmentedState::label(i)));
    println!("kernel: {label}, {n} states");
    let pi = stationary_law(&p)?;
    println!("stationary law = {}", vector_text(&pi));
    let support: Vec<AugmentedState> = (0..n).map(AugmentedState::label).collect();
    let d = DistanceLike::trivial();
    let report = contraction_coefficient(&p, &d, &support, 1)?;
    println!(
        "contraction (trivial distance): tau(P^1) = {:.12} at pair {:?}",
        report.tau_ell, report.argmax_pair
    );
    let sol = poisson_solve(&p, &f)?;
    println!("poisson: u = {}", vector_text(&sol.u));
    println!("  pi(f) = {:.12}", sol.pi_f);
    println!(
        "  solve residual = {:.3e} (tolerance {:.0e})",
        sol.residual,
        crate::tol::SOLVE_RESIDUAL
    );
    println!(
        "  series agreement = {:.3e} over {} terms (tolerance {:.0e})",
        sol.series_agreement,
        sol.series_terms,
        crate::tol::CROSS_METHOD
    );
    if report.tau_ell < 1.0 {
        let d_matrix = d.matrix(&support)?;
        let f_values: Vec<f64> = f.iter().copied().collect();
        let lipschitz = lipschitz_constant(&f_values, &d_matrix);
        let audit = poisson_bound_check(&sol, &d_matrix, lipschitz, &report)?;
        println!(
            "bound: sup|u| <= {:.12}, min slack = {:.12}, ok = {}",
            audit.bound.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            audit.min_slack,
            audit.ok
        );
        if !audit.ok {
            return Err(AirError::Audit(format!(
                "solution bound violated: min slack {}",
                audit.min_slack
            )));
        }
    } else {
        println!("bound: skipped (tau(P^1) = {} is not a contraction)", report.tau_ell);
    }
    if !args.quiet && args.ell_max > 1 && report.tau_ell >= 1.0 {
        match find_family_contraction(std::slice::from_ref(&p), &d, &support, args.ell_max) {
            Ok(fc) => println!(
                "uniform contraction found at lag k0 = {}: tau = {:.12}",
                fc.k0, fc.tau
            ),
            Err(e) => println!("no uniform contraction up to lag {}: {e}", args.ell_max),
        }
    }
    Ok(())
}

/// Poisson solutions for every distinct parameter in a stored path.
fn solutions_for_params(
    family: &KernelFamily,
    params: &[Param],
    h: &StateFn,
) -> Result<(HashMap<crate::kernels::ParamKey, PoissonSolution>, Vec<DMatrix<f64>>)> {
    let mut solutions = HashMap::new();
    let mut matrices = Vec::new();
    for param in params {
        let key = param.key();
        if solutions.contains_key(&key) {
            continue;
        }
        let p = family.transition_matrix(param)?;
        let f = DVector::from_fn(p.nrows(), |i, _| h(&AugmentedState::label(i)));
        let sol = poisson_solve(&p, &f)?;
        matrices.push(p);
        solutions.insert(key, sol);
    }
    Ok((solutions, matrices))
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let text = fs::read_to_string(&args.trajectory).map_err(|e| {
        AirError::Config(format!("cannot read {}: {e}", args.trajectory.display()))
    })?;
    let stored = read_trajectory(&text)?;
    if stored.manifest.config_sha256 != config_hash(&config) && !args.common.quiet {
        eprintln!(
            "warning: trajectory was recorded under config {} but replaying under {}",
            &stored.manifest.config_sha256[..12],
            &config_hash(&config)[..12]
        );
    }
    let family = config.build_family()?;
    if !family.has_exact() {
        return Err(AirError::Config(format!(
            "family '{}' has no exact transition matrices; the decomposition needs a finite kernel",
            family.name
        )));
    }
    let h = config.build_integrand();
    let sched = AirSchedule::new(config.schedule.beta)?;
    let (solutions, matrices) = solutions_for_params(&family, &stored.trajectory.params, &h)?;
    let report = decompose(&stored.trajectory, &h, &solutions, &sched)?;
    println!(
        "decomposition over n = {} steps, {} completed adaptations",
        report.n, report.m
    );
    println!("  LHS  = {:.12}", report.lhs);
    println!("  M_n  = {:.12}", report.m_n);
    println!("  R_m  = {:.12}", report.r_m);
    println!("  g_n  = {:.12}", report.g_n);
    println!(
        "  identity residual = {:.3e} (tolerance {:.0e} relative)",
        report.identity_residual,
        crate::tol::DECOMPOSITION_IDENTITY
    );
    println!("  max |Delta_j| = {:.12}", report.delta_max);
    let n_states = matrices[0].nrows();
    let support: Vec<AugmentedState> = (0..n_states).map(AugmentedState::label).collect();
    let d = DistanceLike::trivial();
    match find_family_contraction(&matrices, &d, &support, 64) {
        Ok(fc) => {
            let d_matrix = d.matrix(&support)?;
            let f_values: Vec<f64> = support.iter().map(|y| h(y)).collect();
            let lipschitz = lipschitz_constant(&f_values, &d_matrix);
            let ecc_bound = solutions
                .values()
                .map(|sol| {
                    let pi: Vec<f64> = sol.pi.iter().copied().collect();
                    max_eccentricity(&d_matrix, &pi)
                })
                .fold(0.0f64, f64::max);
            let inputs = BoundInputs::from_family(&fc, lipschitz, ecc_bound);
            let mart = martingale_audit(&report, &inputs)?;
            println!(
                "  increment bound 2k0LM^k0K/(1-tau) = {:.9}: observed {:.9}, ok = {}",
                mart.bound, mart.observed_max, mart.ok
            );
            let rem = remainder_audit(&report, &inputs, config.schedule.beta)?;
            println!(
                "  remainder bound = {:.9}: observed |R_m| = {:.9}, ok = {}",
                rem.bound, rem.observed, rem.ok
            );
            if !mart.ok {
                return Err(AirError::Audit(format!(
                    "martingale increment bound violated: {} > {}",
                    mart.observed_max, mart.bound
                )));
            }
        }
        Err(e) => println!("  bound audits skipped: {e}"),
    }
    println!("identity verified");
    Ok(())
}

fn cmd_schedule(args: &ScheduleArgs) -> Result<()> {
    if args.m < 1 {
        return Err(AirError::Config("schedule table needs m >= 1".into()));
    }
    let sched = AirSchedule::new(args.beta)
        .map_err(|e| AirError::Config(format!("schedule: {e}")))?;
    let times: Vec<String> = (1..=args.m)
        .map(|m| sched.adaptation_time(m).map(|t| t.to_string()))
        .collect::<Result<_>>()?;
    println!("T = {}", times.join(","));
    let lengths: Vec<String> = (1..=args.m)
        .map(|m| sched.window_length(m).map(|w| w.to_string()))
        .collect::<Result<_>>()?;
    println!("window lengths = {}", lengths.join(","));
    for m in 1..=args.m {
        let t = sched.adaptation_time(m)?;
        let (lo, hi) = sched.growth_envelope(m);
        if (t as f64) < lo || (t as f64) > hi {
            return Err(AirError::Audit(format!(
                "envelope violated at m = {m}: {lo} <= {t} <= {hi} fails"
            )));
        }
    }
    println!(
        "envelope m^(1+beta)/(1+beta) <= T_m <= (2^(1+beta)/(1+beta) + 1) m^(1+beta) holds for all m <= {}",
        args.m
    );
    Ok(())
}

fn cmd_counterexample(args: &CounterexampleArgs) -> Result<()> {
    let config = counterexample_config(args.adaptations, args.replications, args.seed)?;
    let horizon = config.horizon;
    if !args.quiet {
        println!(
            "stuck-chain study: R = {}, horizon T_{} = {horizon}, beta = 1, seed = {}",
            args.replications, args.adaptations, args.seed
        );
    }
    let study = replicate(&config, args.workers.max(1))?;
    let theta_trunc = stuck_probability(args.adaptations);
    let theta_limit = stuck_probability_limit();
    let se = (theta_trunc * (1.0 - theta_trunc) / args.replications as f64).sqrt();
    let observed = study.summary.stuck_fraction;
    let z = (observed - theta_trunc) / se;
    println!("stuck fraction = {observed:.6} (SE {se:.6})");
    println!(
        "theta = {theta_limit:.12} (limit), {theta_trunc:.12} (truncated at {} factors)",
        args.adaptations
    );
    println!("|stuck - theta| = {:.6} = {:.2} SE", (observed - theta_trunc).abs(), z.abs());
    if let Some(flag) = study.summary.lln_failure {
        println!("LLN failure flagged: {flag}");
    }
    if let Some(dir) = &args.out {
        let dir = out_dir(&Some(dir.clone()))?;
        let config_record = counterexample_config_record(args)?;
        let path = dir.join("counterexample.study.jsonl");
        write_file(&path, &study_text(&config_record, &study)?)?;
        println!("wrote {}", path.display());
    }
    if z.abs() > 3.0 {
        return Err(AirError::Audit(format!(
            "stuck fraction {observed} deviates from theta {theta_trunc} by {:.2} SE",
            z.abs()
        )));
    }
    Ok(())
}

/// The stuck-chain study expressed as a config record, so its study file
/// carries an honest manifest.
fn counterexample_config_record(args: &CounterexampleArgs) -> Result<Config> {
    let run = counterexample_config(args.adaptations, args.replications, args.seed)?;
    let values: Vec<String> = match &run.rule {
        crate::adaptation::UpdateRule::FixedSequence { values, .. } => values
            .iter()
            .map(|p| ParamLiteral::from_param(p).map(|l| l.to_text()))
            .collect::<Result<_>>()?,
        _ => unreachable!("the stuck-chain rule is a fixed sequence"),
    };
    let text = format!(
        "[kernel]\nfamily = two_state\n\n[schedule]\nbeta = 1.0\n\n\
         [adaptation]\nrule = fixed_sequence\nvalues = {}\ncycle = false\n\n\
         [run]\nhorizon = {}\nreplications = {}\nseed = {}\n\
         initial_state = label:1\ninitial_param = {}\nintegrand = indicator:1\nnu_f = 0.5\n\n\
         [rate]\nkind = poly\nepsilon = 0.25\n\n[output]\nprefix = counterexample\ntrajectory = false\n",
        values.join(","),
        run.horizon,
        args.replications,
        args.seed,
        values[0],
    );
    parse_config(&text)
}

fn cmd_sweep(common: &CommonArgs) -> Result<()> {
    let config = load_config(common)?;
    let Some(sweep) = config.sweep.clone() else {
        return Err(AirError::Config(
            "sweep needs a [sweep] section with betas and epsilons".into(),
        ));
    };
    let template = config.to_run_config()?;
    let cells = theorem_sweep(
        &template,
        &sweep.betas,
        &sweep.epsilons,
        sweep.moment_p,
        sweep.rho,
    )?;
    println!("beta      epsilon   sqrt_log  poly      moment    waning    |tail|");
    let mark = |b: bool| if b { "yes" } else { "no" };
    let opt_mark = |b: Option<bool>| b.map(mark).unwrap_or("-");
    for cell in &cells {
        let tail = cell
            .tail_value
            .map(|t| format!("{t:.6}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<9} {:<9} {:<9} {:<9} {:<9} {:<9} {tail}",
            cell.beta,
            cell.epsilon,
            mark(cell.sqrt_log_admissible),
            mark(cell.poly_admissible),
            opt_mark(cell.moment_admissible),
            opt_mark(cell.waning_admissible),
        );
    }
    if common.out.is_some() {
        let dir = out_dir(&common.out)?;
        let mut lines = vec![Manifest::new(&config).to_json()];
        for cell in &cells {
            lines.push(
                serde_json::json!({
                    "record": "sweep_cell",
                    "beta": cell.beta,
                    "epsilon": cell.epsilon,
                    "sqrt_log_admissible": cell.sqrt_log_admissible,
                    "poly_admissible": cell.poly_admissible,
                    "moment_admissible": cell.moment_admissible,
                    "waning_admissible": cell.waning_admissible,
                    "tail_value": cell.tail_value,
                })
                .to_string(),
            );
        }
        let path = dir.join(format!("{}.sweep.jsonl", config.output.prefix));
        write_file(&path, &(lines.join("\n") + "\n"))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Trajectory text for a finished run, exposed for tests.
pub fn render_trajectory(config: &Config, output: &RunOutput) -> Result<String> {
    trajectory_text(config, output)
}
