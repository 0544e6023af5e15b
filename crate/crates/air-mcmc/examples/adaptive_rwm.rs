//! Acceptance-targeting random-walk Metropolis with rare adaptation.
//!
//! A random-walk Metropolis sampler on a standard normal target adapts its
//! proposal variance γ toward the classical one-dimensional optimum of a
//! 44% acceptance rate, with updates only at the increasingly-rare times
//! T_m = Σ ⌈j^β⌉. Because the windows lengthen, the parameter both gets
//! better information per update and changes less often; the example tracks
//! the per-window acceptance rates, measures the waning-adaptation exponent
//! ρ from the installed parameters, and compares the settled proposal scale
//! against the 2.38²-based reference.
//!
//! Run with `cargo run --release --example adaptive_rwm`.

use std::sync::Arc;

use air_mcmc::adaptation::ParamBox;
use air_mcmc::kernels::{rwm_family, LogDensity};
use air_mcmc::runner::{adaptation_path, measure_rho, run_air, RateKind, RateSpec, RunConfig};
use air_mcmc::{waning_path, AugmentedState, Param, Point, UpdateRule};

fn main() {
    let logpi: LogDensity = Arc::new(|x: &[f64]| -0.5 * x.iter().map(|v| v * v).sum::<f64>());
    let family = rwm_family(logpi, 1);
    let target = 0.44;
    let config = RunConfig {
        family,
        rule: UpdateRule::AcceptanceTargeting {
            target,
            gain_exponent: 0.5,
            bounds: ParamBox::new(1e-3, 1e3).expect("valid box"),
        },
        beta: 1.0,
        y0: AugmentedState::coords(vec![0.0]),
        gamma0: Param::Scalar(25.0),
        horizon: 200_000,
        f: Arc::new(|y: &AugmentedState| match &y.x {
            Point::Coords(v) => v[0],
            Point::Label(_) => f64::NAN,
        }),
        nu_f: Some(0.0),
        rate: RateSpec::new(RateKind::SqrtLog, 0.5).expect("valid rate"),
        replications: 1,
        master_seed: 20240817,
    };
    let output = run_air(&config, 42).expect("simulation");

    println!("window  T_m      steps  acceptance  installed gamma");
    let show = |m: u64| m <= 10 || m % 25 == 0 || m as usize == output.windows.len();
    for w in &output.windows {
        if !show(w.m) {
            continue;
        }
        let rate = w.acceptance_rate.expect("rwm reports acceptance");
        let gamma = match &w.installed {
            Param::Scalar(g) => *g,
            _ => unreachable!("acceptance targeting keeps scalar parameters"),
        };
        println!(
            "{:>6} {:>8} {:>6}   {rate:.3}       {gamma:.4}",
            w.m, w.time, w.window_steps
        );
    }

    let last = output.windows.last().expect("at least one adaptation");
    let final_gamma = match &last.installed {
        Param::Scalar(g) => *g,
        _ => unreachable!(),
    };
    // Late windows are long, so their acceptance rates estimate the true
    // rate under the current parameter well; they should sit near 44%.
    let late: Vec<f64> = output
        .windows
        .iter()
        .rev()
        .take(5)
        .filter_map(|w| w.acceptance_rate)
        .collect();
    let late_mean = late.iter().sum::<f64>() / late.len() as f64;
    println!("\nmean acceptance over the last 5 windows: {late_mean:.3} (target {target})");
    assert!(
        (late_mean - target).abs() < 0.05,
        "late acceptance {late_mean} should be within 0.05 of {target}"
    );

    // One-dimensional reference: proposal variance 2.38^2 gives roughly 44%
    // acceptance on a unit normal, so the tuned gamma should land nearby.
    let reference = 2.38f64.powi(2);
    println!("final proposal variance {final_gamma:.3} (2.38^2 = {reference:.3})");
    assert!(
        final_gamma > reference / 3.0 && final_gamma < reference * 3.0,
        "tuned variance {final_gamma} unreasonably far from {reference}"
    );

    // Waning adaptation: |Gamma_{T_m} - Gamma_{T_{m-1}}| should decay like
    // m^{-rho} for some rho > 0; the measured exponent comes from a log-log
    // fit of cumulative parameter movement.
    let params = adaptation_path(&config, &output);
    match measure_rho(&params) {
        Some(rho_hat) => println!("measured waning exponent rho = {rho_hat:.3}"),
        None => println!("too few parameter moves to measure rho"),
    }
    let waning = waning_path(&params, 0.5).expect("waning statistic");
    let probe: Vec<usize> = [1usize, 4, 16, 64]
        .into_iter()
        .filter(|&k| k < waning.len())
        .collect();
    println!("running waning statistic at rho = 0.5:");
    for k in probe {
        println!("  after {k:>3} adaptations: {:.4}", waning[k]);
    }
}
