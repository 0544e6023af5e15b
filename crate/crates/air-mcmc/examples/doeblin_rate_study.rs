//! Renormalised partial sums under a Doeblin-minorised family.
//!
//! Every kernel in the family P_γ = (1 − α) Q_γ + α ν shares the invariant
//! law ν, so S_n = Σ (f(Y_j) − ν(f)) is exactly centred no matter how the
//! parameter moves. With an increasingly-rare schedule at exponent β = 1 the
//! normalised statistic S_n / r(n) with r(n) = √n (ln n)^{1/2+ε} converges
//! to zero almost surely; this example measures the tail value |S_N / r(N)|
//! across replications and calibrates the machinery against the fully
//! independent α = 1 case, where each step samples ν directly.
//!
//! Run with `cargo run --release --example doeblin_rate_study`
//! (release mode recommended: the study simulates 5 million steps).

use std::sync::Arc;

use air_mcmc::kernels::doeblin_family;
use air_mcmc::runner::{replicate, RateKind, RateSpec, RunConfig};
use air_mcmc::{AugmentedState, Param, Point, UpdateRule};

fn study(alpha: f64, horizon: u64, replications: u64) -> air_mcmc::Study {
    let family = doeblin_family(5, alpha, 3, 914).expect("doeblin family");
    let nu = family.invariant_law(&Param::Index(0)).expect("shared law");
    let nu_f = nu[0];
    let config = RunConfig {
        family,
        rule: UpdateRule::FixedSequence {
            values: vec![Param::Index(0), Param::Index(1), Param::Index(2)],
            cycle: true,
        },
        beta: 1.0,
        y0: AugmentedState::label(0),
        gamma0: Param::Index(0),
        horizon,
        f: Arc::new(|y: &AugmentedState| match &y.x {
            Point::Label(0) => 1.0,
            _ => 0.0,
        }),
        nu_f: Some(nu_f),
        rate: RateSpec::new(RateKind::SqrtLog, 0.5).expect("valid rate"),
        replications,
        master_seed: 20240817,
    };
    replicate(&config, 8).expect("study")
}

fn main() {
    let horizon = 100_000u64;
    let replications = 50u64;

    println!("adaptive chain, alpha = 0.5, N = {horizon}, R = {replications}");
    let adaptive = study(0.5, horizon, replications);
    let s = &adaptive.summary;
    println!("  C_hat: mean {:.4}, median {:.4}, max {:.4}", s.c_hat_mean, s.c_hat_median, s.c_hat_max);
    println!(
        "  |S_N / r(N)|: median {:.4}, 95th percentile {:.4}",
        s.tail_abs_median, s.tail_abs_q95
    );
    println!(
        "  fraction of replications with terminal |S_N / r(N)| < 0.1: {:.2}",
        s.tail_within_tenth
    );
    assert!(
        s.tail_within_tenth >= 0.9,
        "tail concentration too weak: only {:.2} within 0.1",
        s.tail_within_tenth
    );

    // Calibration: alpha = 1 forces every kernel to be the rank-one kernel
    // nu, so the samples are iid and the law of the iterated logarithm makes
    // sup_n |S_n| / sqrt(n ln ln n) bounded. Our r(n) grows strictly faster,
    // so the same diagnostic must concentrate at least as hard.
    println!("\niid calibration, alpha = 1, same horizon and replication count");
    let iid = study(1.0, horizon, replications);
    let c = &iid.summary;
    println!("  C_hat: mean {:.4}, median {:.4}, max {:.4}", c.c_hat_mean, c.c_hat_median, c.c_hat_max);
    println!(
        "  |S_N / r(N)|: median {:.4}, 95th percentile {:.4}",
        c.tail_abs_median, c.tail_abs_q95
    );
    println!(
        "  fraction within 0.1: {:.2}",
        c.tail_within_tenth
    );
    assert!(
        c.tail_within_tenth >= 0.9,
        "iid calibration failed: only {:.2} within 0.1",
        c.tail_within_tenth
    );

    println!("\nboth the adaptive and the iid chains concentrate under r(n)");
}
