//! Which (β, ε) pairs admit which almost-sure rate guarantees.
//!
//! The guarantees come in four flavours, each with its own admissibility
//! region in the (β, ε) plane:
//!
//!   * sqrt_log  r(n) = √n (ln n)^{1/2+ε}: needs β ≥ 1 and ε > 0;
//!   * poly      r(n) = n^{1/2+ε}: needs β ∈ (0, 1) and ε > 1/(1+β) − 1/2;
//!   * moment    (bounded p-th moments, p > 2): ε > max{0, 1/(1+β) + 1/p − 1/2};
//!   * waning    (diminishing adaptation at rate ρ): β ≥ 2ρ − 1.
//!
//! This example sweeps a grid over a two-state template, measuring the
//! terminal |S_N / r(N)| for every admissible cell, then spot checks the
//! boundary values: at β = 1/2 the poly threshold is 1/(3/2) − 1/2 = 1/6,
//! and at β = 1, p = 4 the moment threshold is 1/2 + 1/4 − 1/2 = 1/4.
//!
//! Run with `cargo run --release --example admissibility_sweep`.

use std::sync::Arc;

use air_mcmc::kernels::two_state_family;
use air_mcmc::runner::{theorem_sweep, RateKind, RateSpec, RunConfig};
use air_mcmc::{admissibility, AugmentedState, Param, Point, UpdateRule};

fn main() {
    let template = RunConfig {
        family: two_state_family(),
        rule: UpdateRule::FixedSequence {
            values: vec![Param::Scalar(0.25), Param::Scalar(0.4)],
            cycle: true,
        },
        beta: 1.0,
        y0: AugmentedState::label(0),
        gamma0: Param::Scalar(0.25),
        horizon: 20_000,
        f: Arc::new(|y: &AugmentedState| match &y.x {
            Point::Label(0) => 1.0,
            _ => 0.0,
        }),
        nu_f: Some(0.5),
        rate: RateSpec::new(RateKind::SqrtLog, 0.5).expect("valid rate"),
        replications: 1,
        master_seed: 20240817,
    };
    let betas = [0.25, 0.5, 1.0, 2.0];
    let epsilons = [0.05, 1.0 / 6.0 + 1e-9, 0.25 + 1e-9, 0.5];
    let p = Some(4.0);
    let rho = Some(0.6);

    let cells = theorem_sweep(&template, &betas, &epsilons, p, rho).expect("sweep");
    println!("admissibility at p = 4, rho = 0.6 (tail measured when any regime admits)");
    println!(
        "{:>5} {:>9} | sqrt_log poly moment waning |  |tail|",
        "beta", "epsilon"
    );
    let mark = |b: bool| if b { "yes" } else { " no" };
    let opt = |b: Option<bool>| b.map_or("  -", mark);
    for cell in &cells {
        let tail = cell
            .tail_value
            .map_or_else(|| "      -".to_string(), |t| format!("{t:7.4}"));
        println!(
            "{:>5.2} {:>9.6} |      {}  {}    {}    {} | {tail}",
            cell.beta,
            cell.epsilon,
            mark(cell.sqrt_log_admissible),
            mark(cell.poly_admissible),
            opt(cell.moment_admissible),
            opt(cell.waning_admissible),
        );
        let any = cell.sqrt_log_admissible
            || cell.poly_admissible
            || cell.moment_admissible.unwrap_or(false)
            || cell.waning_admissible.unwrap_or(false);
        assert_eq!(
            cell.tail_value.is_some(),
            any,
            "tail must be measured exactly for admissible cells (beta {}, epsilon {})",
            cell.beta,
            cell.epsilon
        );
    }

    // Boundary checks. poly at beta = 1/2 flips at epsilon = 1/6.
    let below = admissibility(0.5, 1.0 / 6.0 - 1e-9, None, None);
    let above = admissibility(0.5, 1.0 / 6.0 + 1e-9, None, None);
    assert!(!below.1, "poly must be inadmissible just below 1/6");
    assert!(above.1, "poly must be admissible just above 1/6");
    println!("\npoly threshold at beta = 0.5 confirmed: epsilon = 1/6");

    // moment at beta = 1, p = 4 flips at epsilon = 1/4.
    let below = admissibility(1.0, 0.25 - 1e-9, Some(4.0), None);
    let above = admissibility(1.0, 0.25 + 1e-9, Some(4.0), None);
    assert_eq!(below.2, Some(false), "moment must fail just below 1/4");
    assert_eq!(above.2, Some(true), "moment must hold just above 1/4");
    println!("moment threshold at beta = 1, p = 4 confirmed: epsilon = 1/4");

    // waning at rho = 0.6 needs beta >= 2*0.6 - 1 = 0.2.
    let below = admissibility(0.2 - 1e-9, 0.5, None, Some(0.6));
    let above = admissibility(0.2 + 1e-9, 0.5, None, Some(0.6));
    assert_eq!(below.3, Some(false), "waning must fail just below beta = 0.2");
    assert_eq!(above.3, Some(true), "waning must hold just above beta = 0.2");
    println!("waning threshold at rho = 0.6 confirmed: beta = 0.2");

    // sqrt_log needs beta >= 1 exactly.
    assert!(!admissibility(1.0 - 1e-9, 0.5, None, None).0);
    assert!(admissibility(1.0, 0.5, None, None).0);
    println!("sqrt_log threshold confirmed: beta = 1");
}
