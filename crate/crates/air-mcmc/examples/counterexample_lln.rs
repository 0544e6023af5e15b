//! Adaptation that is too aggressive early can freeze a chain forever.
//!
//! The two-state family with window-matched flip probabilities
//! wg(m) = 1 − (1 − e^{−(m+1)})^{1/(m+1)} makes the probability of any flip
//! during window m equal to e^{−m}, so the chain started in state 1 stays
//! there for all time with probability θ = Π_{j≥1} (1 − e^{−j}) ≈ 0.5044.
//! The empirical mean of f = 1_{state 1} then converges to a random limit,
//! not to ν(f) = 1/2: the law of large numbers fails even though every
//! individual kernel in the family is uniformly ergodic.
//!
//! Run with `cargo run --example counterexample_lln`.

use air_mcmc::{
    counterexample_config, replicate, stuck_probability, stuck_probability_limit,
};

fn main() {
    let theta = stuck_probability_limit();
    println!("limit stuck probability theta = {theta:.15}");
    println!("\npartial products theta_m = P(no flip through window m):");
    for m in [1, 2, 5, 10, 20] {
        println!("  theta_{m:<2} = {:.15}", stuck_probability(m));
    }

    let adaptations = 20;
    let replications = 10_000;
    let config = counterexample_config(adaptations, replications, 20240817)
        .expect("valid counterexample configuration");
    println!(
        "\nrunning {replications} replications to horizon T_{adaptations} = {} ...",
        config.horizon
    );
    let study = replicate(&config, 8).expect("study");
    let s = &study.summary;

    let theta_m = stuck_probability(adaptations);
    let se = (theta_m * (1.0 - theta_m) / replications as f64).sqrt();
    println!("stuck fraction = {:.4} (expected {theta_m:.4}, SE {se:.4})", s.stuck_fraction);
    assert!(
        (s.stuck_fraction - theta_m).abs() <= 3.0 * se,
        "stuck fraction {} strays more than 3 SE from {theta_m}",
        s.stuck_fraction
    );

    let target = 0.5;
    println!(
        "mean of f across replications = {:.4} +- {:.4}, target nu(f) = {target}",
        s.mean_f_mean, s.mean_f_se
    );
    let flag = s.lln_failure.expect("nu_f is set, so the flag is computed");
    println!("law-of-large-numbers failure flagged: {flag}");
    assert!(flag, "the counterexample must trip the LLN diagnostic");
    assert!(
        (s.mean_f_mean - target).abs() > 5.0 * s.mean_f_se,
        "deviation {} should exceed 5 SE = {}",
        (s.mean_f_mean - target).abs(),
        5.0 * s.mean_f_se
    );
}
