//! Poisson's equation u − Pu = f − π(f) with a closed-form check.
//!
//! On the two-state flip chain with flip probability γ and the indicator
//! integrand f = 1_{state 0}, the solution (normalised to π(u) = 0) is
//! u = (1/(4γ), −1/(4γ)). This example solves the equation by the exact
//! linear method, cross-checks the truncated Neumann series
//! u = Σ_k P^k (f − π(f)), and audits the uniform bound
//! |u(y)| ≤ k₀ L M^{k₀} E(y) / (1 − τ), which is tight at γ = 1/4.
//!
//! Run with `cargo run --example poisson_closed_form`.

use air_mcmc::kernels::two_state_matrix;
use air_mcmc::{
    contraction_coefficient, lipschitz_constant, poisson_bound_check, poisson_solve,
    AugmentedState, DistanceLike,
};
use nalgebra::DVector;

fn main() {
    let support: Vec<AugmentedState> = (0..2).map(AugmentedState::label).collect();
    let d = DistanceLike::trivial();
    let f = DVector::from_vec(vec![1.0, 0.0]);

    println!("gamma    u(0) solved      u(0) closed     residual    series gap");
    for i in 1..=9 {
        let gamma = i as f64 / 10.0;
        let p = two_state_matrix(gamma).expect("valid flip probability");
        let sol = poisson_solve(&p, &f).expect("solvable");
        let closed = 1.0 / (4.0 * gamma);
        assert!(
            (sol.u[0] - closed).abs() < 1e-10 && (sol.u[1] + closed).abs() < 1e-10,
            "closed form broken at gamma = {gamma}: u = ({}, {})",
            sol.u[0],
            sol.u[1]
        );
        println!(
            "{gamma:.2}     {:+.12}  {closed:+.12}  {:.2e}    {:.2e}",
            sol.u[0], sol.residual, sol.series_agreement
        );
    }

    // The bound audit at gamma = 1/4: tau = 1/2, eccentricity E = 1/2,
    // Lipschitz constant 1 under the trivial metric, so the bound is
    // 1 * 1 * 1 * (1/2) / (1/2) = 1 and |u| = 1 exactly: zero slack.
    let gamma = 0.25;
    let p = two_state_matrix(gamma).expect("valid");
    let sol = poisson_solve(&p, &f).expect("solvable");
    let report = contraction_coefficient(&p, &d, &support, 1).expect("tau");
    let d_matrix = d.matrix(&support).expect("distance matrix");
    let f_values: Vec<f64> = f.iter().copied().collect();
    let lipschitz = lipschitz_constant(&f_values, &d_matrix);
    let audit = poisson_bound_check(&sol, &d_matrix, lipschitz, &report).expect("audit");
    println!("\ngamma = 0.25: tau = {}, L = {lipschitz}", report.tau);
    println!(
        "bound per state = {:?}, |u| per state = {:?}",
        audit.bound,
        sol.u.iter().map(|x| x.abs()).collect::<Vec<_>>()
    );
    println!("minimum slack = {:.3e} (the bound is tight here)", audit.min_slack);
    assert!(audit.ok, "bound must hold");
    assert!(
        audit.min_slack.abs() < 1e-10,
        "tightness lost: slack {}",
        audit.min_slack
    );
    println!("pi(f) = {}, series terms used = {}", sol.pi_f, sol.series_terms);
}
