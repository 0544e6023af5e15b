//! Adaptation-time tables and growth envelopes.
//!
//! The schedule T_m = Σ_{j=1}^m ⌈j^β⌉ controls when an AIR chain may
//! adapt. This example prints the first adaptation times for several β,
//! then verifies the two-sided polynomial envelope
//! m^{1+β}/(1+β) ≤ T_m ≤ (2^{1+β}/(1+β) + 1) m^{1+β}
//! for every m up to 10⁴.
//!
//! Run with `cargo run --example schedule_growth`.

use air_mcmc::AirSchedule;

fn main() {
    for beta in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let sched = AirSchedule::new(beta).expect("beta > 0");
        let times: Vec<u64> = (1..=8)
            .map(|m| sched.adaptation_time(m).expect("small index"))
            .collect();
        println!("beta = {beta}: T_1..T_8 = {times:?}");
    }

    let sched = AirSchedule::new(1.0).expect("beta > 0");
    println!(
        "\nbeta = 1 gives the triangular numbers: T_100 = {}",
        sched.adaptation_time(100).expect("T_100")
    );
    println!(
        "window m has length ceil(m^beta); at beta = 1, window 100 = {} steps",
        sched.window_length(100).expect("window 100")
    );

    println!("\nchecking the envelope for m <= 10_000 and five exponents:");
    for beta in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let sched = AirSchedule::new(beta).expect("beta > 0");
        let mut worst_lower = f64::INFINITY;
        let mut worst_upper = f64::INFINITY;
        for m in 1..=10_000u64 {
            let t = sched.adaptation_time(m).expect("in range") as f64;
            let (lo, hi) = sched.growth_envelope(m);
            assert!(
                lo <= t && t <= hi,
                "envelope broken at beta = {beta}, m = {m}: {lo} <= {t} <= {hi}"
            );
            worst_lower = worst_lower.min(t - lo);
            worst_upper = worst_upper.min(hi - t);
        }
        println!(
            "  beta = {beta}: tightest slack below = {worst_lower:.3}, above = {worst_upper:.3e}"
        );
    }
    println!("envelope holds everywhere");

    // The lower constant 1/(1+beta) is asymptotically sharp: T_m is a
    // Riemann sum for the integral of x^beta.
    let sched = AirSchedule::new(2.0).expect("beta > 0");
    let m = 10_000u64;
    let t = sched.adaptation_time(m).expect("in range") as f64;
    let ratio = t / (m as f64).powf(3.0);
    println!(
        "\nbeta = 2: T_m / m^3 at m = 10^4 is {ratio:.6} (limit 1/3 = {:.6})",
        1.0 / 3.0
    );
}
