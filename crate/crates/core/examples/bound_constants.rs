//! The constant F and both bound terms as the horizon grows, for the
//! balanced step size on a noisy quadratic.
//!
//! cargo run --release --example bound_constants

use rmsprop_lab::optim::derive_schedule;
use rmsprop_lab::theory::{compute_f, corollary_gamma, corollary_gates, sgd_reference};
use rmsprop_lab::verify::reference_quadratic;

fn main() -> rmsprop_lab::Result<()> {
    let p = reference_quadratic(10, 0.3)?;
    let l = p.smoothness();
    let f_gap = p.value(p.initial_point())? - p.f_star();
    let gamma = corollary_gamma(l, f_gap)?;
    let gates = corollary_gates(l, f_gap, p.sigma_s(), 1.0);
    println!("L = {l}, f(x1) - f* = {f_gap}, gamma = {gamma:.6}");
    println!(
        "noise term dominates from T = {:.1}; sigma/sqrt(lambda T) small from T = {:.1}",
        gates.noise_dominant_horizon, gates.relaxation_horizon
    );
    println!();
    println!(
        "{:>8} {:>4} {:>10} {:>11} {:>11} {:>11} {:>11}",
        "T", "arg", "F/gamma", "noise", "det", "rhs", "sgd ref"
    );
    for theta in [0.0, 0.9] {
        println!("theta = {theta}");
        for e in (8..=20).step_by(2) {
            let t = 1usize << e;
            let sched = derive_schedule(gamma, 1.0, theta, t, 10, p.sigma())?;
            let b = compute_f(&sched, l, f_gap, sched.sigma_s(), sched.min_sigma_sq())?;
            println!(
                "{t:>8} {:>4} {:>10.3} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}",
                b.active_branch,
                b.f_over_gamma,
                b.term_noise,
                b.term_det,
                b.rhs,
                sgd_reference(l, f_gap, p.sigma_s(), t)
            );
        }
    }
    Ok(())
}
