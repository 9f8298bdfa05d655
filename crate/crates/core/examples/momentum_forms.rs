//! The momentum update written three ways: with an explicit `m`, as heavy
//! ball, and through the z-sequence. Also the mapping to framework
//! `(momentum, lr)` parameters.
//!
//! cargo run --release --example momentum_forms

use rmsprop_lab::optim::{derive_schedule, from_pytorch_params, pytorch_param_map};
use rmsprop_lab::verify::{form_deviation, reference_quadratic};

fn main() -> rmsprop_lab::Result<()> {
    let problem = reference_quadratic(100, 0.3)?;
    println!("{:>6} {:>16} {:>16}", "theta", "max x deviation", "max z residual");
    for theta in [0.0, 0.5, 0.9, 0.99] {
        let sched = derive_schedule(1.0, 1.0, theta, 10_000, 100, problem.sigma())?;
        let dev = form_deviation(&problem, &sched, 10_000, 7)?;
        println!("{theta:>6} {:>16.3e} {:>16.3e}", dev.max_x_deviation, dev.max_z_residual);
    }

    let (theta, eta) = (0.9, 0.01);
    let (momentum, lr) = pytorch_param_map(theta, eta)?;
    println!();
    println!("theta = {theta}, eta = {eta}  ->  momentum = {momentum}, lr = {lr}");
    let (t, e) = from_pytorch_params(momentum, lr)?;
    println!("and back: theta = {t}, eta = {e}");
    Ok(())
}
