//! One momentum run on a noisy quadratic, compared with its bound.
//!
//! cargo run --release --example quickstart

use rmsprop_lab::harness::{run, GammaMode, GammaSpec, OptimizerKind, RunConfig};
use rmsprop_lab::problems::{Eigenvalues, InitSpec, NoiseSpec, ProblemSpec};

fn main() -> rmsprop_lab::Result<()> {
    let cfg = RunConfig {
        problem: ProblemSpec::Quadratic {
            eigenvalues: Eigenvalues::Range { dim: 10, min: 0.1, max: 1.0 },
            sigma: NoiseSpec::Uniform(0.3),
            init: Some(InitSpec::Fill(1.0)),
        },
        gamma: GammaSpec::Mode(GammaMode::Corollary),
        lambda: 1.0,
        theta: 0.9,
        horizon: 4096,
        optimizer: OptimizerKind::RmspropMomentum,
        seed: 1,
        record_every: 512,
    };
    let (records, summary) = run(&cfg)?;

    println!("{:>6} {:>12} {:>12} {:>8}", "k", "f", "|g|_1", "ratio");
    for r in &records {
        println!("{:>6} {:>12.5e} {:>12.5e} {:>8.4}", r.k, r.f, r.g1, r.ratio);
    }
    println!();
    println!("eta = {:.4e}, beta = {}", summary.eta, summary.beta);
    println!("average |grad f|_1 over T steps: {:.5}", summary.avg_g1);
    println!(
        "bound: {:.3} = {:.3} (noise) + {:.3} (deterministic)",
        summary.bound.rhs, summary.bound.term_noise, summary.bound.term_det
    );
    println!("sgd reference curve at T: {:.5}", summary.sgd_reference);
    Ok(())
}
