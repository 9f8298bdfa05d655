//! `||x||_1 / (sqrt(d) ||x||_2)` for Gaussian vectors and along a toy MLP
//! training run. Dense vectors sit near `sqrt(2/pi)`; a one-hot vector
//! would give `1/sqrt(d)`.
//!
//! cargo run --release --example norm_ratio

use rmsprop_lab::harness::{GammaSpec, OptimizerKind, RunConfig};
use rmsprop_lab::problems::{norm_ratio, ProblemSpec, ToyMlpSpec};
use rmsprop_lab::rng::{normal, stream, Purpose};

fn main() -> rmsprop_lab::Result<()> {
    let d = 10_000;
    let mut rng = stream(0, Purpose::Probe);
    let mut x = vec![0.0; d];
    let mut sum = 0.0;
    let n = 1000;
    for _ in 0..n {
        x.iter_mut().for_each(|v| *v = normal(&mut rng));
        sum += norm_ratio(&x)?;
    }
    println!("gaussian, d = {d}: mean ratio {:.5}, sqrt(2/pi) = {:.5}", sum / n as f64, (2.0 / std::f64::consts::PI).sqrt());

    let cfg = RunConfig {
        problem: ProblemSpec::ToyMlp(ToyMlpSpec { in_dim: 8, hidden: 16, n_data: 256, batch: 32, seed: 5 }),
        gamma: GammaSpec::Value(1.0),
        lambda: 1.0,
        theta: 0.9,
        horizon: 5000,
        optimizer: OptimizerKind::RmspropMomentum,
        seed: 3,
        record_every: 500,
    };
    let prepared = cfg.prepare()?;
    println!("toy mlp: d = {}, estimated L = {:.3}", prepared.problem.dim(), prepared.problem.smoothness());
    let (records, summary) = prepared.run()?;
    println!("{:>6} {:>12} {:>8}", "k", "loss", "ratio");
    for r in &records {
        println!("{:>6} {:>12.5e} {:>8.4}", r.k, r.f, r.ratio);
    }
    if let (Some(lo), Some(hi)) = (summary.ratio_min, summary.ratio_max) {
        println!("ratio range over the run: [{lo:.4}, {hi:.4}]");
    }
    Ok(())
}
