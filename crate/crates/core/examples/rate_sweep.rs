//! Seed-averaged l1 gradient norm over a horizon grid, against the bound,
//! with log-log slopes of all three curves.
//!
//! cargo run --release --example rate_sweep

use rmsprop_lab::harness::{fit_rate, t_sweep, GammaMode, GammaSpec, OptimizerKind, RunConfig};
use rmsprop_lab::problems::{Eigenvalues, InitSpec, NoiseSpec, ProblemSpec};

fn main() -> rmsprop_lab::Result<()> {
    let grid: Vec<usize> = (8..=14).map(|e| 1usize << e).collect();
    for theta in [0.0, 0.9] {
        let cfg = RunConfig {
            problem: ProblemSpec::Quadratic {
                eigenvalues: Eigenvalues::Range { dim: 10, min: 0.1, max: 1.0 },
                sigma: NoiseSpec::Uniform(0.3),
                init: Some(InitSpec::Fill(1.0)),
            },
            gamma: GammaSpec::Mode(GammaMode::Corollary),
            lambda: 1.0,
            theta,
            horizon: grid[0],
            optimizer: if theta == 0.0 { OptimizerKind::Rmsprop } else { OptimizerKind::RmspropMomentum },
            seed: 0,
            record_every: 1,
        };
        let out = t_sweep(&cfg, &grid, 20)?;
        println!("theta = {theta}");
        println!("{:>7} {:>11} {:>10} {:>11} {:>11}", "T", "mean", "se", "bound", "sgd ref");
        for p in &out.points {
            println!(
                "{:>7} {:>11.4e} {:>10.2e} {:>11.4e} {:>11.4e}{}",
                p.horizon,
                p.mean,
                p.se,
                p.rhs,
                p.sgd_reference,
                if p.violation { "  VIOLATION" } else { "" }
            );
        }
        let slope = |f: fn(&rmsprop_lab::harness::SweepPoint) -> f64| {
            let pts: Vec<(f64, f64)> = out.points.iter().map(|p| (p.horizon as f64, f(p))).collect();
            fit_rate(&pts).map(|r| r.slope)
        };
        println!(
            "slopes: empirical {:.3}, bound {:.3}, sgd reference {:.3}\n",
            slope(|p| p.mean)?,
            slope(|p| p.rhs)?,
            slope(|p| p.sgd_reference)?
        );
    }
    Ok(())
}
