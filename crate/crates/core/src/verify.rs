//! Probe suites behind `verify`: each returns a [`SuiteReport`] that keeps
//! the tightest check per category and every failure.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::optim::{derive_schedule, heavy_ball_step, z_of, OptimizerState, Schedule};
use crate::problems::{make_quadratic, Eigenvalues, Problem};
use crate::rng::{normal, stream, Purpose};
use crate::theory::{
    beta_power, lemma1_probe, lemma2_probe, lemma6_probe, lipschitz_probe, log_inequality_probe,
    oracle_probes, record_momentum_trajectory, ProbeResult,
};
use crate::vecops::scaled_deviation;

/// Tolerance on the deviation between the two momentum forms and on the
/// z-recursion residual, both measured by [`scaled_deviation`].
pub const FORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemma1,
    Lemma2,
    Lemma6,
    Equivalence,
    Assumptions,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Lemma1,
        Suite::Lemma2,
        Suite::Lemma6,
        Suite::Equivalence,
        Suite::Assumptions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Lemma2 => "lemma2",
            Suite::Lemma6 => "lemma6",
            Suite::Equivalence => "equivalence",
            Suite::Assumptions => "assumptions",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub total: usize,
    pub passed: usize,
    /// Smallest relative margin per probe name, in name order.
    pub tightest: Vec<ProbeResult>,
    pub failures: Vec<ProbeResult>,
}

impl SuiteReport {
    pub fn from_probes(suite: &str, probes: impl IntoIterator<Item = ProbeResult>) -> Self {
        let mut tightest: BTreeMap<String, ProbeResult> = BTreeMap::new();
        let mut failures = Vec::new();
        let mut total = 0;
        for p in probes {
            total += 1;
            if !p.passed {
                failures.push(p.clone());
            }
            match tightest.get(&p.name) {
                Some(t) if t.relative_margin() <= p.relative_margin() => {}
                _ => {
                    tightest.insert(p.name.clone(), p);
                }
            }
        }
        Self {
            suite: suite.to_string(),
            total,
            passed: total - failures.len(),
            tightest: tightest.into_values().collect(),
            failures,
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Number of random sequences for the accumulator-log inequality.
    pub n: usize,
    /// Momentum values for the equivalence suite.
    pub thetas: Vec<f64>,
    /// Steps per trajectory in the equivalence suite.
    pub steps: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n: 1000,
            thetas: vec![0.0, 0.5, 0.9, 0.99],
            steps: 10_000,
            seed: 0,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    match suite {
        Suite::Lemma1 => lemma1_suite(opts.n, opts.seed),
        Suite::Lemma2 => lemma2_suite(&[0.0, 0.9], 20, 1000, opts.seed),
        Suite::Lemma6 => lemma6_suite(opts.seed),
        Suite::Equivalence => equivalence_suite(&opts.thetas, 100, opts.steps, opts.seed),
        Suite::Assumptions => assumptions_suite(opts.seed),
    }
}

/// Noisy quadratic with eigenvalues evenly spaced on `[0.1, 1]`, started at
/// the all-ones point.
pub fn reference_quadratic(dim: usize, sigma: f64) -> Result<Problem> {
    let eig = Eigenvalues::Range { dim, min: 0.1, max: 1.0 }.values()?;
    make_quadratic(dim, &eig)?.with_noise(vec![sigma; dim])
}

/// Worst deviations between the momentum form and the heavy-ball form of
/// one trajectory, and of the z-recursion residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormDeviation {
    pub theta: f64,
    pub max_x_deviation: f64,
    pub max_z_residual: f64,
}

/// Runs both forms side by side, each on its own iterate with identical
/// noise draws, and checks `z^{k+1} = z^k - eta g^k / sqrt(v^k)` along the
/// momentum-form path.
pub fn form_deviation(problem: &Problem, sched: &Schedule, steps: usize, seed: u64) -> Result<FormDeviation> {
    let p = sched.step_params();
    let mut mom = OptimizerState::for_schedule(problem.initial_point().to_vec(), sched)?;
    let mut hb_x = mom.x.clone();
    let mut hb_prev = mom.x.clone();
    let mut hb_v = mom.v.clone();
    let mut rng_m = stream(seed, Purpose::GradientNoise);
    let mut rng_h = stream(seed, Purpose::GradientNoise);
    let mut out = FormDeviation {
        theta: p.theta,
        max_x_deviation: 0.0,
        max_z_residual: 0.0,
    };
    for _ in 0..steps {
        let z = z_of(&mom.x, &mom.x_prev, p.theta)?;
        let g = problem.sample_gradient(&mom.x, &mut rng_m)?.g;
        mom.momentum_step(&g, &p)?;
        let z_next = z_of(&mom.x, &mom.x_prev, p.theta)?;
        for i in 0..z.len() {
            let predicted = z[i] - p.eta * g[i] / mom.v[i].sqrt();
            out.max_z_residual = out.max_z_residual.max(scaled_deviation(z_next[i], predicted));
        }

        let gh = problem.sample_gradient(&hb_x, &mut rng_h)?.g;
        for (v, g) in hb_v.iter_mut().zip(&gh) {
            *v = p.beta * *v + (1.0 - p.beta) * g * g;
        }
        let next = heavy_ball_step(&hb_x, &hb_prev, &hb_v, &gh, &p)?;
        hb_prev = std::mem::replace(&mut hb_x, next);
        for (a, b) in mom.x.iter().zip(&hb_x) {
            out.max_x_deviation = out.max_x_deviation.max(scaled_deviation(*a, *b));
        }
    }
    Ok(out)
}

pub fn equivalence_suite(thetas: &[f64], dim: usize, steps: usize, seed: u64) -> Result<SuiteReport> {
    let problem = reference_quadratic(dim, 0.3)?;
    let mut probes = Vec::new();
    for &theta in thetas {
        let sched = derive_schedule(1.0, 1.0, theta, steps.max(8), dim, problem.sigma())?;
        let dev = form_deviation(&problem, &sched, steps, seed)?;
        probes.push(ProbeResult::new(
            format!("heavy_ball_form theta={theta}"),
            dev.max_x_deviation,
            FORM_TOLERANCE,
            0.0,
        ));
        probes.push(ProbeResult::new(
            format!("z_recursion theta={theta}"),
            dev.max_z_residual,
            FORM_TOLERANCE,
            0.0,
        ));
    }
    Ok(SuiteReport::from_probes("equivalence", probes))
}

/// `n` sequences of length 1000 cycling over `beta in {0.9, 0.99, 0.999}`
/// and `v0 in {1e-4, 1}`, with per-sequence gradient scales spanning
/// `e^{-5} .. e^5`, plus 10^4 samples of `ln(1-x) <= -x` on `(-10, 0.999)`.
pub fn lemma1_suite(n: usize, seed: u64) -> Result<SuiteReport> {
    const BETAS: [f64; 3] = [0.9, 0.99, 0.999];
    const V0S: [f64; 2] = [1e-4, 1.0];
    let mut rng = stream(seed, Purpose::Probe);
    let mut probes = Vec::with_capacity(n + 1);
    let mut seq = vec![0.0; 1000];
    for i in 0..n {
        let beta = BETAS[i % BETAS.len()];
        let v0 = V0S[(i / BETAS.len()) % V0S.len()];
        let scale = rng.random_range(-5.0f64..5.0).exp();
        for g in seq.iter_mut() {
            *g = scale * normal(&mut rng);
        }
        let mut p = lemma1_probe(&seq, v0, beta)?;
        p.name = format!("lemma1 beta={beta} v0={v0}");
        probes.push(p);
    }
    let xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(-10.0..0.999)).collect();
    probes.push(log_inequality_probe(&xs)?);
    Ok(SuiteReport::from_probes("lemma1", probes))
}

/// Quadratic `d = 10`, `sigma = 0.3`, `gamma = lambda = 1`; one trajectory
/// of `horizon` steps per seed and momentum value.
pub fn lemma2_suite(thetas: &[f64], n_seeds: usize, horizon: usize, seed: u64) -> Result<SuiteReport> {
    let problem = reference_quadratic(10, 0.3)?;
    let mut probes = Vec::new();
    for &theta in thetas {
        let sched = derive_schedule(1.0, 1.0, theta, horizon, 10, problem.sigma())?;
        for s in 0..n_seeds as u64 {
            let traj = record_momentum_trajectory(&problem, &sched, problem.initial_point(), horizon, seed + s)?;
            for mut p in lemma2_probe(&traj, &problem, &sched.step_params())? {
                p.name = format!("{} theta={theta}", p.name);
                probes.push(p);
            }
        }
    }
    Ok(SuiteReport::from_probes("lemma2", probes))
}

/// Quadratic `d = 10`, `sigma = 0.3`, `K = T = 1000`, 50 seeds, for
/// `theta in {0, 0.9}`; plus a long-memory case `T = 10^4`, `K = 1000`,
/// `sigma = 3`.
pub fn lemma6_suite(seed: u64) -> Result<SuiteReport> {
    let mut probes = Vec::new();
    let problem = reference_quadratic(10, 0.3)?;
    for theta in [0.0, 0.9] {
        let sched = derive_schedule(1.0, 1.0, theta, 1000, 10, problem.sigma())?;
        let mut p = lemma6_probe(&problem, &sched, problem.initial_point(), 1000, 50, seed)?;
        p.name = format!("lemma6 theta={theta}");
        probes.push(p);
    }
    let noisy = reference_quadratic(10, 3.0)?;
    let sched = derive_schedule(1.0, 1.0, 0.9, 10_000, 10, noisy.sigma())?;
    let mut p = lemma6_probe(&noisy, &sched, noisy.initial_point(), 1000, 50, seed)?;
    p.name = "lemma6 long_memory".into();
    probes.push(p);
    Ok(SuiteReport::from_probes("lemma6", probes))
}

/// Oracle unbiasedness and variance at `x^1` with `10^5` samples, gradient
/// Lipschitz constant over `10^3` pairs, and `beta^T >= e^{-2}`.
pub fn assumptions_suite(seed: u64) -> Result<SuiteReport> {
    let problem = reference_quadratic(10, 0.3)?;
    let mut probes = oracle_probes(&problem, problem.initial_point(), 100_000, seed)?;
    probes.push(lipschitz_probe(&problem, 1000, 2.0, seed)?);
    for t in [10usize, 100, 1000, 10_000] {
        probes.push(ProbeResult::new(
            format!("beta_floor T={t}"),
            (-2.0f64).exp(),
            beta_power(t, t),
            0.0,
        ));
    }
    Ok(SuiteReport::from_probes("assumptions", probes))
}
