//! Trajectory loop, per-iteration metrics, seed and horizon sweeps, and
//! log-log rate fitting.
//!
//! Metrics always use the exact gradient at the iterate, never the sample.
//! Seed sweeps run seeds in parallel and reduce in seed order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{derive_schedule, OptimizerState, Schedule};
use crate::problems::{Problem, ProblemSpec};
use crate::rng::{stream, Purpose};
use crate::theory::{compute_f, corollary_gamma, sgd_reference, BoundReport};
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Rmsprop,
    RmspropMomentum,
    /// Constant step `min(1/L, gamma/sqrt(T))`; a baseline convention only.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// `gamma = sqrt((f(x^1) - f*) / L)`.
    Corollary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Value(f64),
    Mode(GammaMode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub gamma: GammaSpec,
    pub lambda: f64,
    pub theta: f64,
    pub horizon: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub record_every: usize,
}

/// Metrics at `x^k`. `v_min`/`v_max` describe the accumulator after it
/// absorbed `g^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub k: usize,
    pub f: f64,
    pub g1: f64,
    pub g2: f64,
    /// `g1 / (sqrt(d) g2)`; NaN at a stationary point.
    pub ratio: f64,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub horizon: usize,
    pub dim: usize,
    pub eta: f64,
    pub beta: f64,
    pub theta: f64,
    pub f_gap: f64,
    pub smoothness: f64,
    pub smoothness_certified: bool,
    /// `(1/T) sum_{k=1}^T ||grad f(x^k)||_1`.
    pub avg_g1: f64,
    pub avg_g2: f64,
    pub initial_f: f64,
    /// `f(x^T)`.
    pub final_f: f64,
    pub min_f: f64,
    /// Ratio range over iterations with a non-zero gradient.
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    /// Step size of the SGD baseline, present only for `sgd` runs.
    pub sgd_step: Option<f64>,
    pub sgd_reference: f64,
    pub bound: BoundReport,
}

/// A validated configuration with its problem built and schedule derived.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub problem: Problem,
    pub schedule: Schedule,
    pub optimizer: OptimizerKind,
    pub f_gap: f64,
    pub bound: BoundReport,
    pub record_every: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn prepare(&self) -> Result<PreparedRun> {
        self.prepare_with(self.problem.build()?)
    }

    /// Like [`Self::prepare`] but reuses an already built problem.
    pub fn prepare_with(&self, problem: Problem) -> Result<PreparedRun> {
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        if self.optimizer == OptimizerKind::Rmsprop && self.theta != 0.0 {
            return Err(Error::Config("rmsprop has no momentum; set theta = 0".into()));
        }
        let f_gap = problem.value(problem.initial_point())? - problem.f_star();
        let l = problem.smoothness();
        let gamma = match self.gamma {
            GammaSpec::Value(g) => g,
            GammaSpec::Mode(GammaMode::Corollary) => corollary_gamma(l, f_gap)?,
        };
        let schedule = derive_schedule(
            gamma,
            self.lambda,
            self.theta,
            self.horizon,
            problem.dim(),
            problem.sigma(),
        )?;
        let bound = compute_f(&schedule, l, f_gap, schedule.sigma_s(), schedule.min_sigma_sq())?;
        Ok(PreparedRun {
            problem,
            schedule,
            optimizer: self.optimizer,
            f_gap,
            bound,
            record_every: self.record_every,
            seed: self.seed,
        })
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }
}

impl PreparedRun {
    pub fn sgd_step_size(&self) -> f64 {
        let s = &self.schedule;
        (1.0 / self.problem.smoothness()).min(s.gamma() / (s.horizon() as f64).sqrt())
    }

    /// Execute exactly `T` steps with the given seed, keeping every
    /// `record_every`-th record and the last one.
    pub fn run_seed(&self, seed: u64, record_every: usize) -> Result<(Vec<IterRecord>, RunSummary)> {
        let record_every = record_every.max(1);
        let p = &self.problem;
        let s = &self.schedule;
        let params = s.step_params();
        let horizon = s.horizon();
        let sqrt_d = (p.dim() as f64).sqrt();
        let sgd_lr = self.sgd_step_size();
        let abort = |iteration: usize, detail: String| Error::RunAborted {
            seed,
            iteration,
            detail,
        };

        let mut state = OptimizerState::for_schedule(p.initial_point().to_vec(), s)?;
        let mut rng = stream(seed, Purpose::GradientNoise);
        let mut records = Vec::with_capacity(horizon / record_every + 1);
        let (mut sum_g1, mut sum_g2) = (0.0, 0.0);
        let mut min_f = f64::INFINITY;
        let mut initial_f = f64::NAN;
        let mut last_f = f64::NAN;
        let (mut ratio_min, mut ratio_max): (Option<f64>, Option<f64>) = (None, None);

        for k in 1..=horizon {
            let f = p.value(&state.x)?;
            if !f.is_finite() {
                return Err(abort(k, format!("f(x^k) = {f}")));
            }
            let sample = p
                .sample_gradient(&state.x, &mut rng)
                .map_err(|e| abort(k, e.to_string()))?;
            if sample.exact.iter().any(|g| !g.is_finite()) {
                return Err(abort(k, "non-finite exact gradient".into()));
            }
            let step = match self.optimizer {
                OptimizerKind::Rmsprop => state.rmsprop_step(&sample.g, &params),
                OptimizerKind::RmspropMomentum => state.momentum_step(&sample.g, &params),
                OptimizerKind::Sgd => state.sgd_step(&sample.g, sgd_lr),
            };
            step.map_err(|e| abort(k, e.to_string()))?;

            let g1 = vecops::norm1(&sample.exact);
            let g2 = vecops::norm2(&sample.exact);
            let ratio = g1 / (sqrt_d * g2);
            sum_g1 += g1;
            sum_g2 += g2;
            min_f = min_f.min(f);
            if k == 1 {
                initial_f = f;
            }
            last_f = f;
            if g2 > 0.0 {
                ratio_min = Some(ratio_min.map_or(ratio, |r| r.min(ratio)));
                ratio_max = Some(ratio_max.map_or(ratio, |r| r.max(ratio)));
            }
            if k % record_every == 0 || k == horizon {
                let (v_min, v_max) = state
                    .v
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
                records.push(IterRecord {
                    k,
                    f,
                    g1,
                    g2,
                    ratio,
                    v_min,
                    v_max,
                });
            }
        }
        if state.x.iter().any(|x| !x.is_finite()) {
            return Err(abort(horizon, "iterate diverged".into()));
        }

        let t = horizon as f64;
        let summary = RunSummary {
            optimizer: self.optimizer,
            seed,
            horizon,
            dim: p.dim(),
            eta: s.eta(),
            beta: s.beta(),
            theta: s.theta(),
            f_gap: self.f_gap,
            smoothness: p.smoothness(),
            smoothness_certified: p.smoothness_certified(),
            avg_g1: sum_g1 / t,
            avg_g2: sum_g2 / t,
            initial_f,
            final_f: last_f,
            min_f,
            ratio_min,
            ratio_max,
            sgd_step: (self.optimizer == OptimizerKind::Sgd).then_some(sgd_lr),
            sgd_reference: sgd_reference(p.smoothness(), self.f_gap, s.sigma_s(), horizon),
            bound: self.bound.clone(),
        };
        Ok((records, summary))
    }

    pub fn run(&self) -> Result<(Vec<IterRecord>, RunSummary)> {
        self.run_seed(self.seed, self.record_every)
    }

    /// `avg_g1` over seeds `seed .. seed + n_seeds`.
    pub fn seed_sweep(&self, n_seeds: usize) -> Result<SeedStats> {
        if n_seeds < 2 {
            return Err(Error::invalid("a seed sweep needs at least two seeds"));
        }
        let horizon = self.schedule.horizon();
        let values: Vec<f64> = (0..n_seeds as u64)
            .into_par_iter()
            .map(|i| {
                self.run_seed(self.seed.wrapping_add(i), horizon)
                    .map(|(_, s)| s.avg_g1)
            })
            .collect::<Result<_>>()?;
        let (mean, se) = vecops::mean_and_se(&values);
        Ok(SeedStats { mean, se, values })
    }
}

pub fn run(cfg: &RunConfig) -> Result<(Vec<IterRecord>, RunSummary)> {
    cfg.prepare()?.run()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedStats {
    pub mean: f64,
    /// Standard error of the mean; zero when every seed agrees.
    pub se: f64,
    /// Per-seed values in seed order.
    pub values: Vec<f64>,
}

pub fn seed_sweep(cfg: &RunConfig, n_seeds: usize) -> Result<SeedStats> {
    cfg.prepare()?.seed_sweep(n_seeds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub horizon: usize,
    pub mean: f64,
    pub se: f64,
    pub rhs: f64,
    pub term_noise: f64,
    pub term_det: f64,
    pub sgd_reference: f64,
    /// `mean - 3 se > rhs`.
    pub violation: bool,
}

/// The empirical mean exceeds the bound by more than three standard errors.
pub fn is_violation(mean: f64, se: f64, rhs: f64) -> bool {
    mean - 3.0 * se > rhs
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    /// Horizons skipped because `T < e^2/lambda`.
    pub skipped: Vec<usize>,
}

impl SweepOutcome {
    pub fn violations(&self) -> Vec<usize> {
        self.points.iter().filter(|p| p.violation).map(|p| p.horizon).collect()
    }
}

/// Re-derive the schedule at every horizon of `grid` and run a seed sweep.
/// The problem is built once.
pub fn t_sweep(template: &RunConfig, grid: &[usize], n_seeds: usize) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("empty horizon grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("horizon grid must be strictly ascending".into()));
    }
    let problem = template.problem.build()?;
    let mut points = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    for &horizon in grid {
        let prepared = match template.with_horizon(horizon).prepare_with(problem.clone()) {
            Ok(p) => p,
            Err(Error::Inadmissible { .. }) => {
                skipped.push(horizon);
                continue;
            }
            Err(e) => return Err(e),
        };
        let stats = prepared.seed_sweep(n_seeds)?;
        let b = &prepared.bound;
        points.push(SweepPoint {
            horizon,
            mean: stats.mean,
            se: stats.se,
            rhs: b.rhs,
            term_noise: b.term_noise,
            term_det: b.term_det,
            sgd_reference: sgd_reference(
                problem.smoothness(),
                prepared.f_gap,
                prepared.schedule.sigma_s(),
                horizon,
            ),
            violation: is_violation(stats.mean, stats.se, b.rhs),
        });
    }
    Ok(SweepOutcome { points, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `ln value` on `ln T`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::invalid("a rate fit needs at least three points"));
    }
    if let Some((t, v)) = points.iter().find(|(t, v)| !(*t > 0.0 && *v > 0.0)) {
        return Err(Error::invalid(format!("rate fit needs positive T and value, got ({t}, {v})")));
    }
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct T"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit { slope, intercept, r2 })
}
