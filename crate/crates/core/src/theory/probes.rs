//! Pathwise and Monte-Carlo checks of the inequalities behind the bound.
//!
//! Each probe reports `lhs`, `rhs` and `margin = rhs - lhs` for its worst
//! case, and passes when `margin >= -tolerance`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::optim::{z_of, OptimizerState, Schedule, StepParams};
use crate::problems::Problem;
use crate::rng::{stream, Purpose};
use crate::vecops;

/// Absolute slack for deterministic probes, scaled by `max(1, |rhs|)`.
pub const DETERMINISTIC_SLACK: f64 = 1e-12;
/// Relative slack for probes that run a full trajectory.
pub const TRAJECTORY_SLACK: f64 = 1e-9;
/// Standard errors of slack for Monte-Carlo probes.
pub const MC_STANDARD_ERRORS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ProbeResult {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            tolerance,
            passed: margin >= -tolerance,
        }
    }

    /// `margin` divided by `1 + |rhs|`.
    pub fn relative_margin(&self) -> f64 {
        self.margin / (1.0 + self.rhs.abs())
    }
}

/// `(1-beta) sum_t g_t^2 / v_t <= ln(v_k / (beta^k v_0))` for
/// `v_t = beta v_{t-1} + (1-beta) g_t^2`.
///
/// The right side is accumulated as the telescoping sum
/// `sum_t ln(v_t / (beta v_{t-1}))`, which equals it exactly in real
/// arithmetic and avoids forming `beta^k`. Each term is evaluated with
/// `ln_1p` since the ratio is close to 1 for small gradients.
pub fn lemma1_probe(g_seq: &[f64], v0: f64, beta: f64) -> Result<ProbeResult> {
    if !(v0.is_finite() && v0 > 0.0) {
        return Err(Error::invalid("v0 must be positive"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta must lie in (0, 1)"));
    }
    let mut v = v0;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for g in g_seq {
        let decayed = beta * v;
        let added = (1.0 - beta) * g * g;
        v = decayed + added;
        lhs += added / v;
        rhs += (added / decayed).ln_1p();
    }
    let tol = DETERMINISTIC_SLACK * rhs.abs().max(1.0);
    Ok(ProbeResult::new("lemma1", lhs, rhs, tol))
}

/// `ln(1 - x) <= -x` for every `x < 1`; reports the tightest sample.
pub fn log_inequality_probe(samples: &[f64]) -> Result<ProbeResult> {
    if let Some(x) = samples.iter().find(|x| !(**x < 1.0)) {
        return Err(Error::invalid(format!("samples must be < 1, got {x}")));
    }
    let mut worst = ProbeResult::new("log_inequality", f64::NEG_INFINITY, 0.0, 0.0);
    for &x in samples {
        let lhs = (-x).ln_1p();
        let rhs = -x;
        let p = ProbeResult::new("log_inequality", lhs, rhs, DETERMINISTIC_SLACK * rhs.abs().max(1.0));
        if p.margin + p.tolerance < worst.margin + worst.tolerance {
            worst = p;
        }
    }
    Ok(worst)
}

/// One point of a momentum trajectory: `x^k`, `z^k`, and the gradient
/// `g^k` drawn at `x^k` together with the accumulator `v^k` it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    pub g: Vec<f64>,
}

/// Run `steps` momentum steps from `x1` and keep every point.
pub fn record_momentum_trajectory(
    problem: &Problem,
    sched: &Schedule,
    x1: &[f64],
    steps: usize,
    seed: u64,
) -> Result<Vec<TrajectoryPoint>> {
    let params = sched.step_params();
    let mut state = OptimizerState::for_schedule(x1.to_vec(), sched)?;
    let mut rng = stream(seed, Purpose::GradientNoise);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let x = state.x.clone();
        let z = z_of(&state.x, &state.x_prev, params.theta)?;
        let sample = problem.sample_gradient(&state.x, &mut rng)?;
        state.momentum_step(&sample.g, &params)?;
        out.push(TrajectoryPoint {
            x,
            z,
            v: state.v.clone(),
            g: sample.g,
        });
    }
    Ok(out)
}

/// The three gradient-norm inequalities linking `x^k` and `z^k`:
///
/// 1. `||grad f(x^k) - grad f(z^k)||^2 <= L^2 theta^2 eta^2/(1-theta) S_k`
/// 2. `||grad f(x^k)||^2 <= 4L (f(z^k) - f*) + 2 L^2 theta^2 eta^2/(1-theta) S_k`
/// 3. `sum_{k<=K} ||grad f(x^k)||^2 <= 4L (sum_{k<=K} (f(z^k) - f*) + L theta^2 eta^2/(2(1-theta)^2) sum_{t<K} q_t)`
///
/// with `q_t = sum_i (g_i^t)^2 / v_i^t` and `S_k = sum_{t<k} theta^{k-1-t} q_t`
/// (zero at `k = 1`). Each result carries the worst `k` by relative margin.
pub fn lemma2_probe(
    trajectory: &[TrajectoryPoint],
    problem: &Problem,
    params: &StepParams,
) -> Result<Vec<ProbeResult>> {
    if !problem.smoothness_certified() {
        return Err(Error::invalid(
            "lemma2 needs a certified smoothness constant; this problem's L is an estimate",
        ));
    }
    let l = problem.smoothness();
    let f_star = problem.f_star();
    let (theta, eta) = (params.theta, params.eta);
    let coupling = l * l * theta * theta * eta * eta / (1.0 - theta);
    let summed_coupling = l * theta * theta * eta * eta / (2.0 * (1.0 - theta) * (1.0 - theta));

    let mut worst: [Option<ProbeResult>; 3] = [None, None, None];
    let mut keep = |slot: usize, p: ProbeResult| {
        let replace = match &worst[slot] {
            None => true,
            Some(w) => p.relative_margin() < w.relative_margin(),
        };
        if replace {
            worst[slot] = Some(p);
        }
    };

    let mut discounted = 0.0; // S_k
    let mut q_sum = 0.0; // sum_{t<k} q_t
    let mut grad_sq_sum = 0.0;
    let mut gap_sum = 0.0;
    for pt in trajectory {
        check_dim(problem.dim(), pt.x.len())?;
        let gx = problem.gradient(&pt.x)?;
        let gz = problem.gradient(&pt.z)?;
        let gap = problem.value(&pt.z)? - f_star;
        let grad_sq = vecops::norm2_sq(&gx);
        let diff_sq: f64 = gx.iter().zip(&gz).map(|(a, b)| (a - b) * (a - b)).sum();

        let tol = |rhs: f64| TRAJECTORY_SLACK * (1.0 + rhs.abs());
        let rhs1 = coupling * discounted;
        keep(0, ProbeResult::new("lemma2_gradient_gap", diff_sq, rhs1, tol(rhs1)));
        let rhs2 = 4.0 * l * gap + 2.0 * coupling * discounted;
        keep(1, ProbeResult::new("lemma2_gradient_norm", grad_sq, rhs2, tol(rhs2)));
        grad_sq_sum += grad_sq;
        gap_sum += gap;
        let rhs3 = 4.0 * l * (gap_sum + summed_coupling * q_sum);
        keep(2, ProbeResult::new("lemma2_summed", grad_sq_sum, rhs3, tol(rhs3)));

        let q: f64 = pt.g.iter().zip(&pt.v).map(|(g, v)| g * g / v).sum();
        discounted = theta * discounted + q;
        q_sum += q;
    }
    worst
        .into_iter()
        .map(|p| p.ok_or_else(|| Error::invalid("empty trajectory")))
        .collect()
}

/// `beta v^{k-1} + (1-beta) (|grad_i f(x^k)|^2 + sigma_i^2)`: the accumulator
/// with the squared stochastic gradient replaced by its conditional mean bound.
pub fn surrogate_accumulator(v_prev: &[f64], grad: &[f64], sigma: &[f64], beta: f64) -> Vec<f64> {
    v_prev
        .iter()
        .zip(grad)
        .zip(sigma)
        .map(|((v, g), s)| beta * v + (1.0 - beta) * (g * g + s * s))
        .collect()
}

/// Per-trajectory sums entering the surrogate-accumulator inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSums {
    /// `sum_k sum_i sqrt(v~_i^k)`.
    pub sqrt_sum: f64,
    /// `sum_k sum_i |grad_i f(x^k)|^2 / sqrt(v~_i^k)`.
    pub weighted_grad_sum: f64,
}

pub fn surrogate_sums(
    problem: &Problem,
    sched: &Schedule,
    x1: &[f64],
    steps: usize,
    seed: u64,
) -> Result<SurrogateSums> {
    let params = sched.step_params();
    let mut state = OptimizerState::for_schedule(x1.to_vec(), sched)?;
    let mut rng = stream(seed, Purpose::GradientNoise);
    let mut sums = SurrogateSums {
        sqrt_sum: 0.0,
        weighted_grad_sum: 0.0,
    };
    for _ in 0..steps {
        let sample = problem.sample_gradient(&state.x, &mut rng)?;
        let tilde = surrogate_accumulator(&state.v, &sample.exact, sched.sigma(), params.beta);
        for (g, vt) in sample.exact.iter().zip(&tilde) {
            let root = vt.sqrt();
            sums.sqrt_sum += root;
            sums.weighted_grad_sum += g * g / root;
        }
        state.momentum_step(&sample.g, &params)?;
    }
    Ok(sums)
}

/// Monte-Carlo check of
/// `sum_i sum_k E sqrt(v~_i^k) <= max{K sqrt(d sigma_s^2), sqrt(dT)} + 2 sum_t sum_i E[|grad_i f(x^t)|^2 / sqrt(v~_i^t)]`
/// over seeds `base_seed .. base_seed + n_seeds`.
///
/// Passes when the seed mean of `lhs - rhs` is at most three standard errors
/// of that paired difference above zero.
pub fn lemma6_probe(
    problem: &Problem,
    sched: &Schedule,
    x1: &[f64],
    steps: usize,
    n_seeds: usize,
    base_seed: u64,
) -> Result<ProbeResult> {
    if steps == 0 || steps > sched.horizon() {
        return Err(Error::invalid("need 1 <= K <= T"));
    }
    if n_seeds < 2 {
        return Err(Error::invalid("need at least two seeds for a standard error"));
    }
    let d = sched.dim() as f64;
    let t = sched.horizon() as f64;
    let sigma_s = sched.sigma_s();
    let floor = (steps as f64 * (d * sigma_s * sigma_s).sqrt()).max((d * t).sqrt());

    let per_seed: Vec<SurrogateSums> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| surrogate_sums(problem, sched, x1, steps, base_seed.wrapping_add(i)))
        .collect::<Result<_>>()?;

    let lhs: Vec<f64> = per_seed.iter().map(|s| s.sqrt_sum).collect();
    let rhs: Vec<f64> = per_seed.iter().map(|s| floor + 2.0 * s.weighted_grad_sum).collect();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    let (lhs_mean, _) = vecops::mean_and_se(&lhs);
    let (rhs_mean, _) = vecops::mean_and_se(&rhs);
    let (_, diff_se) = vecops::mean_and_se(&diff);
    Ok(ProbeResult::new("lemma6", lhs_mean, rhs_mean, MC_STANDARD_ERRORS * diff_se))
}

/// Largest observed `||grad f(y) - grad f(x)|| / ||y - x||` against the
/// problem's smoothness constant, over Gaussian pairs around `x^1`.
pub fn lipschitz_probe(problem: &Problem, n_pairs: usize, spread: f64, seed: u64) -> Result<ProbeResult> {
    let mut rng = stream(seed, Purpose::Probe);
    let center = problem.initial_point().to_vec();
    let mut worst: f64 = 0.0;
    for _ in 0..n_pairs {
        let x: Vec<f64> = center.iter().map(|c| c + spread * crate::rng::normal(&mut rng)).collect();
        let y: Vec<f64> = center.iter().map(|c| c + spread * crate::rng::normal(&mut rng)).collect();
        let dx = vecops::dist2(&x, &y);
        if dx == 0.0 {
            continue;
        }
        let dg = vecops::dist2(&problem.gradient(&x)?, &problem.gradient(&y)?);
        worst = worst.max(dg / dx);
    }
    let l = problem.smoothness();
    Ok(ProbeResult::new("smoothness", worst, l, TRAJECTORY_SLACK * l))
}

/// Per-coordinate Monte-Carlo moments of the gradient oracle at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMoments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub exact: Vec<f64>,
    pub samples: usize,
}

pub fn oracle_moments(problem: &Problem, x: &[f64], samples: usize, seed: u64) -> Result<OracleMoments> {
    if samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let d = problem.dim();
    let mut rng = stream(seed, Purpose::Probe);
    let exact = problem.gradient(x)?;
    // Accumulate deviations from the exact gradient to keep the sums small.
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    for _ in 0..samples {
        let g = problem.sample_gradient(x, &mut rng)?.g;
        for i in 0..d {
            let e = g[i] - exact[i];
            s1[i] += e;
            s2[i] += e * e;
        }
    }
    let n = samples as f64;
    let mean = (0..d).map(|i| exact[i] + s1[i] / n).collect();
    let variance = (0..d)
        .map(|i| (s2[i] - s1[i] * s1[i] / n) / (n - 1.0))
        .collect();
    Ok(OracleMoments {
        mean,
        variance,
        exact,
        samples,
    })
}

/// Unbiasedness (`max_i |mean_i - grad_i| / (sigma_i/sqrt(n)) <= 5`) and
/// variance (`max_i |var_i / sigma_i^2 - 1| <= 0.05`) of the additive oracle.
/// Coordinates with `sigma_i = 0` must be exact.
pub fn oracle_probes(problem: &Problem, x: &[f64], samples: usize, seed: u64) -> Result<Vec<ProbeResult>> {
    let m = oracle_moments(problem, x, samples, seed)?;
    let root_n = (samples as f64).sqrt();
    let mut worst_z: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    for (i, s) in problem.sigma().iter().enumerate() {
        let dev = (m.mean[i] - m.exact[i]).abs();
        if *s == 0.0 {
            if dev != 0.0 || m.variance[i] != 0.0 {
                worst_z = f64::INFINITY;
                worst_var = f64::INFINITY;
            }
            continue;
        }
        worst_z = worst_z.max(dev / (s / root_n));
        worst_var = worst_var.max((m.variance[i] / (s * s) - 1.0).abs());
    }
    Ok(vec![
        ProbeResult::new("oracle_unbiased", worst_z, 5.0, 0.0),
        ProbeResult::new("oracle_variance", worst_var, 0.05, 0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::derive_schedule;
    use crate::problems::make_quadratic;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn lemma1_single_step() {
        let p = lemma1_probe(&[1.0], 1.0, 0.5).unwrap();
        assert_eq!(p.lhs, 0.5);
        assert_relative_eq!(p.rhs, 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(p.margin, 2f64.ln() - 0.5, max_relative = 1e-14);
        assert!(p.passed);
    }

    #[test]
    fn lemma1_zero_sequence_is_tight() {
        let p = lemma1_probe(&[0.0; 1000], 1e-4, 0.9).unwrap();
        assert_eq!(p.lhs, 0.0);
        assert_eq!(p.rhs, 0.0);
        assert_eq!(p.margin, 0.0);
        assert!(p.passed);
    }

    #[test]
    fn lemma1_telescoped_matches_closed_form() {
        let mut rng = stream(3, Purpose::Probe);
        let gs: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (v0, beta) = (0.3, 0.97);
        let p = lemma1_probe(&gs, v0, beta).unwrap();
        let mut v = v0;
        for g in &gs {
            v = beta * v + (1.0 - beta) * g * g;
        }
        let closed = v.ln() - gs.len() as f64 * beta.ln() - v0.ln();
        assert_relative_eq!(p.rhs, closed, max_relative = 1e-12);
    }

    #[test]
    fn log_inequality_examples() {
        let p = log_inequality_probe(&[0.0]).unwrap();
        assert_eq!(p.margin, 0.0);
        let p = log_inequality_probe(&[0.5]).unwrap();
        assert_relative_eq!(p.lhs, 0.5f64.ln());
        assert!(p.passed && p.margin > 0.19);
        assert!(log_inequality_probe(&[1.0]).is_err());
    }

    #[test]
    fn lemma2_requires_certified_l() {
        let p = crate::problems::make_toy_mlp(2, 3, 16, 1).unwrap();
        let params = StepParams {
            eta: 0.01,
            beta: 0.99,
            theta: 0.5,
        };
        assert!(lemma2_probe(&[], &p, &params).is_err());
    }

    #[test]
    fn lemma2_theta_zero_gap_is_exactly_zero() {
        let p = make_quadratic(3, &[0.5, 1.0, 2.0]).unwrap().with_noise(vec![0.2; 3]).unwrap();
        let sched = derive_schedule(1.0, 1.0, 0.0, 200, 3, p.sigma()).unwrap();
        let traj = record_momentum_trajectory(&p, &sched, p.initial_point(), 200, 4).unwrap();
        let res = lemma2_probe(&traj, &p, &sched.step_params()).unwrap();
        assert_eq!(res[0].lhs, 0.0);
        assert_eq!(res[0].rhs, 0.0);
        assert!(res.iter().all(|r| r.passed));
    }

    #[test]
    fn lemma2_first_point_reduces_to_descent_bound() {
        let p = make_quadratic(2, &[1.0, 3.0]).unwrap();
        let sched = derive_schedule(1.0, 1.0, 0.9, 100, 2, p.sigma()).unwrap();
        let traj = record_momentum_trajectory(&p, &sched, &[2.0, -1.0], 1, 0).unwrap();
        let res = lemma2_probe(&traj, &p, &sched.step_params()).unwrap();
        // ||grad f(x^1)||^2 = 4 + 9 = 13 <= 4 L f(x^1) = 4 * 3 * 3.5
        assert_eq!(res[1].lhs, 13.0);
        assert_eq!(res[1].rhs, 42.0);
    }

    #[test]
    fn surrogate_equals_accumulator_without_noise() {
        let p = make_quadratic(3, &[0.5, 1.0, 2.0]).unwrap();
        let sched = derive_schedule(1.0, 1.0, 0.5, 50, 3, p.sigma()).unwrap();
        let params = sched.step_params();
        let mut state = OptimizerState::for_schedule(p.initial_point().to_vec(), &sched).unwrap();
        for _ in 0..50 {
            let g = p.gradient(&state.x).unwrap();
            let tilde = surrogate_accumulator(&state.v, &g, sched.sigma(), params.beta);
            state.momentum_step(&g, &params).unwrap();
            assert_eq!(tilde, state.v);
        }
    }

    #[test]
    fn lemma6_stationary_start() {
        let p = make_quadratic(4, &[1.0; 4]).unwrap();
        let sched = derive_schedule(1.0, 1.0, 0.0, 100, 4, p.sigma()).unwrap();
        let r = lemma6_probe(&p, &sched, &[0.0; 4], 100, 4, 0).unwrap();
        assert!(r.passed);
        assert_eq!(r.tolerance, 0.0);
        assert_relative_eq!(r.rhs, 20.0, max_relative = 1e-15);
    }

    #[test]
    fn quadratic_is_within_its_smoothness() {
        let p = make_quadratic(5, &[0.1, 0.5, 0.7, 0.9, 1.0]).unwrap();
        let r = lipschitz_probe(&p, 1000, 2.0, 1).unwrap();
        assert!(r.passed);
        assert!(r.lhs <= 1.0 + 1e-12);
    }
}
