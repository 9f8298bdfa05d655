//! RMSProp and RMSProp with momentum, their heavy-ball rewriting, the
//! auxiliary z-sequence and the step-size schedule under which the bound holds.
//!
//! The update divides by `sqrt(v)` with no epsilon. Positivity of `v` comes
//! from `v0 > 0` and the recursion, which only adds non-negative mass.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};

/// Hyperparameters of a run together with the quantities derived from them.
///
/// Built only through [`derive_schedule`], so the derived fields always agree
/// with the free ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    gamma: f64,
    lambda: f64,
    theta: f64,
    horizon: usize,
    dim: usize,
    sigma: Vec<f64>,
    eta: f64,
    beta: f64,
    v0: Vec<f64>,
}

impl Schedule {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    /// Iteration budget `T`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
    /// `eta = gamma / sqrt(d T)`.
    pub fn eta(&self) -> f64 {
        self.eta
    }
    /// `beta = 1 - 1/T`.
    pub fn beta(&self) -> f64 {
        self.beta
    }
    /// `v0_i = lambda * max(sigma_i^2, 1/(d T))`.
    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    /// Aggregate noise scale `sqrt(sum_i sigma_i^2)`.
    pub fn sigma_s(&self) -> f64 {
        crate::vecops::norm2(&self.sigma)
    }

    pub fn min_sigma_sq(&self) -> f64 {
        self.sigma
            .iter()
            .map(|s| s * s)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn step_params(&self) -> StepParams {
        StepParams {
            eta: self.eta,
            beta: self.beta,
            theta: self.theta,
        }
    }
}

/// Smallest admissible horizon for a given `lambda`: `T >= e^2 / lambda`.
pub fn min_horizon(lambda: f64) -> f64 {
    std::f64::consts::E.powi(2) / lambda
}

pub fn derive_schedule(
    gamma: f64,
    lambda: f64,
    theta: f64,
    horizon: usize,
    dim: usize,
    sigma: &[f64],
) -> Result<Schedule> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if !(lambda.is_finite() && lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    if !(theta.is_finite() && (0.0..1.0).contains(&theta)) {
        return Err(Error::invalid(format!("theta must lie in [0, 1), got {theta}")));
    }
    if dim == 0 || horizon == 0 {
        return Err(Error::invalid("dimension and horizon must be positive"));
    }
    check_dim(dim, sigma.len())?;
    if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::invalid(format!("noise scales must be finite and >= 0, got {s}")));
    }
    let required = min_horizon(lambda);
    if (horizon as f64) < required {
        return Err(Error::Inadmissible { horizon, required });
    }

    let t = horizon as f64;
    let d = dim as f64;
    let floor = 1.0 / (d * t);
    let v0 = sigma.iter().map(|s| lambda * (s * s).max(floor)).collect();
    Ok(Schedule {
        gamma,
        lambda,
        theta,
        horizon,
        dim,
        sigma: sigma.to_vec(),
        eta: gamma / (d * t).sqrt(),
        beta: 1.0 - 1.0 / t,
        v0,
    })
}

/// The three scalars a single update needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub eta: f64,
    pub beta: f64,
    pub theta: f64,
}

/// Iterate, accumulator and momentum buffer of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    /// Previous iterate; equals `x` before the first step (`x^0 = x^1`).
    pub x_prev: Vec<f64>,
    pub v: Vec<f64>,
    pub m: Vec<f64>,
    /// Number of completed steps.
    pub k: usize,
}

impl OptimizerState {
    pub fn new(x1: Vec<f64>, v0: Vec<f64>) -> Result<Self> {
        check_dim(x1.len(), v0.len())?;
        if let Some(i) = v0.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(format!("v0[{i}] must be positive and finite")));
        }
        if x1.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("initial iterate must be finite"));
        }
        let d = x1.len();
        Ok(Self {
            x_prev: x1.clone(),
            x: x1,
            v: v0,
            m: vec![0.0; d],
            k: 0,
        })
    }

    pub fn for_schedule(x1: Vec<f64>, sched: &Schedule) -> Result<Self> {
        check_dim(sched.dim(), x1.len())?;
        Self::new(x1, sched.v0().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// One plain RMSProp step. `m` is left untouched.
    pub fn rmsprop_step(&mut self, g: &[f64], p: &StepParams) -> Result<()> {
        self.advance(g, p, Direction::Plain)
    }

    /// One momentum step: `v`, then `m`, then `x`.
    ///
    /// With `theta = 0` the iterate is bit-identical to [`Self::rmsprop_step`].
    pub fn momentum_step(&mut self, g: &[f64], p: &StepParams) -> Result<()> {
        self.advance(g, p, Direction::Momentum)
    }

    /// Constant-step SGD, used as a reference baseline. `v` and `m` are untouched.
    pub fn sgd_step(&mut self, g: &[f64], lr: f64) -> Result<()> {
        self.check_gradient(g)?;
        self.x_prev.copy_from_slice(&self.x);
        for (x, g) in self.x.iter_mut().zip(g) {
            *x -= lr * g;
        }
        self.k += 1;
        Ok(())
    }

    fn check_gradient(&self, g: &[f64]) -> Result<()> {
        check_dim(self.dim(), g.len())?;
        if g.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                iteration: self.k + 1,
            });
        }
        Ok(())
    }

    fn advance(&mut self, g: &[f64], p: &StepParams, dir: Direction) -> Result<()> {
        self.check_gradient(g)?;
        let iteration = self.k + 1;
        let one_minus_beta = 1.0 - p.beta;
        let one_minus_theta = 1.0 - p.theta;
        self.x_prev.copy_from_slice(&self.x);
        for (i, &gi) in g.iter().enumerate() {
            let v = p.beta * self.v[i] + one_minus_beta * gi * gi;
            if !(v > 0.0) {
                return Err(Error::NonPositiveAccumulator {
                    coord: i,
                    iteration,
                });
            }
            self.v[i] = v;
            let scaled = gi / v.sqrt();
            let direction = match dir {
                Direction::Plain => scaled,
                Direction::Momentum => {
                    self.m[i] = p.theta * self.m[i] + one_minus_theta * scaled;
                    self.m[i]
                }
            };
            self.x[i] -= p.eta * direction;
        }
        self.k = iteration;
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Plain,
    Momentum,
}

/// Heavy-ball form of the momentum step:
/// `x^{k+1} = x^k - eta (1-theta) g / sqrt(v^k) + theta (x^k - x^{k-1})`,
/// where `v_new` is the accumulator already updated with `g`.
pub fn heavy_ball_step(
    x_k: &[f64],
    x_km1: &[f64],
    v_new: &[f64],
    g: &[f64],
    p: &StepParams,
) -> Result<Vec<f64>> {
    let d = x_k.len();
    check_dim(d, x_km1.len())?;
    check_dim(d, v_new.len())?;
    check_dim(d, g.len())?;
    let step = p.eta * (1.0 - p.theta);
    Ok((0..d)
        .map(|i| x_k[i] - step * (g[i] / v_new[i].sqrt()) + p.theta * (x_k[i] - x_km1[i]))
        .collect())
}

/// Auxiliary sequence `z^k = x^k/(1-theta) - theta x^{k-1}/(1-theta)`.
///
/// Evaluated as `x^k + theta/(1-theta) (x^k - x^{k-1})`, which is the same
/// quantity and returns `x^k` exactly when `theta = 0` or `x^k = x^{k-1}`.
pub fn z_of(x_k: &[f64], x_km1: &[f64], theta: f64) -> Result<Vec<f64>> {
    check_dim(x_k.len(), x_km1.len())?;
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta must lie in [0, 1), got {theta}")));
    }
    let c = theta / (1.0 - theta);
    Ok(x_k
        .iter()
        .zip(x_km1)
        .map(|(x, xp)| x + c * (x - xp))
        .collect())
}

/// `(momentum, lr)` of the usual deep-learning RMSprop API for the momentum step's
/// `(theta, eta)`: `momentum = theta`, `lr = (1 - theta) eta`.
pub fn pytorch_param_map(theta: f64, eta: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&theta) || !(eta > 0.0) {
        return Err(Error::invalid("need theta in [0, 1) and eta > 0"));
    }
    Ok((theta, (1.0 - theta) * eta))
}

/// Inverse of [`pytorch_param_map`].
pub fn from_pytorch_params(momentum: f64, lr: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&momentum) || !(lr > 0.0) {
        return Err(Error::invalid("need momentum in [0, 1) and lr > 0"));
    }
    Ok((momentum, lr / (1.0 - momentum)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(eta: f64, beta: f64, theta: f64) -> StepParams {
        StepParams { eta, beta, theta }
    }

    #[test]
    fn schedule_derivation_examples() {
        let s = derive_schedule(1.0, 1.0, 0.0, 100, 4, &[0.5; 4]).unwrap();
        assert_relative_eq!(s.eta(), 0.05, max_relative = 1e-15);
        assert_relative_eq!(s.beta(), 0.99, max_relative = 1e-15);
        for v in s.v0() {
            assert_relative_eq!(*v, 0.25, max_relative = 1e-15);
        }
    }

    #[test]
    fn zero_noise_uses_floor() {
        let s = derive_schedule(1.0, 1.0, 0.0, 100, 4, &[0.0; 4]).unwrap();
        for v in s.v0() {
            assert_relative_eq!(*v, 0.0025, max_relative = 1e-15);
        }
    }

    #[test]
    fn short_horizon_rejected() {
        let err = derive_schedule(1.0, 1.0, 0.0, 5, 4, &[0.1; 4]).unwrap_err();
        assert!(matches!(err, Error::Inadmissible { horizon: 5, .. }));
        // e^2 = 7.389..., so T = 8 is the first admissible horizon at lambda = 1
        assert!(derive_schedule(1.0, 1.0, 0.0, 7, 4, &[0.1; 4]).is_err());
        assert!(derive_schedule(1.0, 1.0, 0.0, 8, 4, &[0.1; 4]).is_ok());
        assert!(derive_schedule(1.0, 0.5, 0.0, 14, 4, &[0.1; 4]).is_err());
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(derive_schedule(f64::NAN, 1.0, 0.0, 100, 1, &[0.0]).is_err());
        assert!(derive_schedule(1.0, 0.0, 0.0, 100, 1, &[0.0]).is_err());
        assert!(derive_schedule(1.0, 1.5, 0.0, 100, 1, &[0.0]).is_err());
        assert!(derive_schedule(1.0, 1.0, 1.0, 100, 1, &[0.0]).is_err());
        assert!(derive_schedule(1.0, 1.0, 0.0, 100, 1, &[-0.1]).is_err());
        assert!(derive_schedule(1.0, 1.0, 0.0, 100, 2, &[0.1]).is_err());
    }

    #[test]
    fn rmsprop_single_step() {
        // v' = 0.5 * 0.5 + 0.5 * 4 = 2.25, x' = -0.3 * 2 / 1.5
        let mut s = OptimizerState::new(vec![0.0], vec![0.5]).unwrap();
        s.rmsprop_step(&[2.0], &params(0.3, 0.5, 0.0)).unwrap();
        assert_relative_eq!(s.v[0], 2.25);
        assert_relative_eq!(s.x[0], -0.4, max_relative = 1e-15);

        // from v = 1: v' = 2.5
        let mut t = OptimizerState::new(vec![0.0], vec![1.0]).unwrap();
        t.rmsprop_step(&[2.0], &params(0.3, 0.5, 0.0)).unwrap();
        assert_relative_eq!(t.v[0], 2.5);
        assert_relative_eq!(t.x[0], -0.6 / 2.5f64.sqrt(), max_relative = 1e-15);
        assert_eq!(s.x_prev, vec![0.0]);
        assert_eq!(s.m, vec![0.0]);
        assert_eq!(s.k, 1);
    }

    #[test]
    fn rmsprop_two_steps() {
        let p = params(1.0, 0.5, 0.0);
        let mut s = OptimizerState::new(vec![0.0], vec![1.0]).unwrap();
        s.rmsprop_step(&[1.0], &p).unwrap();
        assert_eq!((s.v[0], s.x[0]), (1.0, -1.0));
        s.rmsprop_step(&[1.0], &p).unwrap();
        assert_eq!((s.v[0], s.x[0]), (1.0, -2.0));
    }

    #[test]
    fn zero_gradient_only_decays_v() {
        let mut s = OptimizerState::new(vec![1.5, -2.0], vec![0.4, 2.0]).unwrap();
        s.rmsprop_step(&[0.0, 0.0], &params(0.1, 0.9, 0.0)).unwrap();
        assert_eq!(s.x, vec![1.5, -2.0]);
        assert_eq!(s.v, vec![0.9 * 0.4, 0.9 * 2.0]);

        let mut s = OptimizerState::new(vec![1.5, -2.0], vec![0.4, 2.0]).unwrap();
        s.momentum_step(&[0.0, 0.0], &params(0.1, 0.9, 0.7)).unwrap();
        assert_eq!(s.x, vec![1.5, -2.0]);
    }

    #[test]
    fn momentum_single_step() {
        let mut s = OptimizerState::new(vec![0.0], vec![0.5]).unwrap();
        s.momentum_step(&[2.0], &params(0.3, 0.5, 0.5)).unwrap();
        assert_relative_eq!(s.v[0], 2.25);
        assert_relative_eq!(s.m[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(s.x[0], -0.2, max_relative = 1e-15);
    }

    #[test]
    fn theta_zero_matches_rmsprop_bitwise() {
        let p = params(0.05, 0.99, 0.0);
        let x1 = vec![0.3, -1.2, 4.0];
        let mut a = OptimizerState::new(x1.clone(), vec![0.2, 0.1, 3.0]).unwrap();
        let mut b = a.clone();
        let gs = [[0.7, -2.0, 1e-3], [-0.1, 0.0, 5.0], [1.0, 1.0, -1.0]];
        for g in &gs {
            a.rmsprop_step(g, &p).unwrap();
            b.momentum_step(g, &p).unwrap();
            assert_eq!(a.x, b.x);
            assert_eq!(a.v, b.v);
        }
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut s = OptimizerState::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let err = s
            .momentum_step(&[1.0, f64::NAN], &params(0.1, 0.9, 0.5))
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { iteration: 1, .. }));
        // state untouched on rejection
        assert_eq!(s.k, 0);
        assert_eq!(s.x, vec![0.0, 0.0]);
    }

    #[test]
    fn initial_state_convention() {
        let s = OptimizerState::new(vec![1.0, 2.0], vec![0.1, 0.1]).unwrap();
        assert_eq!(s.x_prev, s.x);
        assert_eq!(s.m, vec![0.0, 0.0]);
        assert!(OptimizerState::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn heavy_ball_reductions() {
        let p0 = params(0.3, 0.5, 0.0);
        let x = [1.0, -1.0];
        let xp = [0.5, 2.0];
        let v = [4.0, 1.0];
        let g = [2.0, -1.0];
        let next = heavy_ball_step(&x, &xp, &v, &g, &p0).unwrap();
        assert_eq!(next, vec![1.0 - 0.3 * (2.0 / 2.0), -1.0 - 0.3 * (-1.0 / 1.0)]);

        // First step: x^0 = x^1 and m^0 = 0.
        let p = params(0.3, 0.5, 0.5);
        let mut s = OptimizerState::new(vec![0.0], vec![1.0]).unwrap();
        let x1 = s.x.clone();
        s.momentum_step(&[2.0], &p).unwrap();
        let hb = heavy_ball_step(&x1, &x1, &s.v, &[2.0], &p).unwrap();
        assert_relative_eq!(hb[0], s.x[0], max_relative = 1e-15);
        assert!(heavy_ball_step(&x, &xp, &v, &[1.0], &p).is_err());
    }

    #[test]
    fn z_sequence_examples() {
        assert_eq!(z_of(&[3.0], &[1.0], 0.5).unwrap(), vec![5.0]);
        assert_eq!(z_of(&[3.0, -7.25], &[1.0, 4.0], 0.0).unwrap(), vec![3.0, -7.25]);
        assert_eq!(z_of(&[0.1, 1e9], &[0.1, 1e9], 0.99).unwrap(), vec![0.1, 1e9]);
        assert!(z_of(&[1.0], &[1.0, 2.0], 0.5).is_err());
        assert!(z_of(&[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn pytorch_mapping() {
        assert_eq!(pytorch_param_map(0.0, 0.05).unwrap(), (0.0, 0.05));
        let (mom, lr) = pytorch_param_map(0.9, 0.1).unwrap();
        assert_eq!(mom, 0.9);
        assert_relative_eq!(lr, 0.01, max_relative = 1e-14);
        assert!(pytorch_param_map(1.0, 0.1).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pytorch_round_trip(theta in 0.0f64..0.999, eta in 1e-6f64..10.0) {
                let (mom, lr) = pytorch_param_map(theta, eta).unwrap();
                let (t2, e2) = from_pytorch_params(mom, lr).unwrap();
                prop_assert_eq!(t2, theta);
                prop_assert!((e2 - eta).abs() <= 4.0 * f64::EPSILON * eta);
            }

            #[test]
            fn permutation_equivariance(
                rows in proptest::collection::vec(
                    (-5.0f64..5.0, 0.01f64..5.0, -1.0f64..1.0, -5.0f64..5.0), 2..8),
                theta in 0.0f64..0.99,
                rot in 0usize..8,
            ) {
                let d = rows.len();
                let perm: Vec<usize> = (0..d).map(|i| (i + rot) % d).collect();
                let p = StepParams { eta: 0.1, beta: 0.9, theta };
                let mut s = OptimizerState::new(
                    rows.iter().map(|r| r.0).collect(),
                    rows.iter().map(|r| r.1).collect(),
                ).unwrap();
                s.m = rows.iter().map(|r| r.2).collect();
                let g: Vec<f64> = rows.iter().map(|r| r.3).collect();
                let mut sp = OptimizerState::new(
                    perm.iter().map(|&i| s.x[i]).collect(),
                    perm.iter().map(|&i| s.v[i]).collect(),
                ).unwrap();
                sp.m = perm.iter().map(|&i| s.m[i]).collect();
                let gp: Vec<f64> = perm.iter().map(|&i| g[i]).collect();
                s.momentum_step(&g, &p).unwrap();
                sp.momentum_step(&gp, &p).unwrap();
                for (j, &i) in perm.iter().enumerate() {
                    prop_assert_eq!(sp.x[j], s.x[i]);
                    prop_assert_eq!(sp.v[j], s.v[i]);
                    prop_assert_eq!(sp.m[j], s.m[i]);
                }
            }

            #[test]
            fn accumulator_floor(
                gs in proptest::collection::vec(-100.0f64..100.0, 1..200),
                v0 in 1e-8f64..10.0,
            ) {
                let t = gs.len().max(8);
                let beta = 1.0 - 1.0 / t as f64;
                let p = StepParams { eta: 0.01, beta, theta: 0.0 };
                let mut s = OptimizerState::new(vec![0.0], vec![v0]).unwrap();
                let mut decay = v0;
                for g in &gs {
                    s.rmsprop_step(&[*g], &p).unwrap();
                    decay *= beta;
                    prop_assert!(s.v[0] >= decay);
                    let e2 = std::f64::consts::E.powi(-2);
                    prop_assert!(s.v[0] >= v0 * e2 * (1.0 - 1e-12));
                }
            }
        }
    }
}
