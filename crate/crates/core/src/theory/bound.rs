use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::Schedule;

/// Which term of the bound dominates asymptotically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `T >= L (f(x^1) - f*) / sigma_s^2`: the `T^{-1/4}` term dominates.
    Noise,
    /// Small noise: the `T^{-1/2}` term dominates.
    Deterministic,
}

/// The constant `F` and the two terms of the l1 convergence bound
///
/// `(1/T) sum_k E||grad f(x^k)||_1 <= sqrt(d)/T^{1/4} sqrt(2 F sigma_s / gamma) + sqrt(d)/sqrt(T) 4F/gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub gamma: f64,
    #[serde(rename = "F")]
    pub f_const: f64,
    pub f_over_gamma: f64,
    /// The five arguments of the max defining `F/gamma`, in order:
    /// `1`, `3(2L gamma+3) ln(2L gamma+3)`, `3 f_gap / gamma`, `3 A ln A`, `B ln C`.
    pub branches: [f64; 5],
    /// Index into `branches` of the active argument.
    pub active_branch: usize,
    pub term_noise: f64,
    pub term_det: f64,
    pub rhs: f64,
    pub dominant: Regime,
}

/// Raw inputs of the `F` constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub gamma: f64,
    pub lambda: f64,
    pub theta: f64,
    pub horizon: usize,
    pub dim: usize,
    pub smoothness: f64,
    pub f_gap: f64,
    pub sigma_s: f64,
    pub min_sigma_sq: f64,
}

impl BoundInputs {
    pub fn from_schedule(sched: &Schedule, smoothness: f64, f_gap: f64) -> Self {
        Self {
            gamma: sched.gamma(),
            lambda: sched.lambda(),
            theta: sched.theta(),
            horizon: sched.horizon(),
            dim: sched.dim(),
            smoothness,
            f_gap,
            sigma_s: sched.sigma_s(),
            min_sigma_sq: sched.min_sigma_sq(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.smoothness.is_finite() && self.smoothness > 0.0) {
            return Err(Error::invalid(format!(
                "smoothness must be positive, got {}",
                self.smoothness
            )));
        }
        if !(self.f_gap.is_finite() && self.f_gap >= 0.0) {
            return Err(Error::invalid(format!(
                "f(x^1) - f* must be non-negative, got {}",
                self.f_gap
            )));
        }
        if !(self.gamma > 0.0 && self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::invalid("need gamma > 0 and lambda in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.theta) || self.horizon == 0 || self.dim == 0 {
            return Err(Error::invalid("need theta in [0, 1) and positive T, d"));
        }
        if !(self.sigma_s >= 0.0 && self.min_sigma_sq >= 0.0) {
            return Err(Error::invalid("noise scales must be non-negative"));
        }
        Ok(())
    }

    /// The five max-arguments of `F/gamma`.
    pub fn branches(&self) -> [f64; 5] {
        let l_gamma = self.smoothness * self.gamma;
        let t = self.horizon as f64;
        let lam = self.lambda;
        let th = self.theta;

        let c2 = 2.0 * l_gamma + 3.0;
        let noise = 6.0 * E * self.sigma_s / (lam * t).sqrt();
        let b = noise + 3.0 * l_gamma / (1.0 - th).powf(1.5);
        let a = b + 3.0;
        // max{d min sigma_i^2, 1/T} keeps the log argument finite when some sigma_i = 0
        let floor = (self.dim as f64 * self.min_sigma_sq).max(1.0 / t);
        let momentum = 1.0 + th * th / (2.0 * t * (1.0 - th) * (1.0 - th));
        let c = 4.0 * l_gamma * E * E / (lam * floor) * momentum + 12.0 / lam;

        [
            1.0,
            3.0 * c2 * c2.ln(),
            3.0 * self.f_gap / self.gamma,
            3.0 * a * a.ln(),
            b * c.ln(),
        ]
    }
}

/// `F`, its branches and the bound's right-hand side for a schedule.
pub fn compute_f(
    sched: &Schedule,
    smoothness: f64,
    f_gap: f64,
    sigma_s: f64,
    min_sigma_sq: f64,
) -> Result<BoundReport> {
    let inputs = BoundInputs {
        sigma_s,
        min_sigma_sq,
        ..BoundInputs::from_schedule(sched, smoothness, f_gap)
    };
    bound_from_inputs(&inputs)
}

pub fn bound_from_inputs(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let branches = inputs.branches();
    let (active_branch, f_over_gamma) = branches
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let f_const = inputs.gamma * f_over_gamma;
    let (term_noise, term_det, rhs) =
        theorem_rhs(f_const, inputs.gamma, inputs.sigma_s, inputs.dim, inputs.horizon);
    Ok(BoundReport {
        gamma: inputs.gamma,
        f_const,
        f_over_gamma,
        branches,
        active_branch,
        term_noise,
        term_det,
        rhs,
        dominant: regime(inputs.horizon, inputs.smoothness, inputs.f_gap, inputs.sigma_s),
    })
}

/// `(sqrt(d) T^{-1/4} sqrt(2 F sigma_s / gamma), sqrt(d) T^{-1/2} 4 F / gamma, sum)`.
pub fn theorem_rhs(f_const: f64, gamma: f64, sigma_s: f64, dim: usize, horizon: usize) -> (f64, f64, f64) {
    let sqrt_d = (dim as f64).sqrt();
    let t = horizon as f64;
    let term_noise = sqrt_d / t.powf(0.25) * (2.0 * f_const * sigma_s / gamma).sqrt();
    let term_det = sqrt_d / t.sqrt() * 4.0 * f_const / gamma;
    (term_noise, term_det, term_noise + term_det)
}

/// Noise-dominated iff `T >= L f_gap / sigma_s^2`; deterministic when `sigma_s = 0`.
pub fn regime(horizon: usize, smoothness: f64, f_gap: f64, sigma_s: f64) -> Regime {
    if sigma_s > 0.0 && horizon as f64 >= smoothness * f_gap / (sigma_s * sigma_s) {
        Regime::Noise
    } else {
        Regime::Deterministic
    }
}

/// Step-size scale `gamma = sqrt(f_gap / L)` that balances the bound.
pub fn corollary_gamma(smoothness: f64, f_gap: f64) -> Result<f64> {
    if !(smoothness.is_finite() && smoothness > 0.0 && f_gap.is_finite() && f_gap > 0.0) {
        return Err(Error::invalid(format!(
            "need L > 0 and f(x^1) - f* > 0, got L = {smoothness}, gap = {f_gap}"
        )));
    }
    Ok((f_gap / smoothness).sqrt())
}

/// Horizon thresholds attached to the balanced step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorollaryGates {
    /// `sigma_s^2 / (lambda L f_gap)`: beyond it `sigma_s/sqrt(lambda T) <= sqrt(L f_gap)`.
    pub relaxation_horizon: f64,
    /// `L f_gap / sigma_s^2`: beyond it the `T^{-1/4}` term dominates.
    pub noise_dominant_horizon: f64,
}

pub fn corollary_gates(smoothness: f64, f_gap: f64, sigma_s: f64, lambda: f64) -> CorollaryGates {
    let lf = smoothness * f_gap;
    let s2 = sigma_s * sigma_s;
    CorollaryGates {
        relaxation_horizon: s2 / (lambda * lf),
        noise_dominant_horizon: lf / s2,
    }
}

/// SGD reference curve `(sigma_s^2 L f_gap)^{1/4} / T^{1/4}` with the order
/// constant set to 1. A reference, not a certified bound.
pub fn sgd_reference(smoothness: f64, f_gap: f64, sigma_s: f64, horizon: usize) -> f64 {
    (sigma_s * sigma_s * smoothness * f_gap).powf(0.25) / (horizon as f64).powf(0.25)
}

/// `beta^k` for `beta = 1 - 1/T`.
pub fn beta_power(horizon: usize, k: usize) -> f64 {
    let beta = 1.0 - 1.0 / horizon as f64;
    beta.powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::derive_schedule;
    use approx::assert_relative_eq;

    // Values frozen from an independent script evaluating the five max-arguments.
    #[test]
    fn noiseless_branches() {
        let sched = derive_schedule(1.0, 1.0, 0.0, 10_000, 10, &[0.0; 10]).unwrap();
        let r = compute_f(&sched, 1.0, 0.0, 0.0, 0.0).unwrap();
        let expected = [1.0, 24.141568686511505, 0.0, 32.25167044610499, 37.79002599857059];
        for (got, want) in r.branches.iter().zip(expected) {
            assert_relative_eq!(*got, want, max_relative = 1e-13);
        }
        assert_relative_eq!(r.branches[1], 15.0 * 5f64.ln(), max_relative = 1e-15);
        assert_eq!(r.active_branch, 4);
        assert_eq!(r.f_const, r.gamma * r.f_over_gamma);
        assert_eq!(r.term_noise, 0.0);
        assert_relative_eq!(r.rhs, 4.780102199698482, max_relative = 1e-13);
        assert_eq!(r.dominant, Regime::Deterministic);
    }

    #[test]
    fn f_over_gamma_at_least_one() {
        let sched = derive_schedule(1e-6, 1.0, 0.0, 100, 1, &[0.0]).unwrap();
        let r = compute_f(&sched, 1e-6, 0.0, 0.0, 0.0).unwrap();
        assert!(r.f_over_gamma >= 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sched = derive_schedule(1.0, 1.0, 0.0, 100, 1, &[0.0]).unwrap();
        assert!(compute_f(&sched, 1.0, -0.1, 0.0, 0.0).is_err());
        assert!(compute_f(&sched, 0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rhs_examples() {
        let (tn, td, rhs) = theorem_rhs(2.0, 1.0, 1.0, 4, 256);
        assert_relative_eq!(tn, 1.0, max_relative = 1e-15);
        assert_relative_eq!(td, 1.0, max_relative = 1e-15);
        assert_relative_eq!(rhs, 2.0, max_relative = 1e-15);

        let (tn, td, rhs) = theorem_rhs(3.0, 1.5, 0.0, 9, 100);
        assert_eq!(tn, 0.0);
        assert_relative_eq!(rhs, 4.0 * 3.0 * 3.0 / (1.5 * 10.0), max_relative = 1e-15);
        assert_eq!(td, rhs);

        let (a_n, a_d, _) = theorem_rhs(5.0, 1.0, 0.7, 10, 1000);
        let (b_n, b_d, _) = theorem_rhs(5.0, 1.0, 0.7, 10, 16_000);
        assert_relative_eq!(a_n / b_n, 2.0, max_relative = 1e-14);
        assert_relative_eq!(a_d / b_d, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn corollary_examples() {
        assert_eq!(corollary_gamma(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(corollary_gamma(4.0, 1.0).unwrap(), 0.5);
        assert!(corollary_gamma(0.0, 1.0).is_err());
        assert!(corollary_gamma(1.0, 0.0).is_err());
        let g = corollary_gates(2.0, 3.0, 1.5, 0.5);
        assert_relative_eq!(g.relaxation_horizon, 2.25 / (0.5 * 6.0));
        assert_relative_eq!(g.noise_dominant_horizon, 6.0 / 2.25);
    }

    #[test]
    fn sgd_reference_examples() {
        assert_relative_eq!(sgd_reference(1.0, 1.0, 1.0, 16), 0.5, max_relative = 1e-15);
        assert_relative_eq!(
            sgd_reference(2.0, 3.0, 0.4, 100) / sgd_reference(2.0, 3.0, 0.4, 1600),
            2.0,
            max_relative = 1e-14
        );
        assert_eq!(sgd_reference(1.0, 1.0, 0.0, 16), 0.0);
    }

    #[test]
    fn regime_switch() {
        assert_eq!(regime(100, 1.0, 1.0, 0.0), Regime::Deterministic);
        assert_eq!(regime(4, 1.0, 1.0, 0.5), Regime::Noise);
        assert_eq!(regime(3, 1.0, 1.0, 0.5), Regime::Deterministic);
    }

    #[test]
    fn beta_floor_at_horizon() {
        for t in [10usize, 100, 1_000, 10_000] {
            assert!(beta_power(t, t) >= E.powi(-2));
        }
    }
}
