//! Synthetic stochastic objectives with known smoothness, optimal value and
//! per-coordinate noise scales.
//!
//! Quadratic and smoothed-nonconvex problems use the additive oracle
//! `g = grad f(x) + sigma ⊙ xi` with `xi ~ N(0, I)`: unbiased, with
//! per-coordinate variance exactly `sigma_i^2`, and no bound on `g`.
//! The toy MLP uses minibatch sampling instead.

mod mlp;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{normal, Stream};
use crate::vecops;

pub use mlp::{ToyMlp, ToyMlpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    SmoothedNonconvex,
    ToyMlp,
}

#[derive(Debug, Clone)]
enum Model {
    Quadratic { eigenvalues: Vec<f64> },
    Smoothed { scale: f64 },
    Mlp(Box<ToyMlp>),
}

/// A stochastic objective and everything the bounds need to know about it.
#[derive(Debug, Clone)]
pub struct Problem {
    dim: usize,
    smoothness: f64,
    smoothness_certified: bool,
    f_star: f64,
    sigma: Vec<f64>,
    init: Vec<f64>,
    model: Model,
}

/// A stochastic gradient together with the exact gradient at the same point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub g: Vec<f64>,
    pub exact: Vec<f64>,
}

/// `f(x) = 1/2 sum_i lambda_i x_i^2`, so `L = max lambda_i` and `f* = 0`.
///
/// Noise-free until [`Problem::with_noise`] is applied; starts at the all-ones point.
pub fn make_quadratic(dim: usize, eigenvalues: &[f64]) -> Result<Problem> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    check_dim(dim, eigenvalues.len())?;
    if eigenvalues.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::invalid("eigenvalues must be finite and non-negative"));
    }
    let smoothness = eigenvalues.iter().copied().fold(0.0, f64::max);
    if smoothness == 0.0 {
        return Err(Error::invalid("all eigenvalues are zero; the objective is constant"));
    }
    Ok(Problem {
        dim,
        smoothness,
        smoothness_certified: true,
        f_star: 0.0,
        sigma: vec![0.0; dim],
        init: vec![1.0; dim],
        model: Model::Quadratic {
            eigenvalues: eigenvalues.to_vec(),
        },
    })
}

/// `f(x) = scale * sum_i x_i^2 / (1 + x_i^2)`: nonconvex, `f* = 0`, `L = 2 scale`.
///
/// The second derivative of `x^2/(1+x^2)` is `(2 - 6x^2)/(1+x^2)^3`, whose
/// magnitude peaks at 2 at the origin, and the Hessian is diagonal.
pub fn make_smoothed_nonconvex(dim: usize, scale: f64) -> Result<Problem> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    Ok(Problem {
        dim,
        smoothness: 2.0 * scale,
        smoothness_certified: true,
        f_star: 0.0,
        sigma: vec![0.0; dim],
        init: vec![1.0; dim],
        model: Model::Smoothed { scale },
    })
}

/// One-hidden-layer tanh network on seeded synthetic regression data.
///
/// Minibatch size defaults to `max(1, n_data / 8)`.
pub fn make_toy_mlp(in_dim: usize, hidden: usize, n_data: usize, seed: u64) -> Result<Problem> {
    ToyMlpSpec {
        in_dim,
        hidden,
        n_data,
        batch: (n_data / 8).max(1),
        seed,
    }
    .build()
}

impl Problem {
    pub(crate) fn from_mlp(net: ToyMlp, smoothness: f64, sigma: Vec<f64>, init: Vec<f64>) -> Self {
        Problem {
            dim: net.param_count(),
            smoothness,
            smoothness_certified: false,
            f_star: 0.0,
            sigma,
            init,
            model: Model::Mlp(Box::new(net)),
        }
    }

    /// Attach per-coordinate Gaussian noise scales (quadratic and smoothed only).
    pub fn with_noise(mut self, sigma: Vec<f64>) -> Result<Self> {
        check_dim(self.dim, sigma.len())?;
        if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("noise scales must be finite and non-negative"));
        }
        if matches!(self.model, Model::Mlp(_)) {
            return Err(Error::invalid(
                "toy-mlp noise comes from minibatching and cannot be overridden",
            ));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_init(mut self, x1: Vec<f64>) -> Result<Self> {
        check_dim(self.dim, x1.len())?;
        if x1.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("initial point must be finite"));
        }
        self.init = x1;
        Ok(self)
    }

    pub fn kind(&self) -> ProblemKind {
        match self.model {
            Model::Quadratic { .. } => ProblemKind::Quadratic,
            Model::Smoothed { .. } => ProblemKind::SmoothedNonconvex,
            Model::Mlp(_) => ProblemKind::ToyMlp,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lipschitz constant of the gradient (an estimate for the toy MLP).
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// False when `smoothness` is a numerical estimate rather than a proven bound.
    pub fn smoothness_certified(&self) -> bool {
        self.smoothness_certified
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `sqrt(sum_i sigma_i^2)`.
    pub fn sigma_s(&self) -> f64 {
        vecops::norm2(&self.sigma)
    }

    /// Default starting point `x^1`.
    pub fn initial_point(&self) -> &[f64] {
        &self.init
    }

    pub fn mlp(&self) -> Option<&ToyMlp> {
        match &self.model {
            Model::Mlp(net) => Some(net),
            _ => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.model {
            Model::Quadratic { eigenvalues } => {
                0.5 * eigenvalues.iter().zip(x).map(|(l, x)| l * x * x).sum::<f64>()
            }
            Model::Smoothed { scale } => {
                scale * x.iter().map(|x| x * x / (1.0 + x * x)).sum::<f64>()
            }
            Model::Mlp(net) => net.loss(x),
        })
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.model {
            Model::Quadratic { eigenvalues } => {
                eigenvalues.iter().zip(x).map(|(l, x)| l * x).collect()
            }
            Model::Smoothed { scale } => x
                .iter()
                .map(|x| {
                    let q = 1.0 + x * x;
                    scale * 2.0 * x / (q * q)
                })
                .collect(),
            Model::Mlp(net) => net.full_gradient(x),
        })
    }

    /// Draw a stochastic gradient at `x`. Deterministic in `(self, x, rng state)`.
    pub fn sample_gradient(&self, x: &[f64], rng: &mut Stream) -> Result<GradSample> {
        if x.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("cannot sample a gradient at a non-finite point"));
        }
        let exact = self.gradient(x)?;
        let g = match &self.model {
            Model::Mlp(net) => net.minibatch_gradient(x, rng),
            _ => exact
                .iter()
                .zip(&self.sigma)
                .map(|(g, s)| {
                    g + s * normal(rng)
                })
                .collect(),
        };
        Ok(GradSample { g, exact })
    }

    /// Serializable description of this problem, when it has one.
    pub fn descriptor(&self) -> ProblemSpec {
        let init = Some(InitSpec::Point(self.init.clone()));
        match &self.model {
            Model::Quadratic { eigenvalues } => ProblemSpec::Quadratic {
                eigenvalues: Eigenvalues::List(eigenvalues.clone()),
                sigma: NoiseSpec::PerCoordinate(self.sigma.clone()),
                init,
            },
            Model::Smoothed { scale } => ProblemSpec::SmoothedNonconvex {
                dim: self.dim,
                scale: *scale,
                sigma: NoiseSpec::PerCoordinate(self.sigma.clone()),
                init,
            },
            Model::Mlp(net) => ProblemSpec::ToyMlp(net.spec()),
        }
    }
}

/// `||x||_1 / (sqrt(d) ||x||_2)`, which lies in `[1/sqrt(d), 1]`.
pub fn norm_ratio(x: &[f64]) -> Result<f64> {
    let n2 = vecops::norm2(x);
    if x.is_empty() || n2 == 0.0 {
        return Err(Error::invalid("norm ratio of a zero vector is undefined"));
    }
    if !n2.is_finite() {
        return Err(Error::invalid("norm ratio of a non-finite vector"));
    }
    Ok(vecops::norm1(x) / ((x.len() as f64).sqrt() * n2))
}

// ---------------------------------------------------------------------------
// Serializable descriptors

/// Problem section of an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        eigenvalues: Eigenvalues,
        #[serde(default)]
        sigma: NoiseSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init: Option<InitSpec>,
    },
    SmoothedNonconvex {
        dim: usize,
        scale: f64,
        #[serde(default)]
        sigma: NoiseSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init: Option<InitSpec>,
    },
    ToyMlp(ToyMlpSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Eigenvalues {
    List(Vec<f64>),
    /// `dim` values evenly spaced over `[min, max]`.
    Range { dim: usize, min: f64, max: f64 },
}

impl Eigenvalues {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Eigenvalues::List(v) => Ok(v.clone()),
            Eigenvalues::Range { dim, min, max } => {
                if *dim == 0 || !(min <= max) {
                    return Err(Error::invalid("eigenvalue range needs dim > 0 and min <= max"));
                }
                if *dim == 1 {
                    return Ok(vec![*max]);
                }
                let step = (max - min) / (*dim - 1) as f64;
                Ok((0..*dim)
                    .map(|i| if i + 1 == *dim { *max } else { min + step * i as f64 })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Uniform(f64),
    PerCoordinate(Vec<f64>),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Uniform(0.0)
    }
}

impl NoiseSpec {
    pub fn expand(&self, dim: usize) -> Vec<f64> {
        match self {
            NoiseSpec::Uniform(s) => vec![*s; dim],
            NoiseSpec::PerCoordinate(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Fill(f64),
    Point(Vec<f64>),
}

impl InitSpec {
    pub fn expand(&self, dim: usize) -> Vec<f64> {
        match self {
            InitSpec::Fill(c) => vec![*c; dim],
            InitSpec::Point(v) => v.clone(),
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let (problem, sigma, init) = match self {
            ProblemSpec::Quadratic {
                eigenvalues,
                sigma,
                init,
            } => {
                let eig = eigenvalues.values()?;
                (make_quadratic(eig.len(), &eig)?, sigma, init)
            }
            ProblemSpec::SmoothedNonconvex {
                dim,
                scale,
                sigma,
                init,
            } => (make_smoothed_nonconvex(*dim, *scale)?, sigma, init),
            ProblemSpec::ToyMlp(spec) => return spec.build(),
        };
        let d = problem.dim();
        let problem = problem.with_noise(sigma.expand(d))?;
        match init {
            Some(init) => problem.with_init(init.expand(d)),
            None => Ok(problem),
        }
    }
}
