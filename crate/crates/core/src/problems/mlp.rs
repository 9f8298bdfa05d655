use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::Problem;
use crate::error::{Error, Result};
use crate::rng::{normal, stream, Purpose, Stream};
use crate::vecops;

const MAX_PARAMS: usize = 10_000;
const SMOOTHNESS_PAIRS: usize = 200;
const SMOOTHNESS_SAFETY: f64 = 2.0;
const SIGMA_DRAWS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyMlpSpec {
    pub in_dim: usize,
    pub hidden: usize,
    pub n_data: usize,
    pub batch: usize,
    pub seed: u64,
}

/// `y_hat = w2 . tanh(W1 x + b1) + b2` trained with the half mean squared error.
///
/// Parameters are packed as `[W1 (row-major, hidden x in_dim), b1, w2, b2]`.
#[derive(Debug, Clone)]
pub struct ToyMlp {
    in_dim: usize,
    hidden: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    batch: usize,
    seed: u64,
}

fn gaussian_vec(rng: &mut Stream, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * normal(rng))
        .collect::<Vec<f64>>()
}

impl ToyMlpSpec {
    pub fn param_count(&self) -> usize {
        self.hidden * (self.in_dim + 2) + 1
    }

    /// Generate data from a random teacher of the same shape, initialise the
    /// student, and estimate `L` and the minibatch noise scales at `x^1`.
    pub fn build(&self) -> Result<Problem> {
        if self.in_dim == 0 || self.hidden == 0 || self.n_data == 0 || self.batch == 0 {
            return Err(Error::invalid("toy-mlp sizes must be positive"));
        }
        if self.batch > self.n_data {
            return Err(Error::invalid("minibatch larger than the dataset"));
        }
        let d = self.param_count();
        if d > MAX_PARAMS {
            return Err(Error::invalid(format!(
                "toy-mlp has {d} parameters, at most {MAX_PARAMS} supported"
            )));
        }

        let mut data_rng = stream(self.seed, Purpose::Data);
        let inputs = gaussian_vec(&mut data_rng, self.n_data * self.in_dim, 1.0);
        let teacher = random_params(&mut data_rng, self.in_dim, self.hidden);
        let mut net = ToyMlp {
            in_dim: self.in_dim,
            hidden: self.hidden,
            inputs,
            targets: Vec::new(),
            batch: self.batch,
            seed: self.seed,
        };
        net.targets = (0..self.n_data).map(|j| net.predict(&teacher, j)).collect();

        let init = random_params(&mut stream(self.seed, Purpose::Init), self.in_dim, self.hidden);
        let mut est = stream(self.seed, Purpose::Estimate);
        let smoothness = net.estimate_smoothness(&init, &mut est);
        let sigma = net.estimate_sigma(&init, &mut est);
        Ok(Problem::from_mlp(net, smoothness, sigma, init))
    }
}

fn random_params(rng: &mut Stream, in_dim: usize, hidden: usize) -> Vec<f64> {
    let mut p = gaussian_vec(rng, hidden * in_dim, 1.0 / (in_dim as f64).sqrt());
    p.extend(std::iter::repeat_n(0.0, hidden));
    p.extend(gaussian_vec(rng, hidden, 1.0 / (hidden as f64).sqrt()));
    p.push(0.0);
    p
}

impl ToyMlp {
    /// Build directly from data, for tests and custom experiments.
    pub fn from_data(
        in_dim: usize,
        hidden: usize,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        batch: usize,
    ) -> Result<Self> {
        if in_dim == 0 || hidden == 0 || targets.is_empty() || batch == 0 {
            return Err(Error::invalid("toy-mlp sizes must be positive"));
        }
        if inputs.len() != targets.len() * in_dim {
            return Err(Error::DimensionMismatch {
                expected: targets.len() * in_dim,
                got: inputs.len(),
            });
        }
        if batch > targets.len() {
            return Err(Error::invalid("minibatch larger than the dataset"));
        }
        Ok(Self {
            in_dim,
            hidden,
            inputs,
            targets,
            batch,
            seed: 0,
        })
    }

    /// Wrap as a problem with an estimated smoothness constant and noise scales.
    pub fn into_problem(self, init: Vec<f64>, seed: u64) -> Result<Problem> {
        if init.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: init.len(),
            });
        }
        let mut est = stream(seed, Purpose::Estimate);
        let smoothness = self.estimate_smoothness(&init, &mut est);
        let sigma = self.estimate_sigma(&init, &mut est);
        Ok(Problem::from_mlp(self, smoothness, sigma, init))
    }

    pub fn param_count(&self) -> usize {
        self.hidden * (self.in_dim + 2) + 1
    }

    pub fn n_data(&self) -> usize {
        self.targets.len()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub(crate) fn spec(&self) -> ToyMlpSpec {
        ToyMlpSpec {
            in_dim: self.in_dim,
            hidden: self.hidden,
            n_data: self.n_data(),
            batch: self.batch,
            seed: self.seed,
        }
    }

    fn input(&self, j: usize) -> &[f64] {
        &self.inputs[j * self.in_dim..(j + 1) * self.in_dim]
    }

    fn predict(&self, w: &[f64], j: usize) -> f64 {
        let (h, n) = (self.hidden, self.in_dim);
        let x = self.input(j);
        let (w1, rest) = w.split_at(h * n);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        let mut out = b2[0];
        for u in 0..h {
            let a: f64 = w1[u * n..(u + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[u];
            out += w2[u] * a.tanh();
        }
        out
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        let n = self.n_data();
        let sse: f64 = (0..n)
            .map(|j| {
                let r = self.predict(w, j) - self.targets[j];
                r * r
            })
            .sum();
        0.5 * sse / n as f64
    }

    /// Mean gradient of `1/2 (y_hat - y)^2` over the given samples.
    fn gradient_over(&self, w: &[f64], samples: impl Iterator<Item = usize>, count: usize) -> Vec<f64> {
        let (h, n) = (self.hidden, self.in_dim);
        let mut grad = vec![0.0; w.len()];
        let mut hid = vec![0.0; h];
        let w1 = &w[..h * n];
        let b1 = &w[h * n..h * n + h];
        let w2 = &w[h * n + h..h * n + 2 * h];
        let b2 = w[h * n + 2 * h];
        for j in samples {
            let x = self.input(j);
            let mut out = b2;
            for u in 0..h {
                let a: f64 = w1[u * n..(u + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[u];
                hid[u] = a.tanh();
                out += w2[u] * hid[u];
            }
            let r = out - self.targets[j];
            let (gw1, rest) = grad.split_at_mut(h * n);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(h);
            gb2[0] += r;
            for u in 0..h {
                gw2[u] += r * hid[u];
                let da = r * w2[u] * (1.0 - hid[u] * hid[u]);
                gb1[u] += da;
                for (g, xi) in gw1[u * n..(u + 1) * n].iter_mut().zip(x) {
                    *g += da * xi;
                }
            }
        }
        let inv = 1.0 / count as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        grad
    }

    pub fn full_gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n_data();
        self.gradient_over(w, 0..n, n)
    }

    /// Gradient on `batch` samples drawn without replacement; the full-batch
    /// gradient when `batch == n_data`.
    pub fn minibatch_gradient(&self, w: &[f64], rng: &mut Stream) -> Vec<f64> {
        let n = self.n_data();
        if self.batch >= n {
            return self.full_gradient(w);
        }
        let picked = index::sample(rng, n, self.batch);
        self.gradient_over(w, picked.iter(), self.batch)
    }

    fn estimate_smoothness(&self, center: &[f64], rng: &mut Stream) -> f64 {
        let mut worst: f64 = 0.0;
        for _ in 0..SMOOTHNESS_PAIRS {
            let x: Vec<f64> = center
                .iter()
                .map(|c| c + 0.5 * normal(rng))
                .collect();
            let y: Vec<f64> = x
                .iter()
                .map(|c| c + 0.05 * normal(rng))
                .collect();
            let dg = vecops::dist2(&self.full_gradient(&x), &self.full_gradient(&y));
            let dx = vecops::dist2(&x, &y);
            if dx > 0.0 {
                worst = worst.max(dg / dx);
            }
        }
        SMOOTHNESS_SAFETY * worst.max(f64::MIN_POSITIVE)
    }

    fn estimate_sigma(&self, at: &[f64], rng: &mut Stream) -> Vec<f64> {
        let d = at.len();
        if self.batch >= self.n_data() {
            return vec![0.0; d];
        }
        let exact = self.full_gradient(at);
        let mut second = vec![0.0; d];
        for _ in 0..SIGMA_DRAWS {
            let g = self.minibatch_gradient(at, rng);
            for i in 0..d {
                let e = g[i] - exact[i];
                second[i] += e * e;
            }
        }
        second
            .into_iter()
            .map(|s| (s / SIGMA_DRAWS as f64).sqrt())
            .collect()
    }
}
