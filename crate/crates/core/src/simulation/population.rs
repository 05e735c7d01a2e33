//! The data-generating process of the simulation study.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};
use crate::plm::Dataset;

/// Identifies the generator so that results can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.9), seed = scenario seed, stream = replicate index; normals by rand_distr 0.5 ziggurat";

/// Nodes of the composite Simpson rule used for population moments of `θ(T)`.
const QUADRATURE_INTERVALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GScenario {
    /// `g(t) = cos(t)`
    CosT,
    /// `g(t) = cos(2πt)`
    Cos2PiT,
}

impl GScenario {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            GScenario::CosT => t.cos(),
            GScenario::Cos2PiT => (2.0 * std::f64::consts::PI * t).cos(),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            GScenario::CosT => 1,
            GScenario::Cos2PiT => 2,
        }
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(GScenario::CosT),
            2 => Ok(GScenario::Cos2PiT),
            other => Err(PlmError::Config(format!("scenario must be 1 or 2, got {other}"))),
        }
    }
}

fn theta_sin(t: f64) -> f64 {
    (2.0 * t).sin()
}
fn theta_inv_square(t: f64) -> f64 {
    (0.5 + t).powi(-2)
}
fn theta_exp(t: f64) -> f64 {
    t.exp()
}
fn theta_zero(_: f64) -> f64 {
    0.0
}
fn theta_quartic(t: f64) -> f64 {
    (t - 0.7).powi(4)
}
fn theta_ratio(t: f64) -> f64 {
    t / (1.0 + t * t)
}
fn theta_sqrt(t: f64) -> f64 {
    (1.0 + t).sqrt()
}
fn theta_log(t: f64) -> f64 {
    (3.0 * t + 8.0).ln()
}

/// `X_j = θ_j(T) + e_j` with AR(ρ) errors, `T ~ U[0, 1]` and
/// `Y = X'β + g(T) + ε`, `ε ~ N(0, σ²)`.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    /// `t ↦ E[X_j | T = t]`.
    pub theta_functions: Vec<fn(f64) -> f64>,
    pub error_cov: DMatrix<f64>,
    error_chol: DMatrix<f64>,
    pub beta_true: DVector<f64>,
    pub noise_sd: f64,
    pub rho: f64,
    pub g: GScenario,
}

impl PopulationModel {
    /// The ten-covariate design with `β = (1, 2, 3, 4, 0, ..., 0)`.
    pub fn example(rho: f64, g: GScenario) -> Result<Self> {
        let theta: Vec<fn(f64) -> f64> = vec![
            theta_sin,
            theta_inv_square,
            theta_exp,
            theta_zero,
            theta_quartic,
            theta_ratio,
            theta_sqrt,
            theta_log,
            theta_zero,
            theta_zero,
        ];
        let beta = DVector::from_fn(10, |j, _| if j < 4 { (j + 1) as f64 } else { 0.0 });
        Self::new(theta, rho, beta, 1.0, g)
    }

    pub fn new(
        theta_functions: Vec<fn(f64) -> f64>,
        rho: f64,
        beta_true: DVector<f64>,
        noise_sd: f64,
        g: GScenario,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(PlmError::Config(format!("rho must lie in [0, 1), got {rho}")));
        }
        let p = theta_functions.len();
        if beta_true.len() != p {
            return Err(PlmError::Dimension(format!(
                "{p} conditional-mean functions but {} coefficients",
                beta_true.len()
            )));
        }
        let error_cov = ar_covariance(p, rho);
        let error_chol = error_cov
            .clone()
            .cholesky()
            .ok_or_else(|| PlmError::Internal(format!("AR({rho}) covariance is not positive definite")))?
            .l();
        Ok(Self {
            theta_functions,
            error_cov,
            error_chol,
            beta_true,
            noise_sd,
            rho,
            g,
        })
    }

    pub fn p(&self) -> usize {
        self.theta_functions.len()
    }

    /// Lower Cholesky factor of the error covariance.
    pub fn error_cholesky(&self) -> &DMatrix<f64> {
        &self.error_chol
    }

    /// Indices of truly nonzero coefficients.
    pub fn signal_indices(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.beta_true[j] != 0.0).collect()
    }

    pub fn zero_indices(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.beta_true[j] == 0.0).collect()
    }
}

/// `Σ_jl = ρ^|j−l|`.
pub fn ar_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |j, l| rho.powi((j as i32 - l as i32).abs()))
}

/// Deterministic generator for one replicate.
pub fn replicate_rng(seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate_index);
    rng
}

/// Draws one dataset of size `n`. The stream depends only on `(seed, replicate_index)`.
pub fn gen_replicate(model: &PopulationModel, n: usize, seed: u64, replicate_index: u64) -> Result<Dataset> {
    let p = model.p();
    let mut rng = replicate_rng(seed, replicate_index);
    let mut t = Vec::with_capacity(n);
    let mut x = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    let mut z = DVector::zeros(p);
    for i in 0..n {
        let ti: f64 = rng.random();
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        let e = &model.error_chol * &z;
        let eps: f64 = rng.sample(StandardNormal);
        let mut yi = model.g.eval(ti) + model.noise_sd * eps;
        for j in 0..p {
            let xij = (model.theta_functions[j])(ti) + e[j];
            x[(i, j)] = xij;
            yi += xij * model.beta_true[j];
        }
        t.push(ti);
        y.push(yi);
    }
    Dataset::with_default_names(y, x, t)
}

/// Composite Simpson nodes and weights on `[0, 1]`.
fn simpson_rule(intervals: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / intervals as f64;
    let nodes: Vec<f64> = (0..=intervals).map(|k| k as f64 * h).collect();
    let weights = (0..=intervals)
        .map(|k| {
            let w = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// `Cov(X) = Cov(θ(T)) + Σ_e` under `T ~ U[0, 1]`.
pub fn population_cov_x(model: &PopulationModel) -> DMatrix<f64> {
    let p = model.p();
    let (nodes, weights) = simpson_rule(QUADRATURE_INTERVALS);
    let values: Vec<Vec<f64>> = model
        .theta_functions
        .iter()
        .map(|f| nodes.iter().map(|&t| f(t)).collect())
        .collect();
    let means: Vec<f64> = values
        .iter()
        .map(|v| v.iter().zip(&weights).map(|(f, w)| f * w).sum())
        .collect();
    let mut cov = model.error_cov.clone();
    for j in 0..p {
        for l in 0..=j {
            let c: f64 = (0..nodes.len())
                .map(|k| weights[k] * (values[j][k] - means[j]) * (values[l][k] - means[l]))
                .sum();
            cov[(j, l)] += c;
            if l != j {
                cov[(l, j)] += c;
            }
        }
    }
    cov
}

/// `(β̂ − β)' Cov(X) (β̂ − β)`.
pub fn model_error(beta_hat: &[f64], beta_true: &[f64], cov_x: &DMatrix<f64>) -> Result<f64> {
    let p = beta_true.len();
    if beta_hat.len() != p || cov_x.nrows() != p || cov_x.ncols() != p {
        return Err(PlmError::Dimension(format!(
            "model error with {} estimates, {p} true values and a {} × {} covariance",
            beta_hat.len(),
            cov_x.nrows(),
            cov_x.ncols()
        )));
    }
    let d = DVector::from_iterator(p, beta_hat.iter().zip(beta_true).map(|(a, b)| a - b));
    Ok(d.dot(&(cov_x * &d)))
}
