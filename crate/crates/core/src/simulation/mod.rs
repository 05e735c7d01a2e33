//! Seeded Monte Carlo study of the estimator against its competitors.
//!
//! Each replicate is drawn from its own ChaCha stream keyed by
//! `(seed, replicate index)`, so replicates can run in any order or in
//! parallel and the aggregated summary is bit-identical either way.

mod estimators;
mod population;

pub use estimators::{best_aic_subset, run_estimator, EstimatorKind, EstimatorRecord, MAX_AIC_COLUMNS};
pub use population::{
    ar_covariance, gen_replicate, model_error, population_cov_x, replicate_rng, GScenario, PopulationModel,
    RNG_ALGORITHM,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};
use crate::exec::Execution;
use crate::plm::{FitConfig, PLMFit};

/// Points of the evaluation grid for `ĝ` accuracy.
pub const G_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub g_scenario: GScenario,
    pub replicates: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
}

impl ScenarioSpec {
    /// `n = 100`, `p = 10`, 100 replicates, every estimator.
    pub fn example(rho: f64, g_scenario: GScenario, seed: u64) -> Self {
        Self {
            n: 100,
            p: 10,
            rho,
            g_scenario,
            replicates: 100,
            seed,
            estimators: EstimatorKind::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(PlmError::Config(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.replicates == 0 {
            return Err(PlmError::Config("at least one replicate is required".into()));
        }
        if self.estimators.is_empty() {
            return Err(PlmError::Config("no estimators selected".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<PopulationModel> {
        let model = PopulationModel::example(self.rho, self.g_scenario)?;
        if model.p() != self.p {
            return Err(PlmError::Config(format!(
                "the simulation design has p = {}, scenario asks for p = {}",
                model.p(),
                self.p
            )));
        }
        Ok(model)
    }
}

/// Per-estimator numbers kept from one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutcome {
    pub estimator: EstimatorKind,
    pub beta_hat: Vec<f64>,
    pub std_errors: Vec<Option<f64>>,
    pub t_coefficient: Option<f64>,
    pub lambda_chosen: Option<f64>,
    pub model_error: f64,
    /// Level-matched RMSE of `ĝ − g` on a grid over the observed range of `T`.
    pub g_rmse: Option<f64>,
    pub max_objective_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub estimates: Vec<EstimateOutcome>,
}

impl ReplicateOutcome {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimateOutcome> {
        self.estimates.iter().find(|e| e.estimator == kind)
    }
}

/// RMSE of `ĝ − g` after removing the mean difference over the grid.
pub fn level_matched_g_rmse(fit: &PLMFit, g: impl Fn(f64) -> f64, points: usize) -> Result<f64> {
    let grid = fit.g_grid(points)?;
    let diffs: Vec<f64> = grid.iter().map(|&(t, gh)| gh - g(t)).collect();
    let shift = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let mse = diffs.iter().map(|d| (d - shift).powi(2)).sum::<f64>() / diffs.len() as f64;
    Ok(mse.sqrt())
}

/// Generates replicate `index` and runs every requested estimator on it.
pub fn run_replicate(
    spec: &ScenarioSpec,
    model: &PopulationModel,
    cov_x: &DMatrix<f64>,
    config: &FitConfig,
    index: usize,
) -> Result<ReplicateOutcome> {
    let data = gen_replicate(model, spec.n, spec.seed, index as u64)?;
    let beta_true: Vec<f64> = model.beta_true.iter().copied().collect();
    let mut estimates = Vec::with_capacity(spec.estimators.len());
    for &kind in &spec.estimators {
        let rec = run_estimator(kind, &data, config)?;
        let g_rmse = match &rec.fit {
            Some(fit) => Some(level_matched_g_rmse(fit, |t| model.g.eval(t), G_GRID_POINTS)?),
            None => None,
        };
        estimates.push(EstimateOutcome {
            estimator: kind,
            model_error: model_error(&rec.beta_hat, &beta_true, cov_x)?,
            beta_hat: rec.beta_hat,
            std_errors: rec.std_errors,
            t_coefficient: rec.t_coefficient,
            lambda_chosen: rec.lambda_chosen,
            g_rmse,
            max_objective_increase: rec.max_objective_increase,
        });
    }
    Ok(ReplicateOutcome { index, estimates })
}

/// Runs all replicates of a scenario. Replicates are distributed by
/// `execution`; the fit-level λ grid runs sequentially inside each replicate.
pub fn run_scenario(spec: &ScenarioSpec, config: &FitConfig, execution: Execution) -> Result<Vec<ReplicateOutcome>> {
    spec.validate()?;
    config.validate()?;
    let model = spec.model()?;
    let cov_x = population_cov_x(&model);
    let inner = FitConfig {
        execution: Execution::Sequential,
        ..config.clone()
    };
    let results = execution.map_indexed(spec.replicates, |k| run_replicate(spec, &model, &cov_x, &inner, k));
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub replicates: usize,
    /// Means of the estimates of the truly nonzero coefficients.
    pub mean_beta: Vec<f64>,
    /// Mean number of true zeros estimated as exactly zero.
    pub mean_correct_zeros: f64,
    pub median_correct_zeros: f64,
    /// Mean number of truly nonzero coefficients estimated as zero.
    pub mean_incorrect_zeros: f64,
    /// Fraction of replicates selecting exactly the true model.
    pub exact_selection_rate: f64,
    /// LS-SCAD only: fraction of replicates with the coefficient of `T` equal to zero.
    pub pct_g_zeroed: Option<f64>,
    pub median_model_error: f64,
    pub sd_model_error: f64,
    pub empirical_sd_beta: Vec<f64>,
    /// Mean reported standard error per nonzero coefficient, over replicates
    /// where it was selected; absent for estimators without standard errors.
    pub mean_se_beta: Option<Vec<f64>>,
    pub mean_g_rmse: Option<f64>,
    pub median_g_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub scenario: ScenarioSpec,
    pub estimators: Vec<EstimatorSummary>,
}

impl SimSummary {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Sample standard deviation; zero for a single value.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mu = mean(values);
    (values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn summarize_estimator(kind: EstimatorKind, results: &[ReplicateOutcome], model: &PopulationModel) -> Option<EstimatorSummary> {
    let rows: Vec<&EstimateOutcome> = results.iter().filter_map(|r| r.get(kind)).collect();
    if rows.is_empty() {
        return None;
    }
    let signal = model.signal_indices();
    let zeros = model.zero_indices();

    let coord = |j: usize| -> Vec<f64> { rows.iter().map(|r| r.beta_hat[j]).collect() };
    let mean_beta = signal.iter().map(|&j| mean(&coord(j))).collect();
    let empirical_sd_beta = signal.iter().map(|&j| sample_sd(&coord(j))).collect();

    let correct: Vec<f64> = rows
        .iter()
        .map(|r| zeros.iter().filter(|&&j| r.beta_hat[j] == 0.0).count() as f64)
        .collect();
    let incorrect: Vec<f64> = rows
        .iter()
        .map(|r| signal.iter().filter(|&&j| r.beta_hat[j] == 0.0).count() as f64)
        .collect();
    let exact = correct
        .iter()
        .zip(&incorrect)
        .filter(|(c, i)| **c == zeros.len() as f64 && **i == 0.0)
        .count() as f64
        / rows.len() as f64;

    let pct_g_zeroed = if rows.iter().all(|r| r.t_coefficient.is_some()) {
        Some(rows.iter().filter(|r| r.t_coefficient == Some(0.0)).count() as f64 / rows.len() as f64)
    } else {
        None
    };

    let errors: Vec<f64> = rows.iter().map(|r| r.model_error).collect();
    let has_se = rows.iter().any(|r| r.std_errors.iter().any(Option::is_some));
    let mean_se_beta = has_se.then(|| {
        signal
            .iter()
            .map(|&j| {
                let se: Vec<f64> = rows.iter().filter_map(|r| r.std_errors[j]).collect();
                if se.is_empty() {
                    f64::NAN
                } else {
                    mean(&se)
                }
            })
            .collect()
    });
    let g_rmse: Vec<f64> = rows.iter().filter_map(|r| r.g_rmse).collect();
    let (mean_g_rmse, median_g_rmse) = if g_rmse.len() == rows.len() {
        (Some(mean(&g_rmse)), Some(median(&g_rmse)))
    } else {
        (None, None)
    };

    Some(EstimatorSummary {
        estimator: kind,
        replicates: rows.len(),
        mean_beta,
        mean_correct_zeros: mean(&correct),
        median_correct_zeros: median(&correct),
        mean_incorrect_zeros: mean(&incorrect),
        exact_selection_rate: exact,
        pct_g_zeroed,
        median_model_error: median(&errors),
        sd_model_error: sample_sd(&errors),
        empirical_sd_beta,
        mean_se_beta,
        mean_g_rmse,
        median_g_rmse,
    })
}

/// Aggregates replicate outcomes into the table columns, one entry per estimator
/// in the scenario's order.
pub fn summarize(spec: &ScenarioSpec, results: &[ReplicateOutcome], model: &PopulationModel) -> Result<SimSummary> {
    if results.is_empty() {
        return Err(PlmError::Config("no replicate results to summarize".into()));
    }
    let mut sorted: Vec<ReplicateOutcome> = results.to_vec();
    sorted.sort_by_key(|r| r.index);
    let estimators = spec
        .estimators
        .iter()
        .filter_map(|&k| summarize_estimator(k, &sorted, model))
        .collect();
    Ok(SimSummary {
        scenario: spec.clone(),
        estimators,
    })
}

/// Runs and summarizes one scenario.
pub fn simulate(spec: &ScenarioSpec, config: &FitConfig, execution: Execution) -> Result<SimSummary> {
    let results = run_scenario(spec, config, execution)?;
    summarize(spec, &results, &spec.model()?)
}
