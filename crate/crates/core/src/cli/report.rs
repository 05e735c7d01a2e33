//! Report documents and table layouts.
//!
//! JSON documents carry a `schema_version`; floats are written in their
//! shortest round-trip form, so parsing a report back recovers every value
//! bit for bit.

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::plm::{FitConfig, GcvEntry, PLMFit};
use crate::simulation::{EstimatorKind, SimSummary};
use crate::spline::SplineBasis;

/// Version of the JSON layouts below. Bumped on any incompatible change.
pub const SCHEMA_VERSION: &str = "1.0";

/// Points of the `ĝ` grid emitted with every fit.
pub const FIT_GRID_POINTS: usize = 200;

/// Points of the basis-dump grid.
pub const BASIS_DUMP_POINTS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub name: String,
    pub estimate: f64,
    /// Absent for coefficients estimated as exactly zero.
    pub std_error: Option<f64>,
    pub selected: bool,
    /// `estimate (se)` with three decimals, or `0 (-)` when dropped.
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineReport {
    pub order: usize,
    pub lower: f64,
    pub upper: f64,
    pub interior_knots: Vec<f64>,
    /// Full clamped knot sequence.
    pub knots: Vec<f64>,
    pub alpha_hat: Vec<f64>,
}

impl SplineReport {
    pub fn from_basis(basis: &SplineBasis, alpha_hat: &[f64]) -> Self {
        let partition = basis.partition();
        Self {
            order: basis.order(),
            lower: partition.lower(),
            upper: partition.upper(),
            interior_knots: partition.interior().to_vec(),
            knots: basis.knots().to_vec(),
            alpha_hat: alpha_hat.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub g_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub effective_df: f64,
    pub rss: f64,
    pub all_converged: bool,
    pub max_objective_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: String,
    pub command: String,
    pub input: String,
    pub response: String,
    pub nonparam: String,
    pub n: usize,
    pub config: FitConfig,
    pub coefficients: Vec<CoefficientReport>,
    pub lambda_chosen: f64,
    pub gcv_table: Vec<GcvEntry>,
    pub sigma2_hat: f64,
    pub spline: SplineReport,
    pub g_grid: Vec<GridPoint>,
    /// `ĝ(T_i)` at every observation, in input order.
    pub g_at_data: Vec<f64>,
    pub residuals: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

/// `0.621 (0.102)` style; dropped coefficients read `0 (-)`.
pub fn display_estimate(estimate: f64, std_error: Option<f64>) -> String {
    match std_error {
        _ if estimate == 0.0 => "0 (-)".to_string(),
        Some(se) => format!("{estimate:.3} ({se:.3})"),
        None => format!("{estimate:.3} (-)"),
    }
}

pub struct FitContext<'a> {
    pub input: &'a str,
    pub response: &'a str,
    pub nonparam: &'a str,
    pub config: &'a FitConfig,
    pub nonparam_values: &'a [f64],
}

impl FitReport {
    pub fn new(fit: &PLMFit, ctx: &FitContext<'_>) -> Result<Self, CliError> {
        let coefficients = fit
            .column_names
            .iter()
            .enumerate()
            .map(|(j, name)| CoefficientReport {
                name: name.clone(),
                estimate: fit.beta_hat[j],
                std_error: fit.std_errors[j],
                selected: fit.selected[j],
                display: display_estimate(fit.beta_hat[j], fit.std_errors[j]),
            })
            .collect();
        let g_grid = fit
            .g_grid(FIT_GRID_POINTS)?
            .into_iter()
            .map(|(t, g_hat)| GridPoint { t, g_hat })
            .collect();
        let g_at_data = ctx
            .nonparam_values
            .iter()
            .map(|&t| fit.predict_g(t))
            .collect::<crate::Result<Vec<f64>>>()?;
        Ok(Self {
            schema_version: SCHEMA_VERSION.into(),
            command: "fit".into(),
            input: ctx.input.into(),
            response: ctx.response.into(),
            nonparam: ctx.nonparam.into(),
            n: fit.residuals.len(),
            config: ctx.config.clone(),
            coefficients,
            lambda_chosen: fit.lambda_chosen,
            gcv_table: fit.gcv_table.clone(),
            sigma2_hat: fit.sigma2_hat,
            spline: SplineReport::from_basis(&fit.basis, &fit.alpha_hat),
            g_grid,
            g_at_data,
            residuals: fit.residuals.clone(),
            diagnostics: FitDiagnostics {
                effective_df: fit.effective_df,
                rss: fit.rss,
                all_converged: fit.all_converged,
                max_objective_increase: fit.max_objective_increase,
            },
        })
    }

    /// Coefficient table: `name,estimate,std_error,selected,display`.
    pub fn coefficients_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv_writer();
        w.write_record(["name", "estimate", "std_error", "selected", "display"])
            .map_err(internal)?;
        for c in &self.coefficients {
            w.write_record([
                c.name.clone(),
                c.estimate.to_string(),
                c.std_error.map_or(String::new(), |s| s.to_string()),
                c.selected.to_string(),
                c.display.clone(),
            ])
            .map_err(internal)?;
        }
        finish(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub schema_version: String,
    pub command: String,
    pub input: String,
    pub lambda_chosen: f64,
    pub points: Vec<GridPoint>,
}

impl PredictReport {
    pub fn csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv_writer();
        w.write_record(["t", "g_hat"]).map_err(internal)?;
        for p in &self.points {
            w.write_record([p.t.to_string(), p.g_hat.to_string()]).map_err(internal)?;
        }
        finish(w)
    }
}

/// Reproducibility record of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub schema_version: String,
    pub tool_version: String,
    pub seed: u64,
    pub rng_algorithm: String,
    /// SHA-256 of the canonical JSON of the resolved configuration.
    pub config_hash: String,
    /// Wall-clock seconds since the Unix epoch. The only field that differs
    /// between otherwise identical runs.
    pub generated_at_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub metadata: SimMetadata,
    pub config: super::SimulationConfig,
    pub cells: Vec<SimSummary>,
}

/// One row per (scenario, estimator, ρ): mean estimates of the nonzero
/// coefficients, mean and median count of correct zeros, percentage of
/// replicates with the coefficient of `T` at zero (LS-SCAD only), and median
/// and SD of the model error scaled by 100.
pub fn table1_csv(cells: &[SimSummary]) -> Result<Vec<u8>, CliError> {
    let mut w = csv_writer();
    w.write_record([
        "scenario",
        "estimator",
        "rho",
        "beta1",
        "beta2",
        "beta3",
        "beta4",
        "k_bar",
        "k_tilde",
        "pct_g_zero",
        "mme_x100",
        "sd_me_x100",
    ])
    .map_err(internal)?;
    let mut rows = Vec::new();
    for cell in cells {
        for est in &cell.estimators {
            rows.push((cell.scenario.g_scenario.number(), est.estimator, cell.scenario.rho, est));
        }
    }
    // scenario panels, estimator blocks, then ρ, as in the published layout
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    for (scenario, kind, rho, est) in rows {
        let mut record = vec![scenario.to_string(), kind.label().to_string(), rho.to_string()];
        record.extend(est.mean_beta.iter().map(f64::to_string));
        record.push(est.mean_correct_zeros.to_string());
        record.push(est.median_correct_zeros.to_string());
        record.push(est.pct_g_zeroed.map_or(String::new(), |f| (100.0 * f).to_string()));
        record.push((100.0 * est.median_model_error).to_string());
        record.push((100.0 * est.sd_model_error).to_string());
        w.write_record(&record).map_err(internal)?;
    }
    finish(w)
}

/// PLM-SCAD standard errors: empirical SD of each nonzero coefficient next to
/// the mean reported standard error.
pub fn table2_csv(cells: &[SimSummary]) -> Result<Vec<u8>, CliError> {
    let mut w = csv_writer();
    w.write_record([
        "scenario", "rho", "sd_beta1", "se_beta1", "sd_beta2", "se_beta2", "sd_beta3", "se_beta3", "sd_beta4",
        "se_beta4",
    ])
    .map_err(internal)?;
    let mut rows: Vec<(u8, f64, &crate::simulation::EstimatorSummary)> = cells
        .iter()
        .filter_map(|c| {
            c.get(EstimatorKind::PlmScad)
                .map(|e| (c.scenario.g_scenario.number(), c.scenario.rho, e))
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for (scenario, rho, est) in rows {
        let mut record = vec![scenario.to_string(), rho.to_string()];
        let se = est.mean_se_beta.clone().unwrap_or_default();
        for (j, sd) in est.empirical_sd_beta.iter().enumerate() {
            record.push(sd.to_string());
            record.push(se.get(j).map_or(String::new(), |s| s.to_string()));
        }
        w.write_record(&record).map_err(internal)?;
    }
    finish(w)
}

/// `t, B1, ..., Bq` on `points` equally spaced values covering the basis
/// domain, both endpoints included exactly.
pub fn basis_dump_csv(basis: &SplineBasis, points: usize) -> Result<Vec<u8>, CliError> {
    let lower = basis.partition().lower();
    let upper = basis.partition().upper();
    let mut w = csv_writer();
    let mut header = vec!["t".to_string()];
    header.extend((1..=basis.dimension()).map(|k| format!("B{k}")));
    w.write_record(&header).map_err(internal)?;
    for k in 0..points {
        let t = if k + 1 == points {
            upper
        } else {
            lower + (upper - lower) * k as f64 / (points - 1) as f64
        };
        let values = basis.evaluate(t)?;
        let mut record = vec![t.to_string()];
        record.extend(values.iter().map(f64::to_string));
        w.write_record(&record).map_err(internal)?;
    }
    finish(w)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(internal)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::internal(e.to_string()))
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::internal(e.to_string())
}
