//! The estimators compared in the simulation study.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};
use crate::optimizer::spd_solve;
use crate::penalty::PenaltyFamily;
use crate::plm::{fit_plm, profile_estimate, standardize, Dataset, FitConfig, PLMFit};
use crate::projection::ProjectionContext;
use crate::spline::{basis_matrix, make_quantile_partition, SplineBasis};

/// Exhaustive subset search is refused beyond this many candidate columns.
pub const MAX_AIC_COLUMNS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// SCAD linear regression treating `T` as one more linear covariate.
    LsScad,
    /// Profile least squares, no selection.
    Plm,
    /// Profile least squares with exhaustive AIC subset selection.
    PlmAic,
    PlmLasso,
    PlmScad,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::LsScad,
        EstimatorKind::Plm,
        EstimatorKind::PlmAic,
        EstimatorKind::PlmLasso,
        EstimatorKind::PlmScad,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::LsScad => "LS-SCAD",
            EstimatorKind::Plm => "PLM",
            EstimatorKind::PlmAic => "PLM-AIC",
            EstimatorKind::PlmLasso => "PLM-LASSO",
            EstimatorKind::PlmScad => "PLM-SCAD",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = PlmError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "ls_scad" => Ok(Self::LsScad),
            "plm" => Ok(Self::Plm),
            "plm_aic" => Ok(Self::PlmAic),
            "plm_lasso" => Ok(Self::PlmLasso),
            "plm_scad" => Ok(Self::PlmScad),
            other => Err(PlmError::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// What every estimator reports, whatever its internals.
#[derive(Debug, Clone)]
pub struct EstimatorRecord {
    pub estimator: EstimatorKind,
    /// Coefficients of the `p` columns of `X`, original units.
    pub beta_hat: Vec<f64>,
    pub std_errors: Vec<Option<f64>>,
    /// LS-SCAD only: the coefficient on `T`.
    pub t_coefficient: Option<f64>,
    pub lambda_chosen: Option<f64>,
    pub max_objective_increase: f64,
    /// Spline-model estimators keep the full fit for `ĝ`.
    pub fit: Option<PLMFit>,
}

fn from_plm_fit(estimator: EstimatorKind, fit: PLMFit) -> EstimatorRecord {
    EstimatorRecord {
        estimator,
        beta_hat: fit.beta_hat.clone(),
        std_errors: fit.std_errors.clone(),
        t_coefficient: None,
        lambda_chosen: Some(fit.lambda_chosen),
        max_objective_increase: fit.max_objective_increase,
        fit: Some(fit),
    }
}

/// Runs one estimator on one dataset. `config` supplies the spline, SCAD shape,
/// λ grid and solver settings; the penalty family is set per estimator.
pub fn run_estimator(kind: EstimatorKind, data: &Dataset, config: &FitConfig) -> Result<EstimatorRecord> {
    match kind {
        EstimatorKind::PlmScad => {
            let cfg = FitConfig {
                penalty_family: PenaltyFamily::Scad,
                ..config.clone()
            };
            Ok(from_plm_fit(kind, fit_plm(data, &cfg)?))
        }
        EstimatorKind::PlmLasso => {
            let cfg = FitConfig {
                penalty_family: PenaltyFamily::Lasso,
                ..config.clone()
            };
            Ok(from_plm_fit(kind, fit_plm(data, &cfg)?))
        }
        EstimatorKind::Plm => {
            let cfg = FitConfig {
                penalty_family: PenaltyFamily::None,
                ..config.clone()
            };
            Ok(from_plm_fit(kind, fit_plm(data, &cfg)?))
        }
        EstimatorKind::LsScad => ls_scad(data, config),
        EstimatorKind::PlmAic => plm_aic(data, config),
    }
}

fn ls_scad(data: &Dataset, config: &FitConfig) -> Result<EstimatorRecord> {
    let n = data.n();
    let p = data.p();
    let mut design = data.design().clone().insert_column(p, 0.0);
    for (i, &t) in data.nonparam().iter().enumerate() {
        design[(i, p)] = t;
    }
    let mut names = data.column_names().to_vec();
    names.push("T".into());
    // the unpenalized intercept is profiled out by centering
    let ctx = ProjectionContext::intercept_only(n)?;
    let est = profile_estimate(
        &design,
        data.response(),
        &ctx,
        &names,
        PenaltyFamily::Scad,
        config.a,
        &config.lambda_grid,
        &config.solver,
        config.execution,
    )?;
    Ok(EstimatorRecord {
        estimator: EstimatorKind::LsScad,
        beta_hat: est.beta[..p].to_vec(),
        std_errors: est.std_errors[..p].to_vec(),
        t_coefficient: Some(est.beta[p]),
        lambda_chosen: Some(est.lambda),
        max_objective_increase: est.max_objective_increase,
        fit: None,
    })
}

/// Best subset by `n log(RSS/n) + 2 |S|` over all subsets of the residualized
/// columns. Returns the chosen mask and the coefficients on the residualized scale.
pub fn best_aic_subset(xr: &DMatrix<f64>, yr: &DVector<f64>) -> Result<(Vec<bool>, Vec<f64>)> {
    let (n, p) = xr.shape();
    if p > MAX_AIC_COLUMNS {
        return Err(PlmError::Config(format!(
            "exhaustive AIC search over 2^{p} subsets exceeds the 2^{MAX_AIC_COLUMNS} limit"
        )));
    }
    let gram = xr.tr_mul(xr);
    let xty = xr.tr_mul(yr);
    let yty = yr.norm_squared();
    let nf = n as f64;

    let mut best_mask = 0usize;
    let mut best_aic = nf * (yty / nf).ln();
    let mut best_coef: Vec<f64> = Vec::new();
    for mask in 1usize..(1 << p) {
        let idx: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let k = idx.len();
        let g = DMatrix::from_fn(k, k, |r, c| gram[(idx[r], idx[c])]);
        let rhs = DVector::from_fn(k, |r, _| xty[idx[r]]);
        let coef = spd_solve(&g, &rhs)?;
        let beta = {
            let mut b = DVector::zeros(p);
            for (r, &j) in idx.iter().enumerate() {
                b[j] = coef[r];
            }
            b
        };
        let rss = (yr - xr * &beta).norm_squared();
        let aic = nf * (rss / nf).ln() + 2.0 * k as f64;
        if aic < best_aic {
            best_aic = aic;
            best_mask = mask;
            best_coef = beta.iter().copied().collect();
        }
    }
    let mask: Vec<bool> = (0..p).map(|j| best_mask >> j & 1 == 1).collect();
    if best_mask == 0 {
        best_coef = vec![0.0; p];
    }
    Ok((mask, best_coef))
}

fn plm_aic(data: &Dataset, config: &FitConfig) -> Result<EstimatorRecord> {
    if data.p() > MAX_AIC_COLUMNS {
        return Err(PlmError::Config(format!(
            "PLM-AIC needs an exhaustive search over 2^{} subsets; the limit is 2^{MAX_AIC_COLUMNS}",
            data.p()
        )));
    }
    let partition = make_quantile_partition(data.nonparam(), config.interior_knots)?;
    let basis = SplineBasis::new(config.spline_order, partition)?;
    let ctx = ProjectionContext::new(basis_matrix(&basis, data.nonparam())?)?;
    // standardization is a column rescaling, which leaves OLS fits and RSS unchanged
    let std = standardize(data.design(), data.response(), &ctx, data.column_names())?;
    let (_, gamma) = best_aic_subset(&std.xs, &std.yr)?;
    let beta: Vec<f64> = gamma.iter().zip(&std.scales).map(|(g, s)| g / s).collect();
    Ok(EstimatorRecord {
        estimator: EstimatorKind::PlmAic,
        std_errors: vec![None; beta.len()],
        beta_hat: beta,
        t_coefficient: None,
        lambda_chosen: None,
        max_objective_increase: 0.0,
        fit: None,
    })
}
