//! The SCAD-penalized partially linear model estimator.
//!
//! Pipeline for a dataset `(Y, X, T)`:
//!
//! 1. cubic (by default) B-spline basis on quantile knots of `T`;
//! 2. residualize `Y` and every column of `X` against the basis;
//! 3. center and scale the residualized columns to unit sample standard deviation;
//! 4. solve the penalized problem for each λ on a grid and score it by GCV;
//! 5. refit at the GCV minimizer and map coefficients back to the original units;
//! 6. recover the spline coefficients from `Y − Xβ̂`;
//! 7. estimate σ² and sandwich standard errors for the selected coefficients.
//!
//! The penalty acts on the standardized scale, so covariates with small spread
//! are not penalized more heavily than others.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};
use crate::exec::Execution;
use crate::optimizer::{condition_estimate, ols_initializer, solve_penalized, SolveResult, SolverOptions};
use crate::penalty::{PenaltyFamily, PenaltySpec, DEFAULT_SCAD_A};
use crate::projection::ProjectionContext;
use crate::spline::{basis_matrix, make_quantile_partition, SplineBasis};

/// Observations of `Y`, the parametric design `X` and the nonparametric covariate `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    response: DVector<f64>,
    design: DMatrix<f64>,
    nonparam: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        response: Vec<f64>,
        design: DMatrix<f64>,
        nonparam: Vec<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n = response.len();
        if design.nrows() != n || nonparam.len() != n {
            return Err(PlmError::Dimension(format!(
                "response has {n} rows, design {}, nonparametric covariate {}",
                design.nrows(),
                nonparam.len()
            )));
        }
        if design.ncols() == 0 {
            return Err(PlmError::Dimension("design needs at least one column".into()));
        }
        if column_names.len() != design.ncols() {
            return Err(PlmError::Dimension(format!(
                "{} column names for {} design columns",
                column_names.len(),
                design.ncols()
            )));
        }
        let finite = response.iter().chain(design.iter()).chain(nonparam.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(PlmError::Config("dataset contains non-finite values".into()));
        }
        Ok(Self {
            response: DVector::from_vec(response),
            design,
            nonparam,
            column_names,
        })
    }

    /// Names `x1, ..., xp`.
    pub fn with_default_names(response: Vec<f64>, design: DMatrix<f64>, nonparam: Vec<f64>) -> Result<Self> {
        let names = (1..=design.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(response, design, nonparam, names)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn nonparam(&self) -> &[f64] {
        &self.nonparam
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }
}

/// Penalty levels to score by GCV, on the standardized coefficient scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaGrid {
    /// `count` log-spaced values from `λ_max = max_j |Xr_j'Yr| / n` down to
    /// `min_ratio · λ_max`.
    Auto { count: usize, min_ratio: f64 },
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            count: 50,
            min_ratio: 1e-3,
        }
    }
}

impl LambdaGrid {
    /// Ascending, deduplicated grid for the given standardized problem.
    pub fn resolve(&self, xs: &DMatrix<f64>, yr: &DVector<f64>) -> Result<Vec<f64>> {
        let mut values = match self {
            LambdaGrid::Explicit(v) => {
                if v.is_empty() {
                    return Err(PlmError::Config("lambda grid is empty".into()));
                }
                if v.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return Err(PlmError::Config("lambda grid values must be finite and nonnegative".into()));
                }
                v.clone()
            }
            LambdaGrid::Auto { count, min_ratio } => {
                if *count == 0 || !(*min_ratio > 0.0 && *min_ratio < 1.0) {
                    return Err(PlmError::Config(format!(
                        "automatic grid needs count ≥ 1 and 0 < min_ratio < 1, got {count}, {min_ratio}"
                    )));
                }
                let n = xs.nrows() as f64;
                let lambda_max = xs.tr_mul(yr).amax() / n;
                if lambda_max <= 0.0 || *count == 1 {
                    vec![lambda_max]
                } else {
                    (0..*count)
                        .map(|k| lambda_max * min_ratio.powf(k as f64 / (*count - 1) as f64))
                        .collect()
                }
            }
        };
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub spline_order: usize,
    pub interior_knots: usize,
    pub penalty_family: PenaltyFamily,
    pub a: f64,
    pub lambda_grid: LambdaGrid,
    pub solver: SolverOptions,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            spline_order: 4,
            interior_knots: 3,
            penalty_family: PenaltyFamily::Scad,
            a: DEFAULT_SCAD_A,
            lambda_grid: LambdaGrid::default(),
            solver: SolverOptions::default(),
            execution: Execution::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spline_order == 0 {
            return Err(PlmError::Config("spline order must be at least 1".into()));
        }
        PenaltySpec::new(self.penalty_family, 0.0, self.a)?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvEntry {
    pub lambda: f64,
    pub gcv: f64,
    pub df: f64,
}

/// A fitted partially linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct PLMFit {
    pub column_names: Vec<String>,
    /// Coefficients in the original units of `X`.
    pub beta_hat: Vec<f64>,
    pub selected: Vec<bool>,
    pub alpha_hat: Vec<f64>,
    pub lambda_chosen: f64,
    pub gcv_table: Vec<GcvEntry>,
    pub sigma2_hat: f64,
    /// `None` for coefficients that were not selected.
    pub std_errors: Vec<Option<f64>>,
    pub basis: SplineBasis,
    pub residuals: Vec<f64>,
    pub effective_df: f64,
    pub rss: f64,
    pub penalty_family: PenaltyFamily,
    pub a: f64,
    /// Largest objective increase seen across every MM iteration of every grid solve.
    pub max_objective_increase: f64,
    /// Whether every grid solve met the convergence tolerance.
    pub all_converged: bool,
}

impl PLMFit {
    pub fn predict_g(&self, t: f64) -> Result<f64> {
        predict_g(self, t)
    }

    /// `ĝ` on `points` equally spaced values spanning the basis domain, endpoints included.
    pub fn g_grid(&self, points: usize) -> Result<Vec<(f64, f64)>> {
        let lo = self.basis.partition().lower();
        let hi = self.basis.partition().upper();
        (0..points)
            .map(|k| {
                let t = if points == 1 {
                    lo
                } else if k + 1 == points {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (points - 1) as f64
                };
                Ok((t, self.predict_g(t)?))
            })
            .collect()
    }
}

/// `(rss / n) / (1 − df / n)²`.
pub fn gcv_score(rss: f64, n: usize, df: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(df < nf) {
        return Err(PlmError::GcvUndefined { df, n });
    }
    let shrink = 1.0 - df / nf;
    Ok((rss / nf) / (shrink * shrink))
}

/// `rss / (n − df)`.
pub fn sigma2_estimate(rss: f64, n: usize, df: f64) -> Result<f64> {
    if !(df < n as f64) {
        return Err(PlmError::GcvUndefined { df, n });
    }
    Ok(rss / (n as f64 - df))
}

/// Bread matrix `Xa'Xa + (n/2) Σ_λ`, with `Σ_λ = diag(p'_λ(|β_j|) / |β_j|)`.
fn bread(xa: &DMatrix<f64>, n: usize, spec: &PenaltySpec, beta: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if xa.ncols() != beta.len() || xa.nrows() != n {
        return Err(PlmError::Dimension(format!(
            "active design {} × {} with {} coefficients and n = {n}",
            xa.nrows(),
            xa.ncols(),
            beta.len()
        )));
    }
    let gram = xa.tr_mul(xa);
    let mut h = gram.clone();
    for j in 0..beta.len() {
        let mag = beta[j].abs();
        if mag == 0.0 {
            return Err(PlmError::Domain(format!("active coefficient {j} is zero")));
        }
        h[(j, j)] += 0.5 * n as f64 * spec.slope(mag) / mag;
    }
    Ok((gram, h))
}

fn inverse_times(h: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = h.clone().cholesky().ok_or_else(|| {
        PlmError::Numerical(format!(
            "penalized Gram matrix is singular (condition estimate {:.3e})",
            condition_estimate(h)
        ))
    })?;
    Ok(chol.solve(rhs))
}

/// `q + tr{ Xa (Xa'Xa + (n/2) Σ_λ)⁻¹ Xa' }` for the active (nonzero) coefficients.
pub fn effective_df(
    xr_active: &DMatrix<f64>,
    n: usize,
    spec: &PenaltySpec,
    beta_active: &DVector<f64>,
    q: usize,
) -> Result<f64> {
    Ok(q as f64 + hat_trace(xr_active, n, spec, beta_active)?)
}

fn hat_trace(xa: &DMatrix<f64>, n: usize, spec: &PenaltySpec, beta: &DVector<f64>) -> Result<f64> {
    if beta.is_empty() {
        return Ok(0.0);
    }
    let (gram, h) = bread(xa, n, spec, beta)?;
    Ok(inverse_times(&h, &gram)?.trace())
}

/// Sandwich standard errors `sqrt diag{ σ² H⁻¹ Xa'Xa H⁻¹ }` on the scale of `xr_active`.
pub fn standard_errors(
    xr_active: &DMatrix<f64>,
    n: usize,
    spec: &PenaltySpec,
    beta_active: &DVector<f64>,
    sigma2: f64,
) -> Result<Vec<f64>> {
    if beta_active.is_empty() {
        return Err(PlmError::Config("standard errors need a nonempty active set".into()));
    }
    let (gram, h) = bread(xr_active, n, spec, beta_active)?;
    let left = inverse_times(&h, &gram)?;
    let cov = inverse_times(&h, &left.transpose())?;
    Ok((0..beta_active.len()).map(|j| (sigma2 * cov[(j, j)]).max(0.0).sqrt()).collect())
}

/// `ĝ(t) = Z(t)'α̂`.
pub fn predict_g(fit: &PLMFit, t: f64) -> Result<f64> {
    fit.basis.evaluate_spline(&fit.alpha_hat, t)
}

/// Outcome of the profiled penalized fit, shared by the spline model and the
/// intercept-only comparison estimator.
#[derive(Debug, Clone)]
pub(crate) struct ProfileEstimate {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub gcv_table: Vec<GcvEntry>,
    pub sigma2: f64,
    pub std_errors: Vec<Option<f64>>,
    pub df: f64,
    pub rss: f64,
    pub max_objective_increase: f64,
    pub all_converged: bool,
}

pub(crate) struct Standardized {
    pub xs: DMatrix<f64>,
    pub yr: DVector<f64>,
    pub scales: Vec<f64>,
}

pub(crate) fn standardize(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    ctx: &ProjectionContext,
    names: &[String],
) -> Result<Standardized> {
    let n = design.nrows();
    if n < 2 {
        return Err(PlmError::Dimension("need at least two observations".into()));
    }
    let mut xs = ctx.residualize(design)?;
    let yr = ctx.residualize_vector(y)?;
    let mut scales = Vec::with_capacity(design.ncols());
    for j in 0..design.ncols() {
        let mean = xs.column(j).mean();
        let mut col = xs.column_mut(j);
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n - 1) as f64).sqrt();
        let raw_scale = (design.column(j).norm_squared() / n as f64).sqrt().max(1.0);
        if !(sd > 1e-12 * raw_scale) {
            return Err(PlmError::DegenerateColumn {
                name: names.get(j).cloned().unwrap_or_else(|| format!("column {j}")),
                index: j,
                residual_sd: sd,
            });
        }
        col /= sd;
        scales.push(sd);
    }
    Ok(Standardized { xs, yr, scales })
}

fn columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, k| m[(i, idx[k])])
}

fn active_set(coefficients: &DVector<f64>) -> Vec<usize> {
    (0..coefficients.len()).filter(|&j| coefficients[j] != 0.0).collect()
}

struct GridPoint {
    solve: SolveResult,
    rss: f64,
    df: f64,
    gcv: f64,
}

fn score_lambda(
    std: &Standardized,
    spec: &PenaltySpec,
    init: &DVector<f64>,
    solver: &SolverOptions,
    base_df: usize,
) -> Result<GridPoint> {
    let n = std.xs.nrows();
    let solve = solve_penalized(&std.xs, &std.yr, spec, init, solver)?;
    let rss = (&std.yr - &std.xs * &solve.coefficients).norm_squared();
    let active = active_set(&solve.coefficients);
    let xa = columns(&std.xs, &active);
    let ba = DVector::from_iterator(active.len(), active.iter().map(|&j| solve.coefficients[j]));
    let df = effective_df(&xa, n, spec, &ba, base_df)?;
    let gcv = gcv_score(rss, n, df)?;
    Ok(GridPoint { solve, rss, df, gcv })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn profile_estimate(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    ctx: &ProjectionContext,
    names: &[String],
    family: PenaltyFamily,
    a: f64,
    grid: &LambdaGrid,
    solver: &SolverOptions,
    execution: Execution,
) -> Result<ProfileEstimate> {
    let n = design.nrows();
    let p = design.ncols();
    let base_df = ctx.effective_rank();
    if n <= p + base_df {
        return Err(PlmError::GcvUndefined {
            df: (p + base_df) as f64,
            n,
        });
    }
    let std = standardize(design, y, ctx, names)?;
    let lambdas = match family {
        PenaltyFamily::None => vec![0.0],
        _ => grid.resolve(&std.xs, &std.yr)?,
    };
    let init = ols_initializer(&std.xs, &std.yr)?;

    let scored: Vec<Result<GridPoint>> = execution.map_indexed(lambdas.len(), |k| {
        let spec = PenaltySpec::new(family, lambdas[k], a)?;
        score_lambda(&std, &spec, &init, solver, base_df)
    });
    let scored: Vec<GridPoint> = scored.into_iter().collect::<Result<_>>()?;

    // ascending λ with strict comparison: ties keep the smallest λ
    let mut best = 0;
    for (k, point) in scored.iter().enumerate() {
        if point.gcv < scored[best].gcv {
            best = k;
        }
    }
    let gcv_table = lambdas
        .iter()
        .zip(&scored)
        .map(|(&lambda, pt)| GcvEntry {
            lambda,
            gcv: pt.gcv,
            df: pt.df,
        })
        .collect();
    let max_objective_increase = scored
        .iter()
        .map(|pt| pt.solve.max_objective_increase())
        .fold(0.0, f64::max);
    let all_converged = scored.iter().all(|pt| pt.solve.converged);

    let lambda = lambdas[best];
    let spec = PenaltySpec::new(family, lambda, a)?;
    let refit = score_lambda(&std, &spec, &init, solver, base_df)?;
    let gamma = &refit.solve.coefficients;
    let sigma2 = sigma2_estimate(refit.rss, n, refit.df)?;

    let active = active_set(gamma);
    let mut std_errors = vec![None; p];
    if !active.is_empty() {
        let xa = columns(&std.xs, &active);
        let ga = DVector::from_iterator(active.len(), active.iter().map(|&j| gamma[j]));
        let se = standard_errors(&xa, n, &spec, &ga, sigma2)?;
        for (k, &j) in active.iter().enumerate() {
            std_errors[j] = Some(se[k] / std.scales[j]);
        }
    }
    let beta = (0..p).map(|j| gamma[j] / std.scales[j]).collect();

    Ok(ProfileEstimate {
        beta,
        lambda,
        gcv_table,
        sigma2,
        std_errors,
        df: refit.df,
        rss: refit.rss,
        max_objective_increase: max_objective_increase.max(refit.solve.max_objective_increase()),
        all_converged,
    })
}

/// Fits the partially linear model with GCV-selected penalty level.
pub fn fit_plm(data: &Dataset, config: &FitConfig) -> Result<PLMFit> {
    config.validate()?;
    let partition = make_quantile_partition(data.nonparam(), config.interior_knots)?;
    let basis = SplineBasis::new(config.spline_order, partition)?;
    let z = basis_matrix(&basis, data.nonparam())?;
    let ctx = ProjectionContext::new(z)?;

    let est = profile_estimate(
        data.design(),
        data.response(),
        &ctx,
        data.column_names(),
        config.penalty_family,
        config.a,
        &config.lambda_grid,
        &config.solver,
        config.execution,
    )?;

    let beta = DVector::from_column_slice(&est.beta);
    let partial = data.response() - data.design() * &beta;
    let alpha = ctx.solve_spline_coeffs(&partial)?;
    let residuals = &partial - ctx.basis_matrix() * &alpha;

    Ok(PLMFit {
        column_names: data.column_names().to_vec(),
        selected: est.beta.iter().map(|&b| b != 0.0).collect(),
        beta_hat: est.beta,
        alpha_hat: alpha.iter().copied().collect(),
        lambda_chosen: est.lambda,
        gcv_table: est.gcv_table,
        sigma2_hat: est.sigma2,
        std_errors: est.std_errors,
        basis,
        residuals: residuals.iter().copied().collect(),
        effective_df: est.df,
        rss: est.rss,
        penalty_family: config.penalty_family,
        a: config.a,
        max_objective_increase: est.max_objective_increase,
        all_converged: est.all_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn synthetic(seed: u64, n: usize, beta: &[f64], g: impl Fn(f64) -> f64, noise: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = beta.len();
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x = DMatrix::from_fn(n, p, |i, j| rng.sample::<f64, _>(StandardNormal) + 0.3 * (j as f64 + 1.0) * t[i]);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let lin: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
                lin + g(t[i]) + noise * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        Dataset::with_default_names(y, x, t).unwrap()
    }

    fn unpenalized() -> FitConfig {
        FitConfig {
            penalty_family: PenaltyFamily::None,
            ..FitConfig::default()
        }
    }

    #[test]
    fn gcv_and_sigma2_examples() {
        assert!((gcv_score(100.0, 100, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((gcv_score(10.0, 100, 50.0).unwrap() - 0.4).abs() < 1e-15);
        assert!(gcv_score(10.0, 100, 20.0).unwrap() > gcv_score(10.0, 100, 10.0).unwrap());
        assert!(matches!(gcv_score(1.0, 10, 10.0), Err(PlmError::GcvUndefined { .. })));
        assert!((sigma2_estimate(96.0, 100, 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sigma2_estimate(0.0, 100, 4.0).unwrap(), 0.0);
        assert!(sigma2_estimate(1.0, 4, 4.0).is_err());
    }

    #[test]
    fn effective_df_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(30, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let df = effective_df(&x, 30, &PenaltySpec::none(), &b, 7).unwrap();
        assert!((df - 10.0).abs() < 1e-8);
        let empty = DMatrix::zeros(30, 0);
        assert_eq!(effective_df(&empty, 30, &PenaltySpec::none(), &DVector::zeros(0), 7).unwrap(), 7.0);
        // every |β| > aλ: penalty curvature vanishes, trace is the active count
        let scad = PenaltySpec::scad(0.1, 3.7).unwrap();
        let df = effective_df(&x, 30, &scad, &b, 7).unwrap();
        // eigenvalue oracle: the hat matrix X(X'X)⁻¹X' has eigenvalues 0/1
        let hat = &x * x.tr_mul(&x).try_inverse().unwrap() * x.transpose();
        let eig_sum: f64 = hat.symmetric_eigen().eigenvalues.iter().sum();
        assert!((df - 7.0 - eig_sum).abs() < 1e-8);
        assert!((eig_sum - 3.0).abs() < 1e-8);
        // active penalty shrinks the trace
        let shrunk = effective_df(&x, 30, &PenaltySpec::scad(1.0, 3.7).unwrap(), &b, 7).unwrap();
        assert!(shrunk < 10.0);
    }

    #[test]
    fn standard_errors_collapse_to_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(40, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DVector::from_vec(vec![2.0, -3.0, 1.5]);
        let sigma2 = 0.7;
        let ols_cov = x.tr_mul(&x).try_inverse().unwrap() * sigma2;
        let none = standard_errors(&x, 40, &PenaltySpec::none(), &b, sigma2).unwrap();
        let scad = standard_errors(&x, 40, &PenaltySpec::scad(0.2, 3.7).unwrap(), &b, sigma2).unwrap();
        for j in 0..3 {
            assert!((none[j] - ols_cov[(j, j)].sqrt()).abs() < 1e-8);
            assert!((scad[j] - none[j]).abs() < 1e-12);
        }
        assert!(standard_errors(&x, 40, &PenaltySpec::none(), &DVector::zeros(0), 1.0).is_err());
    }

    #[test]
    fn no_signal_no_noise_recovers_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 80;
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = [1.0, -2.0, 0.5];
        let y: Vec<f64> = (0..n).map(|i| (0..3).map(|j| x[(i, j)] * beta[j]).sum()).collect();
        let data = Dataset::with_default_names(y, x, t).unwrap();
        let fit = fit_plm(&data, &unpenalized()).unwrap();
        for (b_hat, b) in fit.beta_hat.iter().zip(&beta) {
            assert!((b_hat - b).abs() < 1e-6);
        }
        assert!(fit.alpha_hat.iter().all(|a| a.abs() < 1e-8));
    }

    #[test]
    fn exact_spline_signal_is_reproduced() {
        let data = synthetic(9, 60, &[1.5, 0.0], |t| 3.0 + t - 2.0 * t * t * t, 0.0);
        let fit = fit_plm(&data, &unpenalized()).unwrap();
        for (i, &t) in data.nonparam().iter().enumerate() {
            let g = 3.0 + t - 2.0 * t.powi(3);
            assert!((fit.predict_g(t).unwrap() - g).abs() < 1e-8, "row {i}");
        }
        let constant = synthetic(10, 50, &[0.0, 0.0], |_| 4.25, 0.0);
        let fit = fit_plm(&constant, &unpenalized()).unwrap();
        for t in [0.1, 0.5, 0.77] {
            if constant.nonparam().iter().any(|&v| v <= t) && constant.nonparam().iter().any(|&v| v >= t) {
                assert!((fit.predict_g(t).unwrap() - 4.25).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_lambda_grid_is_profile_ols() {
        let data = synthetic(11, 90, &[1.0, 0.0, -0.5, 2.0], |t| (2.0 * t).sin(), 1.0);
        let config = FitConfig {
            lambda_grid: LambdaGrid::Explicit(vec![0.0]),
            ..FitConfig::default()
        };
        let fit = fit_plm(&data, &config).unwrap();
        let partition = make_quantile_partition(data.nonparam(), 3).unwrap();
        let basis = SplineBasis::new(4, partition).unwrap();
        let ctx = ProjectionContext::new(basis_matrix(&basis, data.nonparam()).unwrap()).unwrap();
        let xr = ctx.residualize(data.design()).unwrap();
        let yr = ctx.residualize_vector(data.response()).unwrap();
        let direct = (xr.tr_mul(&xr)).cholesky().unwrap().solve(&xr.tr_mul(&yr));
        for j in 0..4 {
            assert!((fit.beta_hat[j] - direct[j]).abs() < 1e-8);
        }
        assert!(fit.selected.iter().all(|&s| s));
    }

    #[test]
    fn residualized_columns_are_centered() {
        let data = synthetic(12, 70, &[1.0, 2.0], |t| t, 1.0);
        let partition = make_quantile_partition(data.nonparam(), 3).unwrap();
        let basis = SplineBasis::new(4, partition).unwrap();
        let ctx = ProjectionContext::new(basis_matrix(&basis, data.nonparam()).unwrap()).unwrap();
        let xr = ctx.residualize(data.design()).unwrap();
        let yr = ctx.residualize_vector(data.response()).unwrap();
        for j in 0..2 {
            assert!(xr.column(j).sum().abs() < 1e-10);
        }
        assert!(yr.sum().abs() < 1e-10);
    }

    #[test]
    fn fit_invariants() {
        let data = synthetic(13, 100, &[1.0, 0.0, 2.0, 0.0, 0.0], |t| (6.0 * t).cos(), 1.0);
        let fit = fit_plm(&data, &FitConfig::default()).unwrap();
        for j in 0..5 {
            assert_eq!(fit.selected[j], fit.beta_hat[j] != 0.0);
            assert_eq!(fit.selected[j], fit.std_errors[j].is_some());
        }
        let min = fit.gcv_table.iter().map(|e| e.gcv).fold(f64::INFINITY, f64::min);
        let first_min = fit.gcv_table.iter().find(|e| e.gcv == min).unwrap();
        assert_eq!(first_min.lambda, fit.lambda_chosen);
        let z = basis_matrix(&fit.basis, data.nonparam()).unwrap();
        let fitted = data.design() * DVector::from_column_slice(&fit.beta_hat)
            + z * DVector::from_column_slice(&fit.alpha_hat);
        for i in 0..data.n() {
            assert!((data.response()[i] - fitted[i] - fit.residuals[i]).abs() < 1e-10);
        }
        // profile consistency
        let direct: f64 = fit.residuals.iter().map(|r| r * r).sum();
        assert!((direct - fit.rss).abs() < 1e-8 * fit.rss);
        assert!(fit.max_objective_increase <= 1e-10);
    }

    #[test]
    fn selection_at_extreme_lambdas() {
        let data = synthetic(14, 100, &[1.0, 0.0, 2.0], |t| t * t, 1.0);
        let partition = make_quantile_partition(data.nonparam(), 3).unwrap();
        let basis = SplineBasis::new(4, partition).unwrap();
        let ctx = ProjectionContext::new(basis_matrix(&basis, data.nonparam()).unwrap()).unwrap();
        let std = standardize(data.design(), data.response(), &ctx, data.column_names()).unwrap();
        let lambda_zero = 2.0 * std.xs.tr_mul(&std.yr).amax() / 100.0;
        for (grid, expect) in [(vec![0.0], true), (vec![1.1 * lambda_zero], false)] {
            let config = FitConfig {
                lambda_grid: LambdaGrid::Explicit(grid),
                ..FitConfig::default()
            };
            let fit = fit_plm(&data, &config).unwrap();
            assert!(fit.selected.iter().all(|&s| s == expect), "{:?}", fit.beta_hat);
        }
    }

    #[test]
    fn scaling_and_grid_order_do_not_matter() {
        let data = synthetic(15, 100, &[1.0, 0.0, 2.0, 0.3], |t| t.sin(), 1.0);
        let grid: Vec<f64> = (0..20).map(|k| 0.01 * 1.3f64.powi(k)).collect();
        let mut shuffled = grid.clone();
        shuffled.reverse();
        shuffled.swap(3, 11);
        let cfg = |g: Vec<f64>| FitConfig {
            lambda_grid: LambdaGrid::Explicit(g),
            ..FitConfig::default()
        };
        let base = fit_plm(&data, &cfg(grid.clone())).unwrap();
        let permuted = fit_plm(&data, &cfg(shuffled)).unwrap();
        assert_eq!(base.lambda_chosen, permuted.lambda_chosen);

        let scales = [10.0, 0.01, 3.0, 250.0];
        let scaled_x = DMatrix::from_fn(data.n(), 4, |i, j| data.design()[(i, j)] * scales[j]);
        let scaled = Dataset::with_default_names(data.response().iter().copied().collect(), scaled_x, data.nonparam().to_vec()).unwrap();
        let fit = fit_plm(&scaled, &cfg(grid)).unwrap();
        for ((b_hat, scale), b) in fit.beta_hat.iter().zip(&scales).zip(&base.beta_hat) {
            assert!((b_hat * scale - b).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_column_is_named() {
        let mut data = synthetic(16, 60, &[1.0, 1.0], |t| t, 1.0);
        let t = data.nonparam().to_vec();
        for (i, ti) in t.iter().enumerate() {
            data.design[(i, 1)] = 2.0 * ti * ti - 1.0;
        }
        data.column_names = vec!["keep".into(), "spline_like".into()];
        match fit_plm(&data, &FitConfig::default()) {
            Err(PlmError::DegenerateColumn { name, index, .. }) => {
                assert_eq!(name, "spline_like");
                assert_eq!(index, 1);
            }
            other => panic!("expected degenerate column, got {other:?}"),
        }
    }

    #[test]
    fn too_few_observations() {
        let data = synthetic(17, 12, &[1.0, 1.0, 1.0, 1.0, 1.0], |t| t, 1.0);
        assert!(matches!(
            fit_plm(&data, &FitConfig::default()),
            Err(PlmError::GcvUndefined { .. })
        ));
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::with_default_names(vec![1.0], DMatrix::zeros(2, 1), vec![0.0]).is_err());
        assert!(Dataset::with_default_names(vec![f64::NAN, 1.0], DMatrix::zeros(2, 1), vec![0.0, 1.0]).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], DMatrix::zeros(2, 2), vec![0.0, 1.0], vec!["a".into()]).is_err());
    }
}
