//! Minimize `‖Yr − Xr b‖² + n Σ_j p_λ(b_j)` by local quadratic approximation.
//!
//! Each step replaces the penalty with the quadratic majorizer tangent at the
//! current iterate, which turns the update into a ridge-type solve
//!
//! ```text
//! (Xr'Xr + (n/2) D_k) b = Xr'Yr,   D_k = diag(p'_λ(|b_j|) / (ε + |b_j|)).
//! ```
//!
//! The `ε` perturbation keeps zero coefficients from absorbing the iteration.
//! Because the perturbed weights are not an exact majorizer of the unperturbed
//! penalty, any step that would raise the objective is recomputed with the
//! exact weights `p'_λ(|b_j|) / |b_j|` (coefficients already at zero stay there),
//! which restores strict descent.
//!
//! Exact zeros come from a threshold sweep after convergence. If the sweep
//! removes anything, the iteration resumes with the removed coordinates held at
//! zero, so the returned coefficients are a fixed point of the scheme. With no
//! penalty in force (family `None` or `λ = 0`) nothing is being selected and
//! the least-squares solution is returned without the sweep.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};
use crate::penalty::{PenaltyFamily, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop once the max-norm of the coefficient update falls below this.
    pub tolerance: f64,
    pub lqa_epsilon: f64,
    /// Coefficients smaller than this in magnitude are set to exactly zero
    /// whenever a penalty is in force.
    pub zero_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            lqa_epsilon: 1e-8,
            zero_threshold: 1e-4,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(PlmError::Config("max_iterations must be positive".into()));
        }
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("lqa_epsilon", self.lqa_epsilon),
            ("zero_threshold", self.zero_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlmError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.zero_threshold <= self.lqa_epsilon {
            return Err(PlmError::Config(
                "zero_threshold must exceed lqa_epsilon".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub coefficients: DVector<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Objective at `coefficients` (after the threshold sweep).
    pub final_objective: f64,
    /// Objective at the initializer, after every MM step, and at each restart
    /// following a threshold sweep.
    pub objective_path: Vec<f64>,
    /// Largest objective increase produced by any single MM step.
    pub max_objective_increase: f64,
}

impl SolveResult {
    pub fn max_objective_increase(&self) -> f64 {
        self.max_objective_increase
    }
}

fn check_dims(xr: &DMatrix<f64>, yr: &DVector<f64>, b: &DVector<f64>) -> Result<()> {
    if xr.nrows() != yr.len() {
        return Err(PlmError::Dimension(format!(
            "design has {} rows but response has {}",
            xr.nrows(),
            yr.len()
        )));
    }
    if xr.ncols() != b.len() {
        return Err(PlmError::Dimension(format!(
            "design has {} columns but coefficient vector has {}",
            xr.ncols(),
            b.len()
        )));
    }
    Ok(())
}

fn objective_unchecked(xr: &DMatrix<f64>, yr: &DVector<f64>, spec: &PenaltySpec, b: &DVector<f64>) -> f64 {
    let resid = yr - xr * b;
    resid.norm_squared() + xr.nrows() as f64 * spec.total(b.iter().copied())
}

/// `‖Yr − Xr b‖² + n Σ_j p_λ(b_j)`.
pub fn objective_value(
    xr: &DMatrix<f64>,
    yr: &DVector<f64>,
    spec: &PenaltySpec,
    b: &DVector<f64>,
) -> Result<f64> {
    check_dims(xr, yr, b)?;
    Ok(objective_unchecked(xr, yr, spec, b))
}

/// Ratio of extreme eigenvalues of a symmetric matrix; infinite when singular.
pub(crate) fn condition_estimate(sym: &DMatrix<f64>) -> f64 {
    if sym.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(sym.clone());
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Share of a diagonal entry left after elimination below which a column is
/// reported as linearly dependent.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Solves the SPD system `h x = rhs` by Cholesky.
pub(crate) fn spd_solve(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let failure = || PlmError::SolverFailure {
        condition: condition_estimate(h),
    };
    let chol = h.clone().cholesky().ok_or_else(failure)?;
    // L_jj² / H_jj is the share of column j not explained by the earlier
    // columns; a vanishing share means dependence. Large diagonal penalty
    // weights make H ill-conditioned without making it singular, so the raw
    // pivot spread is not used.
    let l = chol.l_dirty();
    let degenerate = (0..h.nrows()).any(|j| !(l[(j, j)] * l[(j, j)] > SINGULAR_PIVOT_RATIO * h[(j, j)]));
    if degenerate {
        return Err(failure());
    }
    let x = chol.solve(rhs);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(failure())
    }
}

/// Ordinary least squares start; a small ridge is added when `Xr'Xr` is
/// badly conditioned.
pub fn ols_initializer(xr: &DMatrix<f64>, yr: &DVector<f64>) -> Result<DVector<f64>> {
    if xr.nrows() != yr.len() {
        return Err(PlmError::Dimension(format!(
            "design has {} rows but response has {}",
            xr.nrows(),
            yr.len()
        )));
    }
    let p = xr.ncols();
    let mut gram = xr.tr_mul(xr);
    let rhs = xr.tr_mul(yr);
    if condition_estimate(&gram) > 1e10 {
        let ridge = 1e-6 * gram.trace() / p as f64;
        let ridge = if ridge > 0.0 { ridge } else { 1e-6 };
        for j in 0..p {
            gram[(j, j)] += ridge;
        }
    }
    spd_solve(&gram, &rhs)
}

struct Problem<'a> {
    xr: &'a DMatrix<f64>,
    yr: &'a DVector<f64>,
    spec: &'a PenaltySpec,
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    half_n: f64,
}

impl Problem<'_> {
    fn objective(&self, b: &DVector<f64>) -> f64 {
        objective_unchecked(self.xr, self.yr, self.spec, b)
    }

    fn perturbed_step(&self, b: &DVector<f64>, eps: f64, frozen: &[bool]) -> Result<DVector<f64>> {
        if frozen.iter().any(|&f| f) {
            return self.restricted_step(b, frozen, |mag| self.spec.slope(mag) / (eps + mag));
        }
        let mut h = self.gram.clone();
        for j in 0..b.len() {
            let mag = b[j].abs();
            h[(j, j)] += self.half_n * self.spec.slope(mag) / (eps + mag);
        }
        spd_solve(&h, &self.rhs)
    }

    /// Exact-majorizer step; coordinates at zero are held at zero.
    fn exact_step(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let at_zero: Vec<bool> = b.iter().map(|&v| v == 0.0).collect();
        self.restricted_step(b, &at_zero, |mag| self.spec.slope(mag) / mag)
    }

    /// LQA step over the coordinates not in `fixed`, which stay at zero.
    fn restricted_step(
        &self,
        b: &DVector<f64>,
        fixed: &[bool],
        weight: impl Fn(f64) -> f64,
    ) -> Result<DVector<f64>> {
        let active: Vec<usize> = (0..b.len()).filter(|&j| !fixed[j]).collect();
        let mut out = DVector::zeros(b.len());
        if active.is_empty() {
            return Ok(out);
        }
        let k = active.len();
        let mut h = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for (r, &i) in active.iter().enumerate() {
            rhs[r] = self.rhs[i];
            for (c, &j) in active.iter().enumerate() {
                h[(r, c)] = self.gram[(i, j)];
            }
            h[(r, r)] += self.half_n * weight(b[i].abs());
        }
        let sol = spd_solve(&h, &rhs)?;
        for (r, &i) in active.iter().enumerate() {
            out[i] = sol[r];
        }
        Ok(out)
    }
}

/// Runs the MM iteration from `init` and thresholds the result.
pub fn solve_penalized(
    xr: &DMatrix<f64>,
    yr: &DVector<f64>,
    spec: &PenaltySpec,
    init: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    check_dims(xr, yr, init)?;
    spec.validate()?;
    opts.validate()?;
    let (n, p) = xr.shape();
    if n == 0 || p == 0 {
        return Err(PlmError::Dimension(format!(
            "need n ≥ 1 and p ≥ 1, got n = {n}, p = {p}"
        )));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(PlmError::Config("initial coefficients must be finite".into()));
    }

    let problem = Problem {
        xr,
        yr,
        spec,
        gram: xr.tr_mul(xr),
        rhs: xr.tr_mul(yr),
        half_n: 0.5 * n as f64,
    };

    let mut b = init.clone();
    let mut objective = problem.objective(&b);
    if !objective.is_finite() {
        return Err(PlmError::Divergence { iteration: 0 });
    }
    let mut path = vec![objective];
    let mut max_increase = 0.0_f64;
    let mut converged;
    let mut iterations = 0;
    // coordinates removed by the threshold sweep are held at zero afterwards
    let mut frozen = vec![false; p];

    loop {
        converged = false;
        while iterations < opts.max_iterations {
            iterations += 1;
            let mut next = problem.perturbed_step(&b, opts.lqa_epsilon, &frozen)?;
            let mut next_objective = problem.objective(&next);
            if next_objective > objective && spec.family != PenaltyFamily::None {
                let exact = problem.exact_step(&b)?;
                let exact_objective = problem.objective(&exact);
                if exact_objective < next_objective {
                    next = exact;
                    next_objective = exact_objective;
                }
            }
            if !next_objective.is_finite() {
                return Err(PlmError::Divergence { iteration: iterations });
            }
            let change = (&next - &b).amax();
            max_increase = max_increase.max(next_objective - objective);
            b = next;
            objective = next_objective;
            path.push(objective);
            if change < opts.tolerance {
                converged = true;
                break;
            }
        }

        if spec.family == PenaltyFamily::None || spec.lambda == 0.0 {
            break;
        }
        let mut newly_zeroed = false;
        for (j, v) in b.iter_mut().enumerate() {
            if v.abs() < opts.zero_threshold {
                if *v != 0.0 && !frozen[j] {
                    newly_zeroed = true;
                }
                *v = 0.0;
                frozen[j] = true;
            }
        }
        objective = problem.objective(&b);
        if !newly_zeroed || !converged || frozen.iter().all(|&f| f) {
            break;
        }
        path.push(objective);
    }

    Ok(SolveResult {
        coefficients: b,
        iterations_used: iterations,
        converged,
        final_objective: objective,
        objective_path: path,
        max_objective_increase: max_increase,
    })
}
