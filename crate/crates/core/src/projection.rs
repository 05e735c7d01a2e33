//! Partial residuals with respect to the column space of a basis matrix.
//!
//! The `n × n` projection `P_Z` is never formed. A thin SVD `Z = U Σ V'`
//! truncated to the numerical rank gives `P_Z A = U_r (U_r' A)` and the
//! minimum-norm least-squares coefficients `V_r Σ_r⁻¹ U_r' r`. The SVD comes
//! from faer: nalgebra's SVD returns wrong factors for some exactly
//! rank-deficient matrices, which duplicated or collapsed knots produce.

use nalgebra::{DMatrix, DVector};

use crate::error::{PlmError, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ProjectionContext {
    basis_matrix: DMatrix<f64>,
    /// Orthonormal basis of the column space, `n × r`.
    range: DMatrix<f64>,
    /// `V_r Σ_r⁻¹`, `q × r`.
    coefficient_map: DMatrix<f64>,
    rank: usize,
}

impl ProjectionContext {
    pub fn new(basis_matrix: DMatrix<f64>) -> Result<Self> {
        let (n, q) = basis_matrix.shape();
        if n == 0 || q == 0 {
            return Err(PlmError::Dimension(format!(
                "basis matrix must be non-empty, got {n} × {q}"
            )));
        }
        if basis_matrix.iter().any(|v| !v.is_finite()) {
            return Err(PlmError::Numerical("basis matrix has non-finite entries".into()));
        }
        let z = faer::Mat::from_fn(n, q, |i, j| basis_matrix[(i, j)]);
        let svd = z
            .thin_svd()
            .map_err(|e| PlmError::Numerical(format!("SVD of the basis matrix did not converge: {e:?}")))?;
        let (u, v) = (svd.U(), svd.V());
        let sv = svd.S().column_vector();
        let largest = (0..sv.nrows()).map(|k| sv[k]).fold(0.0_f64, f64::max);
        let keep: Vec<usize> = (0..sv.nrows())
            .filter(|&k| largest > 0.0 && sv[k] > RANK_TOLERANCE * largest)
            .collect();
        let rank = keep.len();
        let range = DMatrix::from_fn(n, rank, |i, c| u[(i, keep[c])]);
        let coefficient_map = DMatrix::from_fn(q, rank, |j, c| v[(j, keep[c])] / sv[keep[c]]);
        Ok(Self {
            basis_matrix,
            range,
            coefficient_map,
            rank,
        })
    }

    /// Projection onto the constant vector, i.e. centering.
    pub fn intercept_only(n: usize) -> Result<Self> {
        Self::new(DMatrix::from_element(n, 1, 1.0))
    }

    pub fn basis_matrix(&self) -> &DMatrix<f64> {
        &self.basis_matrix
    }

    pub fn nrows(&self) -> usize {
        self.basis_matrix.nrows()
    }

    pub fn effective_rank(&self) -> usize {
        self.rank
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.nrows() {
            return Err(PlmError::Dimension(format!(
                "expected {} rows, got {rows}",
                self.nrows()
            )));
        }
        Ok(())
    }

    /// `(I − P_Z) A`, column by column.
    pub fn residualize(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(a.nrows())?;
        let coords = self.range.tr_mul(a);
        Ok(a - &self.range * coords)
    }

    pub fn residualize_vector(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(v.len())?;
        let coords = self.range.tr_mul(v);
        Ok(v - &self.range * coords)
    }

    /// Minimum-norm solution `a` of `Z'Z a = Z'r`.
    pub fn solve_spline_coeffs(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(r.len())?;
        Ok(&self.coefficient_map * self.range.tr_mul(r))
    }

    /// `P_Z r`, computed through the coefficient route `Z a`.
    pub fn fitted(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.basis_matrix * self.solve_spline_coeffs(r)?)
    }
}
