//! Polynomial-spline spaces on a knot partition and their local B-spline basis.
//!
//! A basis of order `m` (degree `m - 1`) with `M` simple interior knots has
//! dimension `q = M + m`. The boundary knots are repeated `m` times (clamped
//! extension), so the first and last basis functions interpolate the endpoints.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};

/// Boundary interval plus strictly increasing interior knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotPartition {
    lower: f64,
    upper: f64,
    interior: Vec<f64>,
}

impl KnotPartition {
    pub fn new(lower: f64, upper: f64, interior: Vec<f64>) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(PlmError::InvalidPartition(
                "boundary knots must be finite".into(),
            ));
        }
        if lower >= upper {
            return Err(PlmError::InvalidPartition(format!(
                "lower boundary {lower} is not below upper boundary {upper}"
            )));
        }
        let mut prev = lower;
        for &k in &interior {
            if !(k > prev) {
                return Err(PlmError::InvalidPartition(format!(
                    "interior knots must be strictly increasing inside ({lower}, {upper}); got {k} after {prev}"
                )));
            }
            prev = k;
        }
        if let Some(&last) = interior.last() {
            if last >= upper {
                return Err(PlmError::InvalidPartition(format!(
                    "interior knot {last} is not below upper boundary {upper}"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            interior,
        })
    }

    /// Partition with `count` equally spaced interior knots.
    pub fn uniform(lower: f64, upper: f64, count: usize) -> Result<Self> {
        let width = upper - lower;
        let interior = (1..=count)
            .map(|k| lower + width * k as f64 / (count + 1) as f64)
            .collect();
        Self::new(lower, upper, interior)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lower && t <= self.upper
    }
}

/// Type-7 empirical quantile of already sorted data.
fn sorted_quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Boundary knots at the sample extremes and `M` interior knots at the
/// `k / (M + 1)` empirical quantiles.
///
/// Coinciding quantile knots (and quantiles that land on a boundary) are
/// collapsed, so the returned partition may carry fewer than `M` interior knots.
pub fn make_quantile_partition(t_values: &[f64], interior_count: usize) -> Result<KnotPartition> {
    if t_values.is_empty() {
        return Err(PlmError::InvalidPartition("no values supplied".into()));
    }
    if t_values.iter().any(|t| !t.is_finite()) {
        return Err(PlmError::InvalidPartition("non-finite value".into()));
    }
    let mut sorted = t_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if interior_count >= distinct.len() {
        return Err(PlmError::InvalidPartition(format!(
            "{interior_count} interior knots requested but only {} distinct values",
            distinct.len()
        )));
    }
    let lower = sorted[0];
    let upper = sorted[sorted.len() - 1];

    let mut interior: Vec<f64> = Vec::with_capacity(interior_count);
    for k in 1..=interior_count {
        let knot = sorted_quantile(&sorted, k as f64 / (interior_count + 1) as f64);
        if knot <= lower || knot >= upper || interior.last().is_some_and(|&l| knot <= l) {
            continue;
        }
        interior.push(knot);
    }
    if interior.len() < interior_count {
        warn!(
            "tied quantiles collapsed: {} of {} interior knots kept",
            interior.len(),
            interior_count
        );
    }
    KnotPartition::new(lower, upper, interior)
}

/// Clamped B-spline basis of a given order on a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    order: usize,
    partition: KnotPartition,
    #[serde(skip)]
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(order: usize, partition: KnotPartition) -> Result<Self> {
        if order == 0 {
            return Err(PlmError::Config("spline order must be at least 1".into()));
        }
        let mut knots = Vec::with_capacity(partition.interior.len() + 2 * order);
        knots.extend(std::iter::repeat_n(partition.lower, order));
        knots.extend_from_slice(&partition.interior);
        knots.extend(std::iter::repeat_n(partition.upper, order));
        Ok(Self {
            order,
            partition,
            knots,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.order - 1
    }

    pub fn partition(&self) -> &KnotPartition {
        &self.partition
    }

    /// `q = M + m`.
    pub fn dimension(&self) -> usize {
        self.partition.interior.len() + self.order
    }

    /// Full clamped knot sequence, length `q + m`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Index `i` of the knot span with `knots[i] <= t < knots[i + 1]`; the upper
    /// boundary belongs to the last span.
    fn span(&self, t: f64) -> usize {
        let q = self.dimension();
        if t >= self.partition.upper {
            return q - 1;
        }
        // knots[m-1..=q] are the distinct breakpoints lower, interior..., upper
        let m = self.order;
        let breaks = &self.knots[m - 1..=q];
        let pos = breaks.partition_point(|&k| k <= t);
        m - 1 + pos - 1
    }

    /// The `m` possibly nonzero basis values at `t` and the index of the first.
    pub fn evaluate_local(&self, t: f64) -> Result<(usize, Vec<f64>)> {
        if !self.partition.contains(t) || !t.is_finite() {
            return Err(PlmError::OutOfDomain {
                t,
                lower: self.partition.lower,
                upper: self.partition.upper,
                row: None,
            });
        }
        let m = self.order;
        let span = self.span(t);
        let knots = &self.knots;
        let mut values = vec![0.0; m];
        let mut left = vec![0.0; m];
        let mut right = vec![0.0; m];
        values[0] = 1.0;
        for j in 1..m {
            left[j] = t - knots[span + 1 - j];
            right[j] = knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok((span + 1 - m, values))
    }

    /// All `q` basis values at `t`.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let (first, local) = self.evaluate_local(t)?;
        let mut out = vec![0.0; self.dimension()];
        out[first..first + local.len()].copy_from_slice(&local);
        Ok(out)
    }

    /// Spline value `Σ_w coef_w B_w(t)`.
    pub fn evaluate_spline(&self, coefficients: &[f64], t: f64) -> Result<f64> {
        if coefficients.len() != self.dimension() {
            return Err(PlmError::Dimension(format!(
                "{} spline coefficients for a basis of dimension {}",
                coefficients.len(),
                self.dimension()
            )));
        }
        let (first, local) = self.evaluate_local(t)?;
        Ok(local
            .iter()
            .zip(&coefficients[first..])
            .map(|(b, c)| b * c)
            .sum())
    }

    /// Rebuilds the cached knot sequence after deserialization.
    pub fn rebuilt(self) -> Result<Self> {
        Self::new(self.order, self.partition)
    }
}

/// `n × q` matrix whose row `i` is the basis evaluated at `t_values[i]`.
pub fn basis_matrix(basis: &SplineBasis, t_values: &[f64]) -> Result<DMatrix<f64>> {
    let q = basis.dimension();
    let mut z = DMatrix::zeros(t_values.len(), q);
    for (i, &t) in t_values.iter().enumerate() {
        let (first, local) = basis.evaluate_local(t).map_err(|e| match e {
            PlmError::OutOfDomain {
                t, lower, upper, ..
            } => PlmError::OutOfDomain {
                t,
                lower,
                upper,
                row: Some(i),
            },
            other => other,
        })?;
        for (k, v) in local.into_iter().enumerate() {
            z[(i, first + k)] = v;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook Cox-de Boor recursion with the 0/0 = 0 convention, evaluated
    /// directly on the clamped knot vector.
    fn cox_de_boor(knots: &[f64], i: usize, order: usize, t: f64, upper: f64) -> f64 {
        if order == 1 {
            let inside = knots[i] <= t && t < knots[i + 1];
            // closed at the upper boundary for the last nonempty interval
            let last = t == upper && knots[i] < knots[i + 1] && knots[i + 1] == upper;
            return if inside || last { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + order - 1] - knots[i];
        if d1 > 0.0 {
            v += (t - knots[i]) / d1 * cox_de_boor(knots, i, order - 1, t, upper);
        }
        let d2 = knots[i + order] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + order] - t) / d2 * cox_de_boor(knots, i + 1, order - 1, t, upper);
        }
        v
    }

    fn cubic_three_knots() -> SplineBasis {
        SplineBasis::new(4, KnotPartition::new(0.0, 1.0, vec![0.25, 0.5, 0.75]).unwrap()).unwrap()
    }

    #[test]
    fn quantile_partition_no_interior() {
        let p = make_quantile_partition(&[0.0, 0.5, 1.0], 0).unwrap();
        assert_eq!(p.lower(), 0.0);
        assert_eq!(p.upper(), 1.0);
        assert!(p.interior().is_empty());
    }

    #[test]
    fn quantile_partition_matches_sorting_oracle() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        // reversed input must not matter
        let rev: Vec<f64> = t.iter().rev().copied().collect();
        let p = make_quantile_partition(&rev, 3).unwrap();
        // sorting oracle: position (n-1)k/4 = 24.75, 49.5, 74.25 on the grid i/99
        let expected = [24.75 / 99.0, 49.5 / 99.0, 74.25 / 99.0];
        for (k, e) in p.interior().iter().zip(expected) {
            assert!((k - e).abs() < 1e-14, "{k} vs {e}");
        }
        assert!((p.interior()[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tied_quantiles_collapse() {
        let mut t = vec![0.5; 50];
        t.extend([0.0, 0.1, 0.9, 1.0]);
        let p = make_quantile_partition(&t, 3).unwrap();
        assert_eq!(p.interior(), &[0.5]);
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(
            make_quantile_partition(&[], 0),
            Err(PlmError::InvalidPartition(_))
        ));
        assert!(matches!(
            make_quantile_partition(&[1.0, 2.0, 2.0], 2),
            Err(PlmError::InvalidPartition(_))
        ));
        assert!(make_quantile_partition(&[1.0, 1.0], 0).is_err());
        assert!(KnotPartition::new(0.0, 1.0, vec![0.5, 0.5]).is_err());
        assert!(KnotPartition::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(KnotPartition::new(1.0, 1.0, vec![]).is_err());
    }

    #[test]
    fn piecewise_constant_single_interval() {
        let b = SplineBasis::new(1, KnotPartition::new(-2.0, 3.0, vec![]).unwrap()).unwrap();
        for t in [-2.0, 0.0, 1.7, 3.0] {
            assert_eq!(b.evaluate(t).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn endpoints_interpolate() {
        let b = cubic_three_knots();
        assert_eq!(b.evaluate(0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.evaluate(1.0).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn interior_values_match_frozen_reference() {
        // reference values from an independent divided-difference evaluation
        let b = cubic_three_knots();
        let cases: [(f64, [f64; 7]); 3] = [
            (0.3, [0.0, 0.128, 0.588, 0.282_666_666_666_666_7, 0.0013333333333333324, 0.0, 0.0]),
            (0.6, [0.0, 0.0, 0.036, 0.5386666666666667, 0.4093333333333333, 0.016, 0.0]),
            (0.9, [0.0, 0.0, 0.0, 0.01066666666666666, 0.18133333333333326, 0.592, 0.216]),
        ];
        for (t, expected) in cases {
            let got = b.evaluate(t).unwrap();
            for (g, e) in got.iter().zip(expected) {
                assert!((g - e).abs() < 1e-14, "t={t}: {got:?}");
            }
        }
        let quad = SplineBasis::new(3, KnotPartition::new(-1.0, 2.0, vec![0.2, 1.1]).unwrap()).unwrap();
        let got = quad.evaluate(1.5).unwrap();
        let expected = [0.0, 0.0, 0.15432098765432098, 0.6481481481481481, 0.1975308641975308];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_recursive_definition() {
        let b = SplineBasis::new(4, KnotPartition::new(-1.0, 2.0, vec![-0.4, 0.1, 0.2, 1.3]).unwrap()).unwrap();
        for i in 0..=300 {
            let t = -1.0 + 3.0 * i as f64 / 300.0;
            let got = b.evaluate(t).unwrap();
            for (w, g) in got.iter().enumerate() {
                let oracle = cox_de_boor(b.knots(), w, 4, t, 2.0);
                assert!((g - oracle).abs() < 1e-13, "t={t} w={w}: {g} vs {oracle}");
            }
        }
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let b = cubic_three_knots();
        assert!(matches!(b.evaluate(1.0 + 1e-12), Err(PlmError::OutOfDomain { .. })));
        assert!(b.evaluate(-0.1).is_err());
        match basis_matrix(&b, &[0.2, 0.4, 7.0]) {
            Err(PlmError::OutOfDomain { row, .. }) => assert_eq!(row, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn basis_matrix_shape_and_rows() {
        let b = cubic_three_knots();
        let t: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let z = basis_matrix(&b, &t).unwrap();
        assert_eq!(z.shape(), (100, 7));
        for i in 0..100 {
            assert!((z.row(i).sum() - 1.0).abs() < 1e-12);
        }
        let single = basis_matrix(&b, &[0.42]).unwrap();
        assert_eq!(single.row(0).iter().copied().collect::<Vec<_>>(), b.evaluate(0.42).unwrap());
    }

    #[test]
    fn dimension_is_knots_plus_order() {
        for m in 1..6 {
            for count in 0..5 {
                let b = SplineBasis::new(m, KnotPartition::uniform(0.0, 1.0, count).unwrap()).unwrap();
                assert_eq!(b.dimension(), count + m);
                assert_eq!(b.knots().len(), count + 2 * m);
            }
        }
    }
}
