//! SCAD and LASSO penalties.

use serde::{Deserialize, Serialize};

use crate::error::{PlmError, Result};

/// Conventional SCAD shape parameter.
pub const DEFAULT_SCAD_A: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    Scad,
    Lasso,
    None,
}

impl std::str::FromStr for PenaltyFamily {
    type Err = PlmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scad" => Ok(Self::Scad),
            "lasso" => Ok(Self::Lasso),
            "none" => Ok(Self::None),
            other => Err(PlmError::Config(format!("unknown penalty family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub a: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, a: f64) -> Result<Self> {
        let lambda = if family == PenaltyFamily::None { 0.0 } else { lambda };
        let spec = Self { family, lambda, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Scad, lambda, a)
    }

    pub fn lasso(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Lasso, lambda, DEFAULT_SCAD_A)
    }

    pub fn none() -> Self {
        Self {
            family: PenaltyFamily::None,
            lambda: 0.0,
            a: DEFAULT_SCAD_A,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(PlmError::Config(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.family == PenaltyFamily::Scad && !(self.a > 2.0 && self.a.is_finite()) {
            return Err(PlmError::Config(format!(
                "SCAD shape a must exceed 2, got {}",
                self.a
            )));
        }
        Ok(())
    }

    fn effective_lambda(&self) -> f64 {
        match self.family {
            PenaltyFamily::None => 0.0,
            _ => self.lambda,
        }
    }

    /// `p_λ(θ; a)`.
    pub fn value(&self, theta: f64) -> f64 {
        let lambda = self.effective_lambda();
        let t = theta.abs();
        match self.family {
            PenaltyFamily::None => 0.0,
            PenaltyFamily::Lasso => lambda * t,
            PenaltyFamily::Scad => {
                let a = self.a;
                if t <= lambda {
                    lambda * t
                } else if t <= a * lambda {
                    -(t * t - 2.0 * a * lambda * t + lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * lambda * lambda / 2.0
                }
            }
        }
    }

    /// `p'_λ(θ)` for `θ > 0`. The penalty is singular at zero.
    pub fn derivative(&self, theta: f64) -> Result<f64> {
        self.validate()?;
        if !(theta > 0.0) {
            return Err(PlmError::Domain(format!(
                "penalty derivative requested at θ = {theta}; only θ > 0 is defined"
            )));
        }
        Ok(self.slope(theta))
    }

    /// Derivative at `|θ|`, using the right limit at zero.
    pub(crate) fn slope(&self, magnitude: f64) -> f64 {
        let lambda = self.effective_lambda();
        match self.family {
            PenaltyFamily::None => 0.0,
            PenaltyFamily::Lasso => lambda,
            PenaltyFamily::Scad => {
                let a = self.a;
                if magnitude <= lambda {
                    lambda
                } else if magnitude <= a * lambda {
                    (a * lambda - magnitude) / (a - 1.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// `Σ_j p_λ(b_j)`.
    pub fn total(&self, coefficients: impl IntoIterator<Item = f64>) -> f64 {
        coefficients.into_iter().map(|b| self.value(b)).sum()
    }
}
