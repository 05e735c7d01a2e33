//! Sparse partially linear models `Y = X'β + g(T) + ε`.
//!
//! The nonparametric component `g` is approximated in a clamped B-spline space
//! built on quantile knots of `T`. Profiling out the spline coefficients leaves a
//! penalized least-squares problem in `β`, which is solved with a perturbed
//! local-quadratic (minorize-maximize) iteration under the SCAD penalty. The
//! penalty level is chosen by generalized cross validation and standard errors
//! come from a sandwich formula.
//!
//! Module map:
//!
//! * [`spline`]: knot partitions and B-spline evaluation.
//! * [`projection`]: residualization against the spline column space.
//! * [`penalty`]: SCAD and LASSO penalties.
//! * [`optimizer`]: the MM solver for a fixed penalty level.
//! * [`plm`]: the full estimator pipeline.
//! * [`simulation`]: the seeded Monte Carlo study and its comparison estimators.
//! * [`cli`]: command-line entry points and report formats.

// Validation is written as `!(x > bound)` on purpose: NaN must fail it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod exec;
pub mod optimizer;
pub mod penalty;
pub mod plm;
pub mod projection;
pub mod simulation;
pub mod spline;

pub use error::{PlmError, Result};
pub use exec::Execution;
pub use optimizer::{objective_value, solve_penalized, SolveResult, SolverOptions};
pub use penalty::{PenaltyFamily, PenaltySpec};
pub use plm::{fit_plm, predict_g, Dataset, FitConfig, LambdaGrid, PLMFit};
pub use projection::ProjectionContext;
pub use spline::{basis_matrix, make_quantile_partition, KnotPartition, SplineBasis};
