//! Preconditioned Anderson acceleration for nonlinear fixed-point problems.
//!
//! The solver combines a short window of residual history with a pluggable
//! left preconditioner that may be rebuilt every iteration, every few
//! iterations, or once per solve. The crate also ships a small dense linear
//! algebra layer, a benchmark problem suite, an experiment harness with CSV
//! output, and independent reference oracles for end-to-end verification.

// indexed loops over multiple vectors in lockstep are the clearer form in the
// dense kernels, and negated comparisons are deliberate NaN-rejecting guards
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod matrix;
pub mod precond;
pub mod problem;
pub mod solver;
pub mod suite;
pub mod verify;

pub use error::{Error, Result};
pub use harness::{ExperimentSpec, GuessSpec, LabeledConfig, RunRecord};
pub use matrix::DenseMatrix;
pub use precond::PreconditionerKind;
pub use problem::{InitialGuessBox, NonlinearProblem};
pub use solver::{paa_solve, SolveReport, SolveStatus, SolverConfig};
