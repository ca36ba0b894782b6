//! Benchmark problem instances with oracles.
//!
//! Three families ship with the crate:
//! - a chain-quadratic inner objective with an ℓ1 outer pull toward a distant
//!   anchor, the classic worst-case instance for first-order methods
//!   ([`make_nemirovsky`]);
//! - a least-squares inner problem with a minimum-norm outer selection, whose
//!   bilevel solution is computable by a pseudoinverse ([`make_min_norm_toy`]);
//! - ℓ1-regularized selection among overparametrized logistic regression
//!   classifiers on polynomially lifted features ([`make_logistic_lifted`]).
//!
//! Each constructor returns a [`BilevelProblem`](crate::core::BilevelProblem)
//! with as much oracle data as the instance admits: exact solutions and growth
//! certificates where closed forms exist, reference values otherwise.

mod dataset;
mod logistic;
mod min_norm;
mod nemirovsky;

pub use dataset::{bundled_train_path, load_dataset_csv, make_synthetic_dataset, Dataset};
pub use logistic::{
    lifted_dimension, make_logistic_lifted, reference_min_inner, with_reference_oracle,
    LogisticLiftSpec,
};
pub use min_norm::{make_min_norm_toy, min_norm_from_matrix};
pub use nemirovsky::{make_nemirovsky, nemirovsky_lipschitz, NemirovskySpec};

use thiserror::Error;

/// Errors from problem construction and dataset handling.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("matrix is (numerically) rank deficient")]
    RankDeficient,
    #[error("lifted dimension {got} exceeds the configured cap {cap}")]
    DimensionOverflow { got: usize, cap: usize },
    #[error("invalid problem specification: {0}")]
    BadSpec(String),
    #[error("dataset has {got} rows, need {needed}")]
    DatasetTooSmall { needed: usize, got: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("label at line {line} is not 0 or 1")]
    NonBinaryLabel { line: usize },
    #[error(transparent)]
    Core(#[from] crate::core::CoreError),
}
