#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! k-truncated adaptive Newton (k-TAN) for regularized empirical risk minimization.
//!
//! The solver walks a nested sequence of sample prefixes `m0 < m1 < ... < N`,
//! taking a single Newton-type step per prefix. Each step inverts a rank-k
//! truncation of the data Hessian plus the ridge term `c * V_n * I`, which
//! costs `O(p k)` per application instead of a dense `O(p^3)` factorization.
//!
//! Crate layout:
//!
//! - [`linalg`]: dense and randomized symmetric eigensolvers, rank selection
//!   and the closed-form truncated inverse.
//! - [`risk`]: sample storage and the regularized logistic risk with its
//!   gradient, Hessian and Hessian-vector product.
//! - [`solver`]: the adaptive sample size loop, the Newton decrement and
//!   evaluators for the convergence certificates.
//! - [`baselines`]: GD, SGD, SAGA, AdaNewton and the damped Newton oracle.
//! - [`data`]: libsvm I/O, synthetic generation, normalization, permutation.

pub mod baselines;
pub mod data;
mod error;
pub mod linalg;
pub mod risk;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
