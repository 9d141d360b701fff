//! Symmetric eigendecompositions and the regularized truncated inverse.

mod jacobi;
mod randomized;
mod truncated;

pub use jacobi::{full_sym_eig, SymEigPair};
pub use randomized::{randomized_truncated_eig, RandomizedEigParams};
pub use truncated::{select_rank, truncation_epsilon, TruncatedEig, TruncatedInverse};

use nalgebra::DMatrix;

/// Largest absolute entry of `UᵀU - I`.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let gram = u.transpose() * u;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}
