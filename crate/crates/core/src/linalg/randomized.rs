use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{full_sym_eig, select_rank, TruncatedEig};
use crate::{Error, Result};

/// Block sizes and sketch settings for [`randomized_truncated_eig`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedEigParams {
    /// Initial number of target directions; doubled until the threshold is crossed.
    pub block0: usize,
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for RandomizedEigParams {
    fn default() -> Self {
        Self {
            block0: 16,
            oversample: 10,
            power_iters: 2,
            seed: 0,
        }
    }
}

/// Truncated eigendecomposition of a PSD operator given only its block action
/// `V ↦ A V`, by a randomized range finder with subspace iteration followed by
/// Rayleigh–Ritz.
///
/// The sketch width grows as `block + oversample` with `block` doubling until
/// the (k+1)-th Ritz value is at or below `threshold`. Once the sketch spans the
/// whole space the dense matrix, when supplied, is decomposed directly.
pub fn randomized_truncated_eig<F>(
    mut op: F,
    dim: usize,
    threshold: f64,
    params: &RandomizedEigParams,
    dense: Option<&DMatrix<f64>>,
) -> Result<TruncatedEig>
where
    F: FnMut(&DMatrix<f64>) -> DMatrix<f64>,
{
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::validation(format!(
            "rank threshold must be positive and finite, got {threshold}"
        )));
    }
    if dim == 0 {
        return Ok(TruncatedEig::empty(0));
    }
    let mut apply = |v: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let out = op(v);
        if out.shape() != v.shape() {
            return Err(Error::validation(format!(
                "operator returned a {:?} block for a {:?} input",
                out.shape(),
                v.shape()
            )));
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("Hessian-vector product returned non-finite values"));
        }
        Ok(out)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut block = params.block0.max(1);
    loop {
        let width = (block + params.oversample).min(dim);
        if width == dim {
            if let Some(a) = dense {
                let full = full_sym_eig(a)?;
                let k = select_rank(&clipped(&full.eigvals), threshold)?;
                return TruncatedEig::from_sym_eig(&full, k);
            }
        }

        let omega = DMatrix::from_fn(dim, width, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut q = orthonormal_basis(apply(&omega)?);
        for _ in 0..params.power_iters {
            q = orthonormal_basis(apply(&q)?);
        }
        let aq = apply(&q)?;
        let mut small = q.tr_mul(&aq);
        let s = small.clone();
        small += s.transpose();
        small *= 0.5;
        let ritz = full_sym_eig(&small)?;
        let ritz_vals = clipped(&ritz.eigvals);
        let k = select_rank(&ritz_vals, threshold)?;

        if k < width || width == dim {
            let basis = &q * ritz.eigvecs.columns(0, k);
            // k == width only happens here when the sketch is full width, i.e. k == dim.
            let next = if k < width { ritz_vals[k] } else { 0.0 };
            return TruncatedEig::new(basis, ritz_vals[..k].to_vec(), next);
        }
        block *= 2;
    }
}

fn clipped(vals: &[f64]) -> Vec<f64> {
    vals.iter().map(|&v| v.max(0.0)).collect()
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn dense_op(a: &DMatrix<f64>) -> impl FnMut(&DMatrix<f64>) -> DMatrix<f64> + '_ {
        move |v| a * v
    }

    #[test]
    fn diagonal_operator() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1.0, 0.01, 0.001]));
        let f = randomized_truncated_eig(dense_op(&a), 4, 0.05, &RandomizedEigParams::default(), None).unwrap();
        assert_eq!(f.rank(), 2);
        assert!((f.eigvals()[0] - 5.0).abs() < 1e-6);
        assert!((f.eigvals()[1] - 1.0).abs() < 1e-6);
        assert!((f.next_eig() - 0.01).abs() < 1e-6);
    }

    #[test]
    fn zero_operator() {
        let a = DMatrix::zeros(30, 30);
        let f = randomized_truncated_eig(dense_op(&a), 30, 1e-3, &RandomizedEigParams::default(), None).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.next_eig(), 0.0);
    }

    #[test]
    fn non_finite_operator_is_rejected() {
        let op = |v: &DMatrix<f64>| v.map(|_| f64::NAN);
        let err = randomized_truncated_eig(op, 40, 0.1, &RandomizedEigParams::default(), None).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DMatrix::from_fn(60, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = &b * b.transpose();
        let params = RandomizedEigParams {
            seed: 9,
            ..Default::default()
        };
        let f1 = randomized_truncated_eig(dense_op(&a), 60, 1e-2, &params, None).unwrap();
        let f2 = randomized_truncated_eig(dense_op(&a), 60, 1e-2, &params, None).unwrap();
        assert_eq!(f1.eigvals(), f2.eigvals());
        assert_eq!(f1.basis(), f2.basis());
    }

    #[test]
    fn full_width_without_dense_matrix_reports_all_pairs() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 3.0, 2.0]));
        let f = randomized_truncated_eig(dense_op(&a), 3, 0.5, &RandomizedEigParams::default(), None).unwrap();
        assert_eq!(f.rank(), 3);
        assert_eq!(f.next_eig(), 0.0);
    }
}
