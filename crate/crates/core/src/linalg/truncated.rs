use nalgebra::{DMatrix, DVector};

use super::SymEigPair;
use crate::{Error, Result};

/// Smallest `k` such that the (k+1)-th eigenvalue is at or below `threshold`,
/// or `p` when every eigenvalue exceeds it.
///
/// `eigvals` must be sorted non-increasing; `threshold` must be positive.
pub fn select_rank(eigvals: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::validation(format!(
            "rank threshold must be positive and finite, got {threshold}"
        )));
    }
    if eigvals.windows(2).any(|w| !(w[0] >= w[1])) {
        return Err(Error::validation("eigenvalues must be sorted non-increasing"));
    }
    Ok(eigvals.iter().position(|&mu| mu <= threshold).unwrap_or(eigvals.len()))
}

/// Leading `k` eigenpairs of a PSD operator plus an estimate of the first
/// discarded eigenvalue.
#[derive(Debug, Clone)]
pub struct TruncatedEig {
    basis: DMatrix<f64>,
    eigvals: Vec<f64>,
    next_eig: f64,
}

impl TruncatedEig {
    /// Validates and assembles the factors. `basis` is `p x k`.
    pub fn new(basis: DMatrix<f64>, eigvals: Vec<f64>, next_eig: f64) -> Result<Self> {
        let (p, k) = basis.shape();
        if eigvals.len() != k {
            return Err(Error::validation(format!(
                "basis has {k} columns but {} eigenvalues were given",
                eigvals.len()
            )));
        }
        if k > p {
            return Err(Error::validation(format!("rank {k} exceeds dimension {p}")));
        }
        if eigvals.iter().chain(std::iter::once(&next_eig)).any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite eigenvalue in truncated factors"));
        }
        if eigvals.iter().any(|&s| s < 0.0) || next_eig < 0.0 {
            return Err(Error::validation("truncated eigenvalues must be non-negative"));
        }
        if eigvals.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::validation("truncated eigenvalues must be non-increasing"));
        }
        if let Some(&last) = eigvals.last() {
            if next_eig > last * (1.0 + 1e-12) {
                return Err(Error::validation(format!(
                    "next eigenvalue {next_eig} exceeds the smallest kept one {last}"
                )));
            }
        }
        if k == p && next_eig != 0.0 {
            return Err(Error::validation("full-rank factors carry no next eigenvalue"));
        }
        if k > 0 && super::orthonormality_defect(&basis) > 1e-8 {
            return Err(Error::numeric("truncated basis is not orthonormal"));
        }
        Ok(Self {
            basis,
            eigvals,
            next_eig,
        })
    }

    /// Keeps the leading `k` pairs of a full decomposition. Round-off negatives
    /// of a PSD spectrum are clipped to zero.
    pub fn from_sym_eig(full: &SymEigPair, k: usize) -> Result<Self> {
        let p = full.dim();
        if k > p {
            return Err(Error::validation(format!("rank {k} exceeds dimension {p}")));
        }
        let basis = full.eigvecs.columns(0, k).into_owned();
        let eigvals = full.eigvals[..k].iter().map(|&s| s.max(0.0)).collect();
        let next_eig = if k < p { full.eigvals[k].max(0.0) } else { 0.0 };
        Self::new(basis, eigvals, next_eig)
    }

    /// Zero-rank factors for a `p`-dimensional operator.
    pub fn empty(p: usize) -> Self {
        Self {
            basis: DMatrix::zeros(p, 0),
            eigvals: Vec::new(),
            next_eig: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn next_eig(&self) -> f64 {
        self.next_eig
    }
}

/// `ε = μ_{k+1} / r`: the relative error of the truncated step against the
/// exact one.
pub fn truncation_epsilon(factors: &TruncatedEig, regularizer: f64) -> Result<f64> {
    if !(regularizer > 0.0) || !regularizer.is_finite() {
        return Err(Error::validation(format!(
            "regularizer must be positive, got {regularizer}"
        )));
    }
    Ok(factors.next_eig() / regularizer)
}

/// The operator `(U_k Σ_k U_kᵀ + r I)⁻¹`, applied through its closed form
/// `U_k [(Σ_k + rI)⁻¹ - r⁻¹I] U_kᵀ + r⁻¹I` without materializing a `p x p`
/// matrix.
#[derive(Debug, Clone)]
pub struct TruncatedInverse {
    factors: TruncatedEig,
    regularizer: f64,
}

impl TruncatedInverse {
    pub fn new(factors: TruncatedEig, regularizer: f64) -> Result<Self> {
        if !(regularizer > 0.0) || !regularizer.is_finite() {
            return Err(Error::validation(format!(
                "regularizer must be positive, got {regularizer}"
            )));
        }
        Ok(Self { factors, regularizer })
    }

    pub fn factors(&self) -> &TruncatedEig {
        &self.factors
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    pub fn epsilon(&self) -> f64 {
        self.factors.next_eig() / self.regularizer
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.factors.dim() {
            return Err(Error::validation(format!(
                "vector has length {}, operator dimension is {}",
                v.len(),
                self.factors.dim()
            )));
        }
        Ok(())
    }

    /// `Ĥ⁻¹ g` in `O(p k)`.
    pub fn apply(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(g)?;
        let r = self.regularizer;
        let u = &self.factors.basis;
        let mut coeffs = u.tr_mul(g);
        for (c, &s) in coeffs.iter_mut().zip(&self.factors.eigvals) {
            *c *= 1.0 / (s + r) - 1.0 / r;
        }
        let mut out = g / r;
        out.gemv(1.0, u, &coeffs, 1.0);
        Ok(out)
    }

    /// `Ĥ x = U_k Σ_k U_kᵀ x + r x`.
    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let u = &self.factors.basis;
        let mut coeffs = u.tr_mul(x);
        for (c, &s) in coeffs.iter_mut().zip(&self.factors.eigvals) {
            *c *= s;
        }
        let mut out = x * self.regularizer;
        out.gemv(1.0, u, &coeffs, 1.0);
        Ok(out)
    }
}
