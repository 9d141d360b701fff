use nalgebra::DMatrix;

use crate::{Error, Result};

/// Full eigendecomposition `A = U diag(μ) Uᵀ` of a symmetric matrix, with
/// eigenvalues sorted non-increasing and `U` orthogonal.
#[derive(Debug, Clone)]
pub struct SymEigPair {
    pub eigvecs: DMatrix<f64>,
    pub eigvals: Vec<f64>,
}

impl SymEigPair {
    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut scaled = self.eigvecs.clone();
        for j in 0..p {
            scaled.column_mut(j).scale_mut(self.eigvals[j]);
        }
        scaled * self.eigvecs.transpose()
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for dense symmetric matrices.
///
/// Deterministic for a fixed input. Eigenvector signs are fixed so the entry
/// of largest magnitude in each column is positive.
pub fn full_sym_eig(a: &DMatrix<f64>) -> Result<SymEigPair> {
    let p = a.nrows();
    if p == 0 || a.ncols() != p {
        return Err(Error::validation(format!(
            "expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    for j in 0..p {
        for i in (j + 1)..p {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 {
                return Err(Error::validation(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    a[(i, j)],
                    a[(j, i)]
                )));
            }
        }
    }

    // Row-major working copies; `m` stays symmetric throughout.
    let mut m = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            m[i * p + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    // v holds Uᵀ row-major, i.e. row r of v is eigenvector r.
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }

    let fro: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += m[i * p + j] * m[i * p + j];
            }
        }
        if off == 0.0 || off.sqrt() <= 1e-15 * fro {
            break;
        }
        for ip in 0..p {
            for iq in (ip + 1)..p {
                let apq = m[ip * p + iq];
                if apq == 0.0 {
                    continue;
                }
                let app = m[ip * p + ip];
                let aqq = m[iq * p + iq];
                // Past the first few sweeps, drop entries too small to move the diagonal.
                if sweep > 3 && app + 100.0 * apq.abs() == app && aqq + 100.0 * apq.abs() == aqq {
                    m[ip * p + iq] = 0.0;
                    m[iq * p + ip] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..p {
                    if r == ip || r == iq {
                        continue;
                    }
                    let arp = m[r * p + ip];
                    let arq = m[r * p + iq];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    m[r * p + ip] = new_rp;
                    m[ip * p + r] = new_rp;
                    m[r * p + iq] = new_rq;
                    m[iq * p + r] = new_rq;
                }
                m[ip * p + ip] = app - t * apq;
                m[iq * p + iq] = aqq + t * apq;
                m[ip * p + iq] = 0.0;
                m[iq * p + ip] = 0.0;
                // ip < iq, so row ip lives entirely before row iq.
                let (lo, hi) = v.split_at_mut(iq * p);
                let row_p = &mut lo[ip * p..ip * p + p];
                let row_q = &mut hi[..p];
                for (vp, vq) in row_p.iter_mut().zip(row_q.iter_mut()) {
                    let a = *vp;
                    let b = *vq;
                    *vp = c * a - s * b;
                    *vq = s * a + c * b;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[j * p + j].total_cmp(&m[i * p + i]).then(i.cmp(&j)));

    let mut eigvecs = DMatrix::zeros(p, p);
    let mut eigvals = Vec::with_capacity(p);
    for (col, &src) in order.iter().enumerate() {
        eigvals.push(m[src * p + src]);
        let row = &v[src * p..src * p + p];
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (r, &x) in row.iter().enumerate() {
            eigvecs[(r, col)] = sign * x;
        }
    }
    Ok(SymEigPair { eigvecs, eigvals })
}
