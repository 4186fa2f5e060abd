//! Hermitian eigendecomposition: the single spectral primitive everything
//! else (entropies, fidelities, square roots, null spaces) is built on.
//!
//! Cyclic complex Jacobi: quadratically convergent, unconditionally stable,
//! and accurate to near machine precision at the matrix sizes this crate
//! works with (a few hundred at most).

use alloc::string::ToString;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::dense::DenseOperator;
use crate::error::{CoreError, Result};
use crate::mat::Mat;

/// Eigendecomposition A = V diag(values) V† with `values` ascending and the
/// columns of `vectors` the corresponding orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenH {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

const MAX_SWEEPS: usize = 64;
const OFF_DIAG_STOP: f64 = 1e-14;

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized first; `herm_tol` bounds how non-Hermitian the
/// input may be before that symmetrization is considered an error.
pub fn eigh(m: &Mat, herm_tol: f64) -> Result<EigenH> {
    if !m.is_square() {
        return Err(CoreError::DimensionMismatch {
            context: "eigendecomposition of a non-square matrix".to_string(),
        });
    }
    let dev = m.hermiticity_deviation();
    let scale = m.max_abs().max(1.0);
    if dev > herm_tol * scale {
        return Err(CoreError::NotHermitian { deviation: dev });
    }
    let n = m.nrows;
    let mut a = m.hermitized();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return Ok(EigenH {
            values: a.a.first().map(|z| z.re).into_iter().collect(),
            vectors: v,
        });
    }

    let norm = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..MAX_SWEEPS {
        let mut off2 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off2 += a.at(p, q).norm_sqr();
            }
        }
        if libm::sqrt(2.0 * off2) <= OFF_DIAG_STOP * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.at(p, q);
                let b = apq.norm();
                if b <= OFF_DIAG_STOP * norm / (n as f64) {
                    continue;
                }
                let app = a.at(p, p).re;
                let aqq = a.at(q, q).re;
                // Unitary 2x2 rotation zeroing a_pq: angle from
                // tan(2θ) = 2|a_pq| / (a_pp - a_qq), phase from arg(a_pq).
                let theta = 0.5 * libm::atan2(2.0 * b, app - aqq);
                let c = libm::cos(theta);
                let s = libm::sin(theta);
                let phase = apq / Complex64::new(b, 0.0);
                let se_m = phase.conj() * Complex64::new(s, 0.0); // s·e^{-iφ}
                let se_p = phase * Complex64::new(s, 0.0); // s·e^{+iφ}

                // Column update A ← A·R.
                for i in 0..n {
                    let aip = a.at(i, p);
                    let aiq = a.at(i, q);
                    a[(i, p)] = aip * c + aiq * se_m;
                    a[(i, q)] = -aip * se_p + aiq * c;
                }
                // Row update A ← R†·A.
                for j in 0..n {
                    let apj = a.at(p, j);
                    let aqj = a.at(q, j);
                    a[(p, j)] = apj * c + aqj * se_p;
                    a[(q, j)] = -apj * se_m + aqj * c;
                }
                // Keep the block exactly Hermitian against drift.
                a[(q, p)] = a.at(p, q).conj();
                let child = a.at(p, p).re;
                a[(p, p)] = Complex64::new(child, 0.0);
                let child = a.at(q, q).re;
                a[(q, q)] = Complex64::new(child, 0.0);

                // Accumulate V ← V·R.
                for i in 0..n {
                    let vip = v.at(i, p);
                    let viq = v.at(i, q);
                    v[(i, p)] = vip * c + viq * se_m;
                    v[(i, q)] = -vip * se_p + viq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.at(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, newc)] = v.at(r, oldc);
        }
    }
    Ok(EigenH { values, vectors })
}

/// Eigendecomposition of a labeled operator. The vectors are returned as a
/// plain matrix over the operator's flattened basis.
pub fn eigh_op(op: &DenseOperator, herm_tol: f64) -> Result<EigenH> {
    eigh(op.mat(), herm_tol)
}

/// Applies a real function to the spectrum: f(A) = V f(Λ) V†.
pub fn spectral_map(m: &Mat, herm_tol: f64, f: impl Fn(f64) -> f64) -> Result<Mat> {
    let eig = eigh(m, herm_tol)?;
    let n = m.nrows;
    let mut scaled = Mat::zeros(n, n);
    for c in 0..n {
        let fv = Complex64::new(f(eig.values[c]), 0.0);
        for r in 0..n {
            scaled[(r, c)] = eig.vectors.at(r, c) * fv;
        }
    }
    Ok(scaled.mul(&eig.vectors.adjoint()))
}

/// Square root of a positive semidefinite matrix. Eigenvalues in
/// (-neg_tol, 0) are clipped to zero; anything below -neg_tol errors.
pub fn sqrt_psd(m: &Mat, neg_tol: f64) -> Result<Mat> {
    let eig = eigh(m, neg_tol)?;
    if let Some(min) = eig.values.first() {
        if *min < -neg_tol {
            return Err(CoreError::NotPositive {
                min_eigenvalue: *min,
            });
        }
    }
    spectral_map(m, neg_tol, |x| libm::sqrt(x.max(0.0)))
}

/// Orthonormal basis (as matrix columns) of the null space of M, computed as
/// the span of eigenvectors of M†M with eigenvalue ≤ tol².
pub fn null_space(m: &Mat, tol: f64) -> Result<Mat> {
    let gram = m.adjoint().mul(m);
    let eig = eigh(&gram, 1e-9)?;
    let cutoff = tol * tol * gram.max_abs().max(1.0);
    let cols: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i] <= cutoff)
        .collect();
    let mut out = Mat::zeros(m.ncols, cols.len());
    for (j, &c) in cols.iter().enumerate() {
        for r in 0..m.ncols {
            out[(r, j)] = eig.vectors.at(r, c);
        }
    }
    Ok(out)
}

/// Solves A x = b by Gaussian elimination with partial pivoting. A must be
/// square and nonsingular at working precision.
pub fn linear_solve(a: &Mat, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if !a.is_square() || a.nrows != b.len() {
        return Err(CoreError::DimensionMismatch {
            context: "linear solve needs a square matrix and a matching vector".to_string(),
        });
    }
    let n = a.nrows;
    let mut m = a.clone();
    let mut x: Vec<Complex64> = b.to_vec();
    for k in 0..n {
        let mut piv = k;
        for r in (k + 1)..n {
            if m[(r, k)].norm() > m[(piv, k)].norm() {
                piv = r;
            }
        }
        if m[(piv, k)].norm() < 1e-300 {
            return Err(CoreError::InvalidParameter {
                detail: "linear solve hit a singular pivot".to_string(),
            });
        }
        if piv != k {
            for c in 0..n {
                let t = m[(k, c)];
                m[(k, c)] = m[(piv, c)];
                m[(piv, c)] = t;
            }
            x.swap(k, piv);
        }
        for r in (k + 1)..n {
            let f = m[(r, k)] / m[(k, k)];
            if f.norm() == 0.0 {
                continue;
            }
            for c in k..n {
                let v = m[(k, c)];
                m[(r, c)] -= f * v;
            }
            let xk = x[k];
            x[r] -= f * xk;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in (k + 1)..n {
            s -= m[(k, c)] * x[c];
        }
        x[k] = s / m[(k, k)];
    }
    Ok(x)
}

/// Groups ascending eigenvalues into clusters with gaps larger than `gap`.
/// Returns the (start, end) index ranges of each cluster.
pub fn cluster_eigenvalues(values: &[f64], gap: f64) -> Vec<(usize, usize)> {
    let mut clusters = Vec::new();
    if values.is_empty() {
        return clusters;
    }
    let mut start = 0usize;
    for i in 1..values.len() {
        if values[i] - values[i - 1] > gap {
            clusters.push((start, i));
            start = i;
        }
    }
    clusters.push((start, values.len()));
    clusters
}

/// Largest eigenvalue magnitude of a Hermitian matrix.
pub fn spectral_radius_hermitian(m: &Mat, herm_tol: f64) -> Result<f64> {
    let eig = eigh(m, herm_tol)?;
    Ok(eig
        .values
        .iter()
        .map(|v| libm::fabs(*v))
        .fold(0.0, f64::max))
}
