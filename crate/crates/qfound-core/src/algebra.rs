//! Numerical *-algebra machinery on one finite-dimensional space: closure of
//! a generating set, commutant and center computation, central block
//! structure, and the tensor-factor split of a matrix factor.

use alloc::string::ToString;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;

use crate::error::{CoreError, Result};
use crate::mat::{inner, Mat, ZERO};
use crate::random::normal_pair;
use crate::spectral::{cluster_eigenvalues, eigh};
use crate::tol::Tol;

/// Residual-norm threshold below which a candidate adds no new direction.
const CLOSURE_RANK_EPS: f64 = 1e-8;
/// Relative eigenvalue threshold for null directions of commutation Gramians.
const NULL_EPS: f64 = 1e-10;
/// Redraws of a generic element before declaring the structure degenerate.
const GENERIC_ATTEMPTS: usize = 8;

fn frob(m: &Mat) -> f64 {
    m.frobenius_norm()
}

/// Projects `cand` off every element of the orthonormal set twice, returning
/// the normalized remainder when it carries a new direction.
fn orthogonal_remainder(basis: &[Mat], cand: &Mat) -> Option<Mat> {
    let mut rem = cand.clone();
    for _ in 0..2 {
        for b in basis {
            let c = inner(&b.a, &rem.a);
            if c.norm() > 0.0 {
                rem = rem.sub(&b.scaled(c));
            }
        }
    }
    let n = frob(&rem);
    if n > CLOSURE_RANK_EPS {
        Some(rem.scaled(Complex64::new(1.0 / n, 0.0)))
    } else {
        None
    }
}

/// Re-orthonormalizes a spanning list into an orthonormal basis of its span.
pub fn span_basis(mats: &[Mat]) -> Vec<Mat> {
    let mut basis: Vec<Mat> = Vec::new();
    for m in mats {
        if let Some(b) = orthogonal_remainder(&basis, m) {
            basis.push(b);
        }
    }
    basis
}

/// Orthonormal (Frobenius) basis of the unital *-algebra generated by `gens`
/// on a `d`-dimensional space.
pub fn algebra_closure(gens: &[Mat], d: usize) -> Result<Vec<Mat>> {
    for g in gens {
        if g.nrows != d || g.ncols != d {
            return Err(CoreError::DimensionMismatch {
                context: "algebra generator size does not match the space".to_string(),
            });
        }
    }
    let mut basis: Vec<Mat> = Vec::new();
    let mut fresh: Vec<Mat> = Vec::new();
    let mut seed: Vec<Mat> = Vec::with_capacity(2 * gens.len() + 1);
    seed.push(Mat::identity(d));
    for g in gens {
        seed.push(g.clone());
        seed.push(g.adjoint());
    }
    for cand in &seed {
        if frob(cand) < 1e-14 {
            continue;
        }
        if let Some(b) = orthogonal_remainder(&basis, cand) {
            basis.push(b.clone());
            fresh.push(b);
        }
    }
    // Worklist closure: only products touching a new element can add
    // directions; adjoints of products are covered since the seed is *-closed
    // and the span stays *-closed under re-orthonormalization of products of
    // *-closed spans.
    while !fresh.is_empty() && basis.len() < d * d {
        let batch = core::mem::take(&mut fresh);
        let snapshot = basis.clone();
        for f in &batch {
            for b in &snapshot {
                for cand in [f.mul(b), b.mul(f)] {
                    if let Some(nb) = orthogonal_remainder(&basis, &cand) {
                        basis.push(nb.clone());
                        fresh.push(nb);
                        if basis.len() >= d * d {
                            break;
                        }
                    }
                }
            }
        }
        // *-closure of the numerical span can drift; re-seed adjoints.
        let snapshot = basis.clone();
        for b in &snapshot {
            if let Some(nb) = orthogonal_remainder(&basis, &b.adjoint()) {
                basis.push(nb.clone());
                fresh.push(nb);
            }
        }
    }
    Ok(basis)
}

/// Orthonormal basis of {X : [X, B] = 0 for every B in `basis`} inside the
/// full matrix space L(C^d).
pub fn commutant_basis(basis: &[Mat], d: usize) -> Result<Vec<Mat>> {
    let n = d * d;
    // Gramian of the commutation constraints acting on vec(X): for each basis
    // element B the map X -> [X, B] has matrix K = I (x) B^T - B (x) I in
    // row-major vec convention; G = sum K^dag K.
    let mut g = Mat::zeros(n, n);
    for b in basis {
        let mut k = Mat::zeros(n, n);
        for p in 0..d {
            for q in 0..d {
                let row = p * d + q;
                for r in 0..d {
                    // (X B)[p,q] = sum_r X[p,r] B[r,q]
                    k[(row, p * d + r)] += b[(r, q)];
                    // (B X)[p,q] = sum_r B[p,r] X[r,q]
                    k[(row, r * d + q)] -= b[(p, r)];
                }
            }
        }
        g = g.add(&k.adjoint().mul(&k));
    }
    small_eig_space(&g, d)
}

/// Orthonormal basis (as coefficient combinations of `basis`) of the center
/// {X in span(basis) : [X, B] = 0 for every B in `basis`}.
pub fn center_basis(basis: &[Mat], d: usize) -> Result<Vec<Mat>> {
    let n = basis.len();
    let mut g = Mat::zeros(n, n);
    // G[j,j'] = sum_k <[A_j, A_k], [A_j', A_k]>.
    let mut comms: Vec<Mat> = Vec::with_capacity(n);
    for k in 0..n {
        for j in 0..n {
            let c = basis[j].mul(&basis[k]).sub(&basis[k].mul(&basis[j]));
            comms.push(c);
        }
        for j in 0..n {
            for jp in 0..n {
                g[(j, jp)] += inner(&comms[j].a, &comms[jp].a);
            }
        }
        comms.clear();
    }
    let eig = eigh(&g, 1e-9)?;
    let scale = eig.values.last().copied().unwrap_or(0.0).max(1.0);
    let mut out = Vec::new();
    for (i, &v) in eig.values.iter().enumerate() {
        if v <= NULL_EPS * scale {
            let mut el = Mat::zeros(d, d);
            for j in 0..n {
                el = el.add(&basis[j].scaled(eig.vectors[(j, i)]));
            }
            out.push(el);
        }
    }
    Ok(out)
}

/// Near-null eigenvectors of a PSD Gramian on vec(X), unvectorized to d x d.
fn small_eig_space(g: &Mat, d: usize) -> Result<Vec<Mat>> {
    let eig = eigh(g, 1e-9)?;
    let scale = eig.values.last().copied().unwrap_or(0.0).max(1.0);
    let mut out = Vec::new();
    for (i, &v) in eig.values.iter().enumerate() {
        if v <= NULL_EPS * scale {
            let mut m = Mat::zeros(d, d);
            for p in 0..d {
                for q in 0..d {
                    m[(p, q)] = eig.vectors[(p * d + q, i)];
                }
            }
            out.push(m);
        }
    }
    Ok(out)
}

/// Random Hermitian element of the span of `basis` (the span must be
/// *-closed for the result to stay inside it).
pub fn random_hermitian_in(basis: &[Mat], d: usize, rng: &mut ChaCha12Rng) -> Mat {
    let mut m = Mat::zeros(d, d);
    for b in basis {
        let (g1, g2) = normal_pair(rng);
        let h1 = b.add(&b.adjoint()).scaled(Complex64::new(0.5 * g1, 0.0));
        let h2 = b.sub(&b.adjoint()).scaled(Complex64::new(0.0, -0.5 * g2));
        m = m.add(&h1).add(&h2);
    }
    m.hermitized()
}

fn random_element_in(basis: &[Mat], d: usize, rng: &mut ChaCha12Rng) -> Mat {
    let mut m = Mat::zeros(d, d);
    for b in basis {
        let (g1, g2) = normal_pair(rng);
        m = m.add(&b.scaled(Complex64::new(g1, g2)));
    }
    m
}

/// One central block: an isometry whose columns span an invariant subspace.
#[derive(Debug, Clone)]
pub struct CentralBlock {
    /// d x m matrix with orthonormal columns spanning the block subspace.
    pub isometry: Mat,
}

/// Splits the space into the central blocks of a *-algebra. The number of
/// blocks must equal the center dimension; eigenvalue clustering of a generic
/// central element is retried until the counts agree.
pub fn central_blocks(
    center: &[Mat],
    d: usize,
    tol: &Tol,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<CentralBlock>> {
    let want = center.len();
    if want <= 1 {
        return Ok(alloc::vec![CentralBlock {
            isometry: Mat::identity(d),
        }]);
    }
    for _ in 0..GENERIC_ATTEMPTS {
        let z = random_hermitian_in(center, d, rng);
        let eig = eigh(&z, 1e-9)?;
        let spread = (eig.values.last().unwrap_or(&0.0) - eig.values.first().unwrap_or(&0.0))
            .max(1.0);
        let clusters = cluster_eigenvalues(&eig.values, tol.decomposition * spread);
        if clusters.len() != want {
            continue;
        }
        let mut blocks = Vec::with_capacity(want);
        for (start, end) in clusters {
            let m = end - start;
            let mut iso = Mat::zeros(d, m);
            for (col, idx) in (start..end).enumerate() {
                for r in 0..d {
                    iso[(r, col)] = eig.vectors[(r, idx)];
                }
            }
            blocks.push(CentralBlock { isometry: iso });
        }
        return Ok(blocks);
    }
    Err(CoreError::DecompositionNumericallyDegenerate {
        detail: "central element eigenvalue clusters never matched the center dimension"
            .to_string(),
    })
}

/// Result of factoring C^m as C^left (x) C^right with a factor algebra acting
/// on the left leg alone.
#[derive(Debug, Clone)]
pub struct FactorSplit {
    pub left_dim: usize,
    pub right_dim: usize,
    /// m x m unitary; row (l*right_dim + r) expresses <l,r| in block coords.
    pub unitary: Mat,
}

/// Factors a block carrying a matrix FACTOR (trivial center): finds a basis
/// in which every algebra element is (left op) (x) identity and every
/// commutant element is identity (x) (right op).
pub fn factor_block(
    algebra: &[Mat],
    m: usize,
    tol: &Tol,
    rng: &mut ChaCha12Rng,
) -> Result<FactorSplit> {
    let n_a = algebra.len();
    let d_l = int_sqrt(n_a).ok_or_else(|| CoreError::DecompositionNumericallyDegenerate {
        detail: alloc::format!("block algebra dimension {n_a} is not a perfect square"),
    })?;
    if !m.is_multiple_of(d_l) {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: alloc::format!("left dimension {d_l} does not divide block size {m}"),
        });
    }
    let d_r = m / d_l;
    if d_l == 1 || d_r == 1 {
        let split = FactorSplit {
            left_dim: d_l,
            right_dim: d_r,
            unitary: Mat::identity(m),
        };
        verify_split(&split, algebra, tol).map(|_| split)
    } else {
        let commutant = commutant_basis(algebra, m)?;
        if commutant.len() != d_r * d_r {
            return Err(CoreError::DecompositionNumericallyDegenerate {
                detail: alloc::format!(
                    "commutant dimension {} does not match expected {}",
                    commutant.len(),
                    d_r * d_r
                ),
            });
        }
        for _ in 0..GENERIC_ATTEMPTS {
            match try_factor_once(algebra, &commutant, m, d_l, d_r, tol, rng) {
                Ok(split) => return Ok(split),
                Err(_) => continue,
            }
        }
        Err(CoreError::DecompositionNumericallyDegenerate {
            detail: "no generic element produced a clean tensor split".to_string(),
        })
    }
}

fn try_factor_once(
    algebra: &[Mat],
    commutant: &[Mat],
    m: usize,
    d_l: usize,
    d_r: usize,
    tol: &Tol,
    rng: &mut ChaCha12Rng,
) -> Result<FactorSplit> {
    // Generic Hermitian a in the algebra has d_l eigenvalue clusters of equal
    // size d_r; its eigenspaces are |k> (x) C^{d_r}.
    let a = random_hermitian_in(algebra, m, rng);
    let eig_a = eigh(&a, 1e-9)?;
    let spread_a =
        (eig_a.values[m - 1] - eig_a.values[0]).max(1.0);
    let clusters = cluster_eigenvalues(&eig_a.values, tol.decomposition * spread_a);
    if clusters.len() != d_l || clusters.iter().any(|(s, e)| e - s != d_r) {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: "left clusters of a generic algebra element were uneven".to_string(),
        });
    }
    // Generic Hermitian b in the commutant restricted to the reference
    // cluster fixes the right-leg basis.
    let b = random_hermitian_in(commutant, m, rng);
    let q0 = columns(&eig_a.vectors, clusters[0].0, clusters[0].1);
    let b0 = q0.adjoint().mul(&b).mul(&q0);
    let eig_b = eigh(&b0.hermitized(), 1e-9)?;
    let spread_b = (eig_b.values[d_r - 1] - eig_b.values[0]).max(1.0);
    let b_clusters = cluster_eigenvalues(&eig_b.values, tol.decomposition * spread_b);
    if b_clusters.len() != d_r {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: "right spectrum of a generic commutant element was degenerate".to_string(),
        });
    }
    let mut u = Mat::zeros(m, m);
    let ref_states: Vec<Vec<Complex64>> = (0..d_r)
        .map(|r| {
            let mut v = alloc::vec![ZERO; m];
            for row in 0..m {
                for c in 0..d_r {
                    v[row] += q0[(row, c)] * eig_b.vectors[(c, r)];
                }
            }
            v
        })
        .collect();
    for (r, v) in ref_states.iter().enumerate() {
        set_col(&mut u, r, v);
    }
    // Transport the right-leg basis to the other clusters with a generic
    // algebra element x: P_k x (|0,r>) = (x_L)_{k0} |k,r>, so one complex
    // scale per cluster aligns phases across all r simultaneously.
    let x = random_element_in(algebra, m, rng);
    for (k, &(s, e)) in clusters.iter().enumerate().skip(1) {
        let qk = columns(&eig_a.vectors, s, e);
        let pk = qk.mul(&qk.adjoint());
        let mut mu = 0.0f64;
        for (r, v0) in ref_states.iter().enumerate() {
            let xv = x.matvec(v0);
            let vk = pk.matvec(&xv);
            let norm = libm::sqrt(vk.iter().map(|z| z.norm_sqr()).sum::<f64>());
            if r == 0 {
                mu = norm;
                if mu < tol.decomposition {
                    return Err(CoreError::DecompositionNumericallyDegenerate {
                        detail: "transport element missed a cluster".to_string(),
                    });
                }
            } else if (norm - mu).abs() > tol.decomposition * mu.max(1.0) {
                return Err(CoreError::DecompositionNumericallyDegenerate {
                    detail: "transported fiber norms disagree".to_string(),
                });
            }
            let scaled: Vec<Complex64> =
                vk.iter().map(|z| z / Complex64::new(mu, 0.0)).collect();
            set_col(&mut u, k * d_r + r, &scaled);
        }
    }
    // u's columns are |k,r> in block coordinates; the split map is u^dag.
    let split = FactorSplit {
        left_dim: d_l,
        right_dim: d_r,
        unitary: u.adjoint(),
    };
    if split.unitary.isometry_deviation() > tol.decomposition {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: "transported basis lost orthonormality".to_string(),
        });
    }
    verify_split(&split, algebra, tol)?;
    Ok(split)
}

/// Checks that every algebra element maps to (left op) (x) identity under the
/// split; returns the worst residual.
fn verify_split(split: &FactorSplit, algebra: &[Mat], tol: &Tol) -> Result<f64> {
    let (d_l, d_r) = (split.left_dim, split.right_dim);
    let mut worst = 0.0f64;
    for op in algebra {
        let t = split.unitary.mul(op).mul(&split.unitary.adjoint());
        let mut left = Mat::zeros(d_l, d_l);
        for k in 0..d_l {
            for kp in 0..d_l {
                let mut acc = ZERO;
                for r in 0..d_r {
                    acc += t[(k * d_r + r, kp * d_r + r)];
                }
                left[(k, kp)] = acc / Complex64::new(d_r as f64, 0.0);
            }
        }
        let mut resid = 0.0f64;
        for k in 0..d_l {
            for kp in 0..d_l {
                for r in 0..d_r {
                    for rp in 0..d_r {
                        let want = if r == rp { left[(k, kp)] } else { ZERO };
                        resid += (t[(k * d_r + r, kp * d_r + rp)] - want).norm_sqr();
                    }
                }
            }
        }
        worst = worst.max(libm::sqrt(resid));
    }
    if worst > tol.decomposition * 10.0 {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: alloc::format!("tensor-split residual {worst:.3e} above tolerance"),
        });
    }
    Ok(worst)
}

fn int_sqrt(n: usize) -> Option<usize> {
    let r = libm::round(libm::sqrt(n as f64)) as usize;
    if r * r == n {
        Some(r)
    } else {
        None
    }
}

fn columns(m: &Mat, start: usize, end: usize) -> Mat {
    let mut out = Mat::zeros(m.nrows, end - start);
    for (col, idx) in (start..end).enumerate() {
        for r in 0..m.nrows {
            out[(r, col)] = m[(r, idx)];
        }
    }
    out
}

fn set_col(m: &mut Mat, col: usize, v: &[Complex64]) {
    for (r, &z) in v.iter().enumerate() {
        m[(r, col)] = z;
    }
}
