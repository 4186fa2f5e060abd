//! Labeled dense operators and pure states on tensor-product spaces.
//!
//! A `DenseOperator` is a square matrix over the row-major lexicographic
//! basis of its `Dims`. All structural operations (tensor, partial trace,
//! embedding, factor permutation) address factors by label.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::dims::{Dim, Dims};
use crate::error::{CoreError, Result};
use crate::mat::{self, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    dims: Dims,
    mat: Mat,
}

impl DenseOperator {
    pub fn zeros(dims: Dims) -> Self {
        let n = dims.total_dim();
        DenseOperator {
            dims,
            mat: Mat::zeros(n, n),
        }
    }

    pub fn identity(dims: Dims) -> Self {
        let n = dims.total_dim();
        DenseOperator {
            dims,
            mat: Mat::identity(n),
        }
    }

    pub fn from_mat(dims: Dims, mat: Mat) -> Result<Self> {
        let n = dims.total_dim();
        if mat.nrows != n || mat.ncols != n {
            return Err(CoreError::DimensionMismatch {
                context: alloc::format!(
                    "operator storage is {}x{} but factors give total dimension {n}",
                    mat.nrows,
                    mat.ncols
                ),
            });
        }
        Ok(DenseOperator { dims, mat })
    }

    pub fn from_entries(dims: Dims, entries: Vec<Complex64>) -> Result<Self> {
        let n = dims.total_dim();
        if entries.len() != n * n {
            return Err(CoreError::DimensionMismatch {
                context: alloc::format!(
                    "{} entries supplied for a {n}x{n} operator",
                    entries.len()
                ),
            });
        }
        Ok(DenseOperator {
            dims,
            mat: Mat {
                nrows: n,
                ncols: n,
                a: entries,
            },
        })
    }

    /// Rank-one |v⟩⟨w| on the given factors.
    pub fn outer(dims: Dims, v: &[Complex64], w: &[Complex64]) -> Result<Self> {
        let n = dims.total_dim();
        if v.len() != n || w.len() != n {
            return Err(CoreError::DimensionMismatch {
                context: "outer product vector length".to_string(),
            });
        }
        let mut m = Mat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = v[r] * w[c].conj();
            }
        }
        Ok(DenseOperator { dims, mat: m })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn mat_mut(&mut self) -> &mut Mat {
        &mut self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.mat.at(r, c)
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.mat[(r, c)] = v;
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.frobenius_norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.max_abs()
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator {
            dims: self.dims.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        DenseOperator {
            dims: self.dims.clone(),
            mat: self.mat.scaled(s),
        }
    }

    pub fn scaled_re(&self, s: f64) -> Self {
        self.scaled(Complex64::new(s, 0.0))
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_space(rhs)?;
        Ok(DenseOperator {
            dims: self.dims.clone(),
            mat: self.mat.add(&rhs.mat),
        })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_space(rhs)?;
        Ok(DenseOperator {
            dims: self.dims.clone(),
            mat: self.mat.sub(&rhs.mat),
        })
    }

    /// Operator product; both operands must live on the identical factor list.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check_same_space(rhs)?;
        Ok(DenseOperator {
            dims: self.dims.clone(),
            mat: self.mat.mul(&rhs.mat),
        })
    }

    fn check_same_space(&self, rhs: &Self) -> Result<()> {
        if self.dims != rhs.dims {
            return Err(CoreError::DimensionMismatch {
                context: alloc::format!(
                    "operands live on different spaces: {:?} vs {:?}",
                    self.dims.labels(),
                    rhs.dims.labels()
                ),
            });
        }
        Ok(())
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.mat.hermiticity_deviation()
    }

    pub fn hermitized(&self) -> Self {
        DenseOperator {
            dims: self.dims.clone(),
            mat: self.mat.hermitized(),
        }
    }

    /// Renames factors; `map` lists `(old, new)` pairs.
    pub fn relabeled(&self, map: &[(&str, &str)]) -> Result<Self> {
        let mut factors: Vec<Dim> = self.dims.factors().to_vec();
        for (old, new) in map {
            let pos = self.dims.position(old)?;
            factors[pos].label = (*new).to_string();
        }
        Ok(DenseOperator {
            dims: Dims::new(factors)?,
            mat: self.mat.clone(),
        })
    }

    /// Reorders tensor factors to the given label order (a permutation of the
    /// current labels). Entries move so the operator is unchanged as a map.
    pub fn permuted(&self, order: &[String]) -> Result<Self> {
        if order.len() != self.dims.len() {
            return Err(CoreError::DimensionMismatch {
                context: "permutation must list every factor exactly once".to_string(),
            });
        }
        let mut perm = Vec::with_capacity(order.len());
        for l in order {
            let p = self.dims.position(l)?;
            if perm.contains(&p) {
                return Err(CoreError::LabelCollision { label: l.clone() });
            }
            perm.push(p);
        }
        let new_dims = Dims::new(
            perm.iter()
                .map(|&p| self.dims.factors()[p].clone())
                .collect(),
        )?;
        let n = self.dim();
        let k = self.dims.len();
        let mut out = Mat::zeros(n, n);
        let mut old_r = vec![0usize; k];
        let mut old_c = vec![0usize; k];
        let mut new_r = vec![0usize; k];
        let mut new_c = vec![0usize; k];
        for r in 0..n {
            self.dims.unravel(r, &mut old_r);
            for (np, &op) in perm.iter().enumerate() {
                new_r[np] = old_r[op];
            }
            let rr = new_dims.ravel(&new_r);
            for c in 0..n {
                self.dims.unravel(c, &mut old_c);
                for (np, &op) in perm.iter().enumerate() {
                    new_c[np] = old_c[op];
                }
                out[(rr, new_dims.ravel(&new_c))] = self.mat.at(r, c);
            }
        }
        Ok(DenseOperator {
            dims: new_dims,
            mat: out,
        })
    }

    /// Embeds into a larger space, acting as the identity on absent factors.
    /// Every factor of `self` must appear in `target` with the same dimension.
    pub fn embedded(&self, target: &Dims) -> Result<Self> {
        // src_pos[t] = Some(position in self) when target factor t is ours.
        let mut src_pos: Vec<Option<usize>> = Vec::with_capacity(target.len());
        for f in target.factors() {
            match self.dims.position(&f.label) {
                Ok(p) => {
                    if self.dims.factors()[p].d != f.d {
                        return Err(CoreError::DimensionMismatch {
                            context: alloc::format!(
                                "factor {:?} has dimension {} here, {} in target",
                                f.label,
                                self.dims.factors()[p].d,
                                f.d
                            ),
                        });
                    }
                    src_pos.push(Some(p));
                }
                Err(_) => src_pos.push(None),
            }
        }
        let found = src_pos.iter().filter(|p| p.is_some()).count();
        if found != self.dims.len() {
            let missing = self
                .dims
                .labels()
                .into_iter()
                .find(|l| !target.contains(l))
                .unwrap_or_default();
            return Err(CoreError::LabelNotFound { label: missing });
        }

        let n = target.total_dim();
        let k = target.len();
        let mut out = Mat::zeros(n, n);
        let mut ri = vec![0usize; k];
        let mut ci = vec![0usize; k];
        let mut sr = vec![0usize; self.dims.len()];
        let mut sc = vec![0usize; self.dims.len()];
        for r in 0..n {
            target.unravel(r, &mut ri);
            for c in 0..n {
                target.unravel(c, &mut ci);
                // Identity on absent factors: indices must agree there.
                let mut diag = true;
                for t in 0..k {
                    match src_pos[t] {
                        None => {
                            if ri[t] != ci[t] {
                                diag = false;
                                break;
                            }
                        }
                        Some(p) => {
                            sr[p] = ri[t];
                            sc[p] = ci[t];
                        }
                    }
                }
                if !diag {
                    continue;
                }
                out[(r, c)] = self
                    .mat
                    .at(self.dims.ravel(&sr), self.dims.ravel(&sc));
            }
        }
        Ok(DenseOperator {
            dims: target.clone(),
            mat: out,
        })
    }
}

/// Tensor product; errors if the operands share a factor label.
pub fn tensor(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    let dims = a.dims().joined(b.dims())?;
    Ok(DenseOperator {
        dims,
        mat: a.mat().kron(b.mat()),
    })
}

/// Tensor product of several operators, left to right.
pub fn tensor_all(ops: &[&DenseOperator]) -> Result<DenseOperator> {
    let mut it = ops.iter();
    let first = it.next().ok_or_else(|| CoreError::InvalidParameter {
        detail: "tensor_all of empty list".to_string(),
    })?;
    let mut acc = (*first).clone();
    for op in it {
        acc = tensor(&acc, op)?;
    }
    Ok(acc)
}

/// Traces out every factor not in `keep_labels`; kept factors preserve their
/// original relative order regardless of the order given.
pub fn partial_trace(op: &DenseOperator, keep_labels: &[String]) -> Result<DenseOperator> {
    for l in keep_labels {
        op.dims().position(l)?;
    }
    let keep: Vec<usize> = (0..op.dims().len())
        .filter(|&i| {
            keep_labels
                .iter()
                .any(|l| *l == op.dims().factors()[i].label)
        })
        .collect();
    let drop: Vec<usize> = (0..op.dims().len()).filter(|i| !keep.contains(i)).collect();

    let kept_dims = Dims::new(keep.iter().map(|&i| op.dims().factors()[i].clone()).collect())?;
    let drop_dims: Vec<usize> = drop.iter().map(|&i| op.dims().factors()[i].d).collect();
    let n_drop: usize = drop_dims.iter().product();

    let nk = kept_dims.total_dim();
    let mut out = Mat::zeros(nk, nk);
    let k = op.dims().len();
    let mut full_r = vec![0usize; k];
    let mut full_c = vec![0usize; k];
    let mut kr = vec![0usize; keep.len()];
    let mut kc = vec![0usize; keep.len()];
    let mut ti = vec![0usize; drop.len()];
    for r in 0..nk {
        kept_dims.unravel(r, &mut kr);
        for c in 0..nk {
            kept_dims.unravel(c, &mut kc);
            let mut acc = mat::ZERO;
            // Sum over the joint index of all dropped factors.
            for t in 0..n_drop {
                let mut rem = t;
                for (d, &dd) in drop_dims.iter().enumerate().rev() {
                    ti[d] = rem % dd;
                    rem /= dd;
                }
                for (j, &p) in keep.iter().enumerate() {
                    full_r[p] = kr[j];
                    full_c[p] = kc[j];
                }
                for (j, &p) in drop.iter().enumerate() {
                    full_r[p] = ti[j];
                    full_c[p] = ti[j];
                }
                acc += op.at(op.dims().ravel(&full_r), op.dims().ravel(&full_c));
            }
            out[(r, c)] = acc;
        }
    }
    DenseOperator::from_mat(kept_dims, out)
}

/// Product of operators on (possibly different) overlapping spaces: each is
/// embedded into `target` and the embedded operators are multiplied in the
/// order given.
pub fn mul_embedded(ops: &[&DenseOperator], target: &Dims) -> Result<DenseOperator> {
    let mut acc = DenseOperator::identity(target.clone());
    for op in ops {
        acc = acc.mul(&op.embedded(target)?)?;
    }
    Ok(acc)
}

/// Tr(a·b) without materializing the product. `b` is permuted to `a`'s
/// factor order first; the factor sets must agree.
pub fn trace_product(a: &DenseOperator, b: &DenseOperator) -> Result<Complex64> {
    let bp = if a.dims() == b.dims() {
        None
    } else {
        Some(b.permuted(&a.dims().labels())?)
    };
    let bm = bp.as_ref().unwrap_or(b).mat();
    let am = a.mat();
    let d = am.nrows;
    let mut acc = mat::ZERO;
    for x in 0..d {
        for y in 0..d {
            acc += am[(x, y)] * bm[(y, x)];
        }
    }
    Ok(acc)
}

/// Conjugation op ↦ (⊗ M_f) op (⊗ M_f)† where each listed factor label gets
/// its square matrix and unlisted factors get the identity.
pub fn conjugated_per_factor(
    op: &DenseOperator,
    factor_maps: &[(&str, &Mat)],
) -> Result<DenseOperator> {
    let mut k = Mat::identity(1);
    for dim in op.dims().factors() {
        let block = match factor_maps.iter().find(|(l, _)| *l == dim.label) {
            Some((_, m)) => {
                if m.nrows != dim.d || m.ncols != dim.d {
                    return Err(CoreError::DimensionMismatch {
                        context: alloc::format!(
                            "factor map for {} must be {}x{}",
                            dim.label,
                            dim.d,
                            dim.d
                        ),
                    });
                }
                (*m).clone()
            }
            None => Mat::identity(dim.d),
        };
        k = k.kron(&block);
    }
    let conj = k.mul(op.mat()).mul(&k.adjoint());
    DenseOperator::from_mat(op.dims().clone(), conj)
}

/// Normalized state vector on labeled factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Dims,
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn new(dims: Dims, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != dims.total_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "state vector length does not match factor dimensions".to_string(),
            });
        }
        Ok(PureState { dims, amps })
    }

    /// Computational basis state |index⟩.
    pub fn basis(dims: Dims, index: usize) -> Result<Self> {
        let n = dims.total_dim();
        if index >= n {
            return Err(CoreError::InvalidParameter {
                detail: alloc::format!("basis index {index} out of range for dimension {n}"),
            });
        }
        let mut amps = vec![mat::ZERO; n];
        amps[index] = mat::ONE;
        Ok(PureState { dims, amps })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        mat::vec_norm(&self.amps)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(CoreError::InvalidParameter {
                detail: "cannot normalize the zero vector".to_string(),
            });
        }
        let mut amps = self.amps.clone();
        for a in amps.iter_mut() {
            *a /= n;
        }
        Ok(PureState {
            dims: self.dims.clone(),
            amps,
        })
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        mat::inner(&self.amps, &other.amps)
    }

    /// |ψ⟩⟨ψ| as a labeled operator.
    pub fn density(&self) -> DenseOperator {
        DenseOperator::outer(self.dims.clone(), &self.amps, &self.amps)
            .expect("dimensions match by construction")
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let dims = self.dims.joined(other.dims())?;
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState { dims, amps })
    }
}
