//! Channels as operators: a completely positive trace-preserving map
//! E from the space with factors `in_dims` to the space with factors
//! `out_dims` is stored through its dual operator
//!
//!   cj = Σ_ij E(|i⟩⟨j|) ⊗ |i⟩⟨j|  on  out ⊗ in*,
//!
//! with output factors first and dual-input factors star-labeled. The
//! normalization conventions are: Tr over the output factors gives the
//! identity on in*, and the full trace gives the input dimension.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::dense::{partial_trace, DenseOperator};
use crate::dims::Dims;
use crate::error::{CoreError, Result};
use crate::mat::{Mat, ONE, ZERO};
use crate::spectral::eigh_op;
use crate::tol::Tol;

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    in_dims: Dims,
    out_dims: Dims,
    cj: DenseOperator,
}

/// Dims of the dual operator of a channel: outputs, then starred inputs.
pub fn cj_dims(out_dims: &Dims, in_dims: &Dims) -> Result<Dims> {
    out_dims.joined(&in_dims.dual())
}

impl Channel {
    /// Wraps an operator as a channel, checking the normalization conditions
    /// and positivity at `tol.algebraic`.
    pub fn new(in_dims: Dims, out_dims: Dims, cj: DenseOperator, tol: &Tol) -> Result<Self> {
        let ch = Channel::new_unchecked(in_dims, out_dims, cj)?;
        ch.validate(tol)?;
        Ok(ch)
    }

    /// Wraps without the spectral checks; factor bookkeeping is still
    /// verified. For internal constructions that are valid by construction.
    pub fn new_unchecked(in_dims: Dims, out_dims: Dims, cj: DenseOperator) -> Result<Self> {
        let expect = cj_dims(&out_dims, &in_dims)?;
        if cj.dims() != &expect {
            return Err(CoreError::DimensionMismatch {
                context: alloc::format!(
                    "channel operator has factors {:?}, expected {:?}",
                    cj.dims().labels(),
                    expect.labels()
                ),
            });
        }
        Ok(Channel {
            in_dims,
            out_dims,
            cj,
        })
    }

    pub fn in_dims(&self) -> &Dims {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &Dims {
        &self.out_dims
    }

    pub fn cj(&self) -> &DenseOperator {
        &self.cj
    }

    pub fn into_cj(self) -> DenseOperator {
        self.cj
    }

    pub fn d_in(&self) -> usize {
        self.in_dims.total_dim()
    }

    pub fn d_out(&self) -> usize {
        self.out_dims.total_dim()
    }

    /// Checks Hermiticity, positivity, the partial-trace normalization
    /// Tr_out cj = 1 on in*, and Tr cj = d_in.
    pub fn validate(&self, tol: &Tol) -> Result<()> {
        let t = tol.algebraic;
        let dev = self.cj.hermiticity_deviation();
        if dev > t {
            return Err(CoreError::NotAChannel {
                detail: alloc::format!("dual operator not Hermitian (deviation {dev:.3e})"),
            });
        }
        let tr = self.cj.trace();
        let d_in = self.d_in() as f64;
        if (tr - Complex64::new(d_in, 0.0)).norm() > t * d_in.max(1.0) {
            return Err(CoreError::NotAChannel {
                detail: alloc::format!("trace {tr} differs from input dimension {d_in}"),
            });
        }
        let dual_labels: Vec<String> = self.in_dims.dual().labels();
        let marg = partial_trace(&self.cj, &dual_labels)?;
        let id = DenseOperator::identity(self.in_dims.dual());
        let resid = marg.sub(&id)?.max_abs();
        if resid > t {
            return Err(CoreError::NotAChannel {
                detail: alloc::format!(
                    "trace over outputs deviates from the identity by {resid:.3e}"
                ),
            });
        }
        let eig = eigh_op(&self.cj, t.max(1e-9))?;
        if let Some(min) = eig.values.first() {
            if *min < -t.max(1e-9) {
                return Err(CoreError::NotAChannel {
                    detail: alloc::format!("dual operator has eigenvalue {min:.3e} < 0"),
                });
            }
        }
        Ok(())
    }

    /// The normalized dual state cj / d_in (unit trace).
    pub fn normalized_cj(&self) -> DenseOperator {
        self.cj.scaled_re(1.0 / self.d_in() as f64)
    }

    /// Restriction to a subset of output factors: Tr over the dropped
    /// outputs. Always a valid channel to the remaining outputs.
    pub fn marginal_keep_outputs(&self, keep: &[String]) -> Result<Channel> {
        let out_dims = self.out_dims.subset_in_order(keep)?;
        let mut keep_all: Vec<String> = keep.to_vec();
        keep_all.extend(self.in_dims.dual().labels());
        let cj = partial_trace(&self.cj, &keep_all)?;
        // Kept factors preserve original order, so out factors still precede
        // the dual-input factors.
        Channel::new_unchecked(self.in_dims.clone(), out_dims, cj)
    }

    /// Tensor of two channels on disjoint labels: outputs concatenate, inputs
    /// concatenate, and the dual operator is reordered to the convention.
    pub fn tensor(&self, other: &Channel) -> Result<Channel> {
        let in_dims = self.in_dims.joined(&other.in_dims)?;
        let out_dims = self.out_dims.joined(&other.out_dims)?;
        let prod = crate::dense::tensor(&self.cj, &other.cj)?;
        let order: Vec<String> = cj_dims(&out_dims, &in_dims)?.labels();
        let cj = prod.permuted(&order)?;
        Channel::new_unchecked(in_dims, out_dims, cj)
    }

    /// Precomposition with conjugation by a unitary on the input space:
    /// E'(X) = E(U X U†). The dual factor transforms by Uᵀ.
    pub fn precompose_unitary(&self, u: &Mat) -> Result<Channel> {
        let n = self.d_in();
        if u.nrows != n || u.ncols != n {
            return Err(CoreError::DimensionMismatch {
                context: "unitary dimension does not match channel input".to_string(),
            });
        }
        let d_out = self.d_out();
        let ut = u.transpose();
        let rot = DenseOperator::from_mat(
            self.cj.dims().clone(),
            Mat::identity(d_out).kron(&ut),
        )?;
        let cj = rot.mul(&self.cj)?.mul(&rot.adjoint())?;
        Channel::new_unchecked(self.in_dims.clone(), self.out_dims.clone(), cj)
    }

    /// Applies the channel to a state on exactly the input factors.
    pub fn apply(&self, rho: &DenseOperator) -> Result<DenseOperator> {
        let out = self.apply_to_part(rho)?;
        debug_assert_eq!(out.dims(), &self.out_dims);
        Ok(out)
    }

    /// Applies the channel to the input factors inside a larger state. The
    /// consumed factors are removed; output factors are appended at the end,
    /// spectator factors keep their order.
    ///
    /// ρ'[(k,o),(k',o')] = Σ_ij cj[(o,i),(o',j)] ρ[(k,i),(k',j)].
    pub fn apply_to_part(&self, rho: &DenseOperator) -> Result<DenseOperator> {
        let in_labels = self.in_dims.labels();
        for l in &in_labels {
            let d_state = rho.dims().dim_of(l)?;
            let d_ch = self.in_dims.dim_of(l)?;
            if d_state != d_ch {
                return Err(CoreError::DimensionMismatch {
                    context: alloc::format!(
                        "factor {l:?} has dimension {d_state} in the state, {d_ch} in the channel"
                    ),
                });
            }
        }
        for f in self.out_dims.factors() {
            if rho.dims().contains(&f.label) && !in_labels.contains(&f.label) {
                return Err(CoreError::LabelCollision {
                    label: f.label.clone(),
                });
            }
        }
        let spectators: Vec<String> = rho
            .dims()
            .labels()
            .into_iter()
            .filter(|l| !in_labels.contains(l))
            .collect();
        let mut order = spectators.clone();
        order.extend(in_labels.iter().cloned());
        let rho_p = rho.permuted(&order)?;

        let spect_dims = rho.dims().subset_in_order(&spectators)?;
        let nk = spect_dims.total_dim();
        let din = self.d_in();
        let dout = self.d_out();
        let out_dims = spect_dims.joined(&self.out_dims)?;
        let mut out = Mat::zeros(nk * dout, nk * dout);
        for k in 0..nk {
            for kp in 0..nk {
                for o in 0..dout {
                    for op in 0..dout {
                        let mut acc = ZERO;
                        for i in 0..din {
                            for j in 0..din {
                                let cj = self.cj.at(o * din + i, op * din + j);
                                if cj == ZERO {
                                    continue;
                                }
                                acc += cj * rho_p.at(k * din + i, kp * din + j);
                            }
                        }
                        out[(k * dout + o, kp * dout + op)] = acc;
                    }
                }
            }
        }
        DenseOperator::from_mat(out_dims, out)
    }
}

/// Dual operator of the unitary channel X ↦ U X U†. `u` maps the space with
/// factors `in_dims` to the space with factors `out_dims` (equal total
/// dimension; factor labels may differ). The result is rank one.
pub fn cj_of_unitary(u: &Mat, in_dims: &Dims, out_dims: &Dims, tol: &Tol) -> Result<Channel> {
    let din = in_dims.total_dim();
    let dout = out_dims.total_dim();
    if u.nrows != dout || u.ncols != din || din != dout {
        return Err(CoreError::DimensionMismatch {
            context: alloc::format!(
                "unitary is {}x{}, expected square of dimension {din}",
                u.nrows,
                u.ncols
            ),
        });
    }
    let dev = u.isometry_deviation();
    if dev > tol.algebraic {
        return Err(CoreError::InvalidParameter {
            detail: alloc::format!("matrix is not unitary (U†U deviates by {dev:.3e})"),
        });
    }
    // cj[(o,i),(o',j)] = U[o,i]·conj(U[o',j]): the outer product of vec(U).
    let mut w = vec![ZERO; din * dout];
    for o in 0..dout {
        for i in 0..din {
            w[o * din + i] = u.at(o, i);
        }
    }
    let dims = cj_dims(out_dims, in_dims)?;
    let cj = DenseOperator::outer(dims, &w, &w)?;
    Channel::new_unchecked(in_dims.clone(), out_dims.clone(), cj)
}

/// Applies a channel to a state; the state must live on the channel's input
/// factors (any order).
pub fn apply_channel(ch: &Channel, rho: &DenseOperator) -> Result<DenseOperator> {
    if rho.dims().len() != ch.in_dims().len()
        || !rho
            .dims()
            .labels()
            .iter()
            .all(|l| ch.in_dims().contains(l))
    {
        return Err(CoreError::DimensionMismatch {
            context: alloc::format!(
                "state factors {:?} do not match channel input {:?}",
                rho.dims().labels(),
                ch.in_dims().labels()
            ),
        });
    }
    ch.apply(rho)
}

/// The linking operator Σ_ij |i⟩⟨j| ⊗ |i⟩⟨j| across two same-dimension
/// spaces; rank one as the outer product of the unnormalized maximally
/// entangled vector. Equals the dual operator of the identity channel.
pub fn identity_link(first: &Dims, second: &Dims) -> Result<DenseOperator> {
    let d = first.total_dim();
    if second.total_dim() != d {
        return Err(CoreError::DimensionMismatch {
            context: "linking operator requires equal dimensions".to_string(),
        });
    }
    let dims = first.joined(second)?;
    let mut omega = vec![ZERO; d * d];
    for i in 0..d {
        omega[i * d + i] = ONE;
    }
    DenseOperator::outer(dims, &omega, &omega)
}

/// A finite-outcome instrument: labeled completely positive arms whose sum
/// is a channel. Arms are stored as dual operators on out ⊗ in*.
#[derive(Debug, Clone)]
pub struct Instrument {
    in_dims: Dims,
    out_dims: Dims,
    arms: Vec<(String, DenseOperator)>,
}

impl Instrument {
    pub fn new(
        in_dims: Dims,
        out_dims: Dims,
        arms: Vec<(String, DenseOperator)>,
        tol: &Tol,
    ) -> Result<Self> {
        if arms.is_empty() {
            return Err(CoreError::InvalidParameter {
                detail: "instrument needs at least one arm".to_string(),
            });
        }
        let expect = cj_dims(&out_dims, &in_dims)?;
        let mut sum = DenseOperator::zeros(expect.clone());
        for (label, arm) in &arms {
            if arm.dims() != &expect {
                return Err(CoreError::DimensionMismatch {
                    context: alloc::format!("arm {label:?} lives on the wrong factors"),
                });
            }
            let eig = eigh_op(arm, tol.algebraic.max(1e-9))?;
            if let Some(min) = eig.values.first() {
                if *min < -tol.algebraic.max(1e-9) {
                    return Err(CoreError::NotPositive {
                        min_eigenvalue: *min,
                    });
                }
            }
            sum = sum.add(arm)?;
        }
        Channel::new(in_dims.clone(), out_dims.clone(), sum, tol)?;
        Ok(Instrument {
            in_dims,
            out_dims,
            arms,
        })
    }

    /// Single-arm instrument that passes the state through unchanged.
    pub fn identity(in_dims: Dims, out_dims: Dims) -> Result<Self> {
        let link = identity_link(&out_dims, &in_dims.dual())?;
        Ok(Instrument {
            in_dims,
            out_dims,
            arms: vec![("id".to_string(), link)],
        })
    }

    /// Projective measurement onto the columns of `basis` (the computational
    /// basis when `None`), with collapse: arm k is X ↦ P_k X P_k. Outcomes
    /// are labeled by the basis index.
    pub fn projective(in_dims: Dims, out_dims: Dims, basis: Option<&Mat>) -> Result<Self> {
        let d = in_dims.total_dim();
        if out_dims.total_dim() != d {
            return Err(CoreError::DimensionMismatch {
                context: "projective instrument requires equal in/out dimensions".to_string(),
            });
        }
        let dims = cj_dims(&out_dims, &in_dims)?;
        let mut arms = Vec::with_capacity(d);
        for k in 0..d {
            let b: Vec<Complex64> = match basis {
                None => (0..d).map(|i| if i == k { ONE } else { ZERO }).collect(),
                Some(m) => {
                    if m.nrows != d || m.ncols != d {
                        return Err(CoreError::DimensionMismatch {
                            context: "basis matrix dimension".to_string(),
                        });
                    }
                    m.col(k)
                }
            };
            // Arm dual operator: |b⟩⟨b| ⊗ conj(|b⟩⟨b|).
            let mut w = vec![ZERO; d * d];
            for o in 0..d {
                for i in 0..d {
                    w[o * d + i] = b[o] * b[i].conj();
                }
            }
            let arm = DenseOperator::outer(dims.clone(), &w, &w)?;
            arms.push((alloc::format!("{k}"), arm));
        }
        Ok(Instrument {
            in_dims,
            out_dims,
            arms,
        })
    }

    pub fn in_dims(&self) -> &Dims {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &Dims {
        &self.out_dims
    }

    pub fn arms(&self) -> &[(String, DenseOperator)] {
        &self.arms
    }

    pub fn arm(&self, label: &str) -> Result<&DenseOperator> {
        self.arms
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, a)| a)
            .ok_or_else(|| CoreError::LabelNotFound {
                label: label.to_string(),
            })
    }

    /// The unconditional channel: sum of all arms.
    pub fn total_channel(&self) -> Result<Channel> {
        let expect = cj_dims(&self.out_dims, &self.in_dims)?;
        let mut sum = DenseOperator::zeros(expect);
        for (_, arm) in &self.arms {
            sum = sum.add(arm)?;
        }
        Channel::new_unchecked(self.in_dims.clone(), self.out_dims.clone(), sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::mul_embedded;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tol {
        Tol::default()
    }

    fn cnot() -> Mat {
        let mut u = Mat::zeros(4, 4);
        u[(0, 0)] = ONE;
        u[(1, 1)] = ONE;
        u[(2, 3)] = ONE;
        u[(3, 2)] = ONE;
        u
    }

    #[test]
    fn identity_channel_dual_is_linking_operator() {
        let a = Dims::of(&[("A", 3)]);
        let b = Dims::of(&[("B", 3)]);
        let ch = cj_of_unitary(&Mat::identity(3), &a, &b, &tol()).unwrap();
        let link = identity_link(&b, &a.dual()).unwrap();
        assert!(ch.cj().sub(&link).unwrap().max_abs() < 1e-14);
        ch.validate(&tol()).unwrap();
    }

    #[test]
    fn unitary_channel_normalization() {
        let dims_in = Dims::of(&[("A", 2), ("B", 2)]);
        let dims_out = Dims::of(&[("C", 2), ("D", 2)]);
        let ch = cj_of_unitary(&cnot(), &dims_in, &dims_out, &tol()).unwrap();
        ch.validate(&tol()).unwrap();
        assert!((ch.cj().trace() - c(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn apply_matches_direct_conjugation() {
        let dims_in = Dims::of(&[("A", 2), ("B", 2)]);
        let dims_out = Dims::of(&[("C", 2), ("D", 2)]);
        let u = cnot();
        let ch = cj_of_unitary(&u, &dims_in, &dims_out, &tol()).unwrap();
        // |10⟩⟨10| maps to |11⟩⟨11| under CNOT.
        let mut rho = DenseOperator::zeros(dims_in);
        rho.set(2, 2, ONE);
        let out = apply_channel(&ch, &rho).unwrap();
        assert!((out.at(3, 3) - ONE).norm() < 1e-14);
        assert!((out.trace() - ONE).norm() < 1e-13);
    }

    #[test]
    fn apply_agrees_with_linking_operator_contraction() {
        // Oracle: ρ_B = Tr_{A* A}(cj · τ_A · ρ_A) with everything embedded on
        // (B, A*, A). Exercised on a qubit depolarizing-ish channel.
        let a = Dims::of(&[("A", 2)]);
        let b = Dims::of(&[("B", 2)]);
        let mut cjop = DenseOperator::zeros(cj_dims(&b, &a).unwrap());
        // E(X) = (X + σ_x X σ_x)/2 written out by hand:
        // E(e00) = (e00+e11)/2, E(e11) = same, E(e01) = (e01+e10)/2, ...
        let half = c(0.5, 0.0);
        // cj[(o,i),(o',j)] = E(e_ij)[o,o'].
        for (i, j, o, op) in [
            (0, 0, 0, 0),
            (0, 0, 1, 1),
            (1, 1, 0, 0),
            (1, 1, 1, 1),
            (0, 1, 0, 1),
            (0, 1, 1, 0),
            (1, 0, 1, 0),
            (1, 0, 0, 1),
        ] {
            cjop.set(o * 2 + i, op * 2 + j, half);
        }
        let ch = Channel::new(a.clone(), b.clone(), cjop, &tol()).unwrap();

        let mut rho = DenseOperator::zeros(a.clone());
        rho.set(0, 0, c(0.7, 0.0));
        rho.set(1, 1, c(0.3, 0.0));
        rho.set(0, 1, c(0.1, 0.05));
        rho.set(1, 0, c(0.1, -0.05));

        let fast = apply_channel(&ch, &rho).unwrap();

        let grand = b.joined(&a.dual()).unwrap().joined(&a).unwrap();
        let tau = identity_link(&a.dual(), &a).unwrap();
        let prod = mul_embedded(&[ch.cj(), &tau, &rho], &grand).unwrap();
        let slow = partial_trace(&prod, &["B".into()]).unwrap();

        assert!(fast.sub(&slow).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn apply_to_part_leaves_spectators_untouched() {
        let a = Dims::of(&[("A", 2)]);
        let b = Dims::of(&[("B", 2)]);
        let ch = cj_of_unitary(
            &Mat::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
            &a,
            &b,
            &tol(),
        )
        .unwrap(); // bit flip A→B
        let s = Dims::of(&[("S", 2), ("A", 2)]);
        let mut rho = DenseOperator::zeros(s);
        rho.set(0, 0, ONE); // |s=0, a=0⟩
        let out = ch.apply_to_part(&rho).unwrap();
        assert_eq!(
            out.dims().labels(),
            vec!["S".to_string(), "B".to_string()]
        );
        // a=0 flips to b=1: state |s=0,b=1⟩ = index 1.
        assert!((out.at(1, 1) - ONE).norm() < 1e-14);
    }

    #[test]
    fn marginal_of_unitary_channel_is_a_channel() {
        let dims_in = Dims::of(&[("A", 2), ("B", 2)]);
        let dims_out = Dims::of(&[("C", 2), ("D", 2)]);
        let ch = cj_of_unitary(&cnot(), &dims_in, &dims_out, &tol()).unwrap();
        let m = ch.marginal_keep_outputs(&["C".into()]).unwrap();
        m.validate(&tol()).unwrap();
        assert_eq!(m.out_dims().labels(), vec!["C".to_string()]);
    }

    #[test]
    fn projective_instrument_sums_to_dephasing() {
        let ins =
            Instrument::projective(Dims::of(&[("A", 2)]), Dims::of(&[("B", 2)]), None).unwrap();
        let total = ins.total_channel().unwrap();
        total.validate(&tol()).unwrap();
        let mut rho = DenseOperator::zeros(Dims::of(&[("A", 2)]));
        rho.set(0, 0, c(0.5, 0.0));
        rho.set(1, 1, c(0.5, 0.0));
        rho.set(0, 1, c(0.5, 0.0));
        rho.set(1, 0, c(0.5, 0.0));
        let out = total.apply(&rho).unwrap();
        // Coherences die, populations survive.
        assert!(out.at(0, 1).norm() < 1e-14);
        assert!((out.at(0, 0) - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn instrument_validation_rejects_non_channel_sum() {
        let dims = cj_dims(&Dims::of(&[("B", 2)]), &Dims::of(&[("A", 2)])).unwrap();
        let arm = DenseOperator::identity(dims); // Tr_out(1) = 2·1 ≠ 1: not trace-preserving.
        let r = Instrument::new(
            Dims::of(&[("A", 2)]),
            Dims::of(&[("B", 2)]),
            vec![("only".to_string(), arm)],
            &tol(),
        );
        assert!(r.is_err());
    }
}
