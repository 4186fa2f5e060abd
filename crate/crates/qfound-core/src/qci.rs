//! Conditional independence of a channel's outputs given its input, checked
//! four equivalent ways: CJ factorisation into commuting marginals, vanishing
//! conditional mutual information, a block decomposition of the input space
//! into left/right tensor factors, and a pair of commuting unitary dilations
//! with no cross causal influence.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::ChaCha12Rng;

use crate::algebra::{algebra_closure, center_basis, central_blocks, factor_block, span_basis};
use crate::channel::Channel;
use crate::dense::{mul_embedded, partial_trace, tensor, DenseOperator};
use crate::dims::{dual_label, Dim, Dims};
use crate::entropy::conditional_mutual_information;
use crate::error::{CoreError, Result};
use crate::mat::{Mat, ONE, ZERO};
use crate::random::random_channel;
use crate::spectral::eigh_op;
use crate::tol::Tol;

/// Attempts of the full block pipeline before conceding degeneracy.
const PIPELINE_ATTEMPTS: usize = 3;

/// Outcome of the marginal-product test on a channel's CJ operator.
#[derive(Debug, Clone, Copy)]
pub struct FactorisationCheck {
    pub factorises: bool,
    /// Frobenius distance between the CJ operator and the marginal product.
    pub residual: f64,
    /// Frobenius norm of the marginal commutator.
    pub commutator_norm: f64,
}

/// One direct summand of the input space with its left/right output channels.
#[derive(Debug, Clone)]
pub struct Block {
    pub left_dim: usize,
    pub right_dim: usize,
    /// (left*right) x d_in matrix; row l*right+r holds <l,r| over the input.
    pub isometry: Mat,
    /// Channel from the left leg to the first output part.
    pub channel_left: Channel,
    /// Channel from the right leg to the second output part.
    pub channel_right: Channel,
}

/// Direct-sum-of-tensor-factors structure of the input space.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub blocks: Vec<Block>,
    /// Frobenius distance between the reassembled and original CJ operators.
    pub residual: f64,
}

/// Commuting-unitary dilation of a conditionally independent channel.
#[derive(Debug, Clone)]
pub struct Dilation {
    /// The combined unitary on ancilla_left (x) input (x) ancilla_right.
    pub unitary: Mat,
    pub in_dims: Dims,
    pub out_dims: Dims,
    /// Labels of the two ancilla input factors and the garbage output factor.
    pub ancilla_left: String,
    pub ancilla_right: String,
    pub garbage: String,
    /// Fixed ancilla input states (projectors onto the first basis vector).
    pub ancilla_states: Vec<DenseOperator>,
    /// The two commuting unitary factors on the internal direct-sum space.
    pub v: Mat,
    pub w: Mat,
    pub commutator_norm: f64,
    /// Distance between the channel re-derived from `unitary` and the input.
    pub rederivation_residual: f64,
}

/// Joint verdict of all applicable conditional-independence checks.
#[derive(Debug, Clone)]
pub struct QciReport {
    pub factorises: bool,
    pub commutes: bool,
    /// Largest conditional mutual information over single parts, in bits.
    pub cmi_value: f64,
    pub factorisation_residual: f64,
    pub commutator_norm: f64,
    pub decomposition: Option<Decomposition>,
    pub dilation: Option<Dilation>,
}

/// Validates that `labels_b` and `labels_c` partition the channel outputs and
/// returns the two parts in the channel's output order.
fn split_outputs(ch: &Channel, labels_b: &[String], labels_c: &[String]) -> Result<(Dims, Dims)> {
    for l in labels_b {
        if labels_c.contains(l) {
            return Err(CoreError::LabelCollision { label: l.clone() });
        }
    }
    let dims_b = ch.out_dims().subset_in_order(labels_b)?;
    let dims_c = ch.out_dims().subset_in_order(labels_c)?;
    if dims_b.len() + dims_c.len() != ch.out_dims().len() {
        return Err(CoreError::InvalidParameter {
            detail: "output partition must cover every output factor".to_string(),
        });
    }
    Ok((dims_b, dims_c))
}

fn part_labels(parts: &[Vec<String>]) -> Vec<String> {
    parts.iter().flatten().cloned().collect()
}

/// Tests whether cj = (marginal on B)(marginal on C) as embedded operators,
/// together with the commutator norm of the two marginals.
pub fn check_factorisation(
    ch: &Channel,
    labels_b: &[String],
    labels_c: &[String],
    tol: &Tol,
) -> Result<FactorisationCheck> {
    split_outputs(ch, labels_b, labels_c)?;
    let m_b = ch.marginal_keep_outputs(labels_b)?.into_cj();
    let m_c = ch.marginal_keep_outputs(labels_c)?.into_cj();
    let target = ch.cj().dims().clone();
    let bc = mul_embedded(&[&m_b, &m_c], &target)?;
    let cb = mul_embedded(&[&m_c, &m_b], &target)?;
    let residual = ch.cj().sub(&bc)?.frobenius_norm();
    let commutator_norm = bc.sub(&cb)?.frobenius_norm();
    Ok(FactorisationCheck {
        factorises: residual <= tol.decomposition,
        residual,
        commutator_norm,
    })
}

/// I(B : C | input) in bits on the normalized CJ state cj / d_in.
pub fn check_cmi(
    ch: &Channel,
    labels_b: &[String],
    labels_c: &[String],
    tol: &Tol,
) -> Result<f64> {
    split_outputs(ch, labels_b, labels_c)?;
    let rho = ch.normalized_cj();
    let cond = ch.in_dims().dual().labels();
    conditional_mutual_information(&rho, labels_b, labels_c, &cond, tol)
}

/// Picks a label starting from `base` that collides with nothing in `taken`.
fn fresh_label(base: &str, taken: &[String]) -> String {
    let mut name = base.to_string();
    while taken.contains(&name) || taken.contains(&dual_label(&name)) {
        name.insert(0, '_');
    }
    name
}

/// CJ operator permuted to (B part, C part, dual inputs) order.
fn ordered_cj(ch: &Channel, dims_b: &Dims, dims_c: &Dims) -> Result<DenseOperator> {
    let mut order: Vec<String> = dims_b.labels();
    order.extend(dims_c.labels());
    order.extend(ch.in_dims().dual().labels());
    ch.cj().permuted(&order)
}

/// Marginal generators T[p,q][i,j] = marginal[(q,i),(p,j)] spanning the
/// output-side operator algebra on the dual input space.
fn transfer_generators(marginal: &Mat, d_out: usize, d_in: usize) -> Vec<Mat> {
    let mut gens = Vec::with_capacity(d_out * d_out);
    for p in 0..d_out {
        for q in 0..d_out {
            let mut t = Mat::zeros(d_in, d_in);
            for i in 0..d_in {
                for j in 0..d_in {
                    t[(i, j)] = marginal[(q * d_in + i, p * d_in + j)];
                }
            }
            gens.push(t);
        }
    }
    gens
}

/// Finds the block decomposition of the input space realizing the channel as
/// a direct sum of left (x) right product channels.
pub fn find_decomposition(
    ch: &Channel,
    labels_b: &[String],
    labels_c: &[String],
    tol: &Tol,
    rng: &mut ChaCha12Rng,
) -> Result<Decomposition> {
    let check = check_factorisation(ch, labels_b, labels_c, tol)?;
    if !check.factorises {
        return Err(CoreError::NotConditionallyIndependent {
            residual: check.residual,
        });
    }
    let mut last = CoreError::DecompositionNumericallyDegenerate {
        detail: "no attempt ran".to_string(),
    };
    for _ in 0..PIPELINE_ATTEMPTS {
        match decompose_once(ch, labels_b, labels_c, tol, rng) {
            Ok(dec) => return Ok(dec),
            Err(e) if e.is_domain() => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

fn decompose_once(
    ch: &Channel,
    labels_b: &[String],
    labels_c: &[String],
    tol: &Tol,
    rng: &mut ChaCha12Rng,
) -> Result<Decomposition> {
    let (dims_b, dims_c) = split_outputs(ch, labels_b, labels_c)?;
    let (d_b, d_c) = (dims_b.total_dim(), dims_c.total_dim());
    let d_a = ch.d_in();
    let cjp = ordered_cj(ch, &dims_b, &dims_c)?;

    let mut keep_b = dims_b.labels();
    keep_b.extend(ch.in_dims().dual().labels());
    let m_b = partial_trace(&cjp, &keep_b)?.into_mat();
    let gens = transfer_generators(&m_b, d_b, d_a);
    let basis = algebra_closure(&gens, d_a)?;
    let center = center_basis(&basis, d_a)?;
    let cblocks = central_blocks(&center, d_a, tol, rng)?;

    let all_labels: Vec<String> = ch
        .out_dims()
        .labels()
        .into_iter()
        .chain(ch.in_dims().labels())
        .collect();
    let lab_l = fresh_label("L", &all_labels);
    let lab_r = fresh_label("R", &all_labels);
    let relaxed = Tol {
        algebraic: tol.decomposition,
        decomposition: tol.decomposition,
    };

    let mut blocks: Vec<Block> = Vec::with_capacity(cblocks.len());
    let mut rec = Mat::zeros(d_b * d_c * d_a, d_b * d_c * d_a);
    for cb in &cblocks {
        let m = cb.isometry.ncols;
        // Compress the output algebra onto the central subspace; the result
        // is a factor there, so it splits the subspace into left x right.
        let compressed: Vec<Mat> = basis
            .iter()
            .map(|op| cb.isometry.adjoint().mul(op).mul(&cb.isometry))
            .collect();
        let block_basis = span_basis(&compressed);
        let split = factor_block(&block_basis, m, tol, rng)?;
        let (d_l, d_r) = (split.left_dim, split.right_dim);
        // Transformation on the dual input coordinates; the input-space
        // isometry is its entrywise conjugate.
        let w_star = split.unitary.mul(&cb.isometry.adjoint());
        let isometry = w_star.conj();

        let sigma_mat = {
            let k = Mat::identity(d_b * d_c).kron(&w_star);
            k.mul(cjp.mat()).mul(&k.adjoint())
        };
        let mut sigma_factors: Vec<Dim> = Vec::new();
        for d in dims_b.factors().iter().chain(dims_c.factors()) {
            sigma_factors.push(d.clone());
        }
        sigma_factors.push(Dim::new(dual_label(&lab_l), d_l));
        sigma_factors.push(Dim::new(dual_label(&lab_r), d_r));
        let sigma = DenseOperator::from_mat(Dims::new(sigma_factors)?, sigma_mat)?;

        let mut keep_left = dims_b.labels();
        keep_left.push(dual_label(&lab_l));
        let rho_left = partial_trace(&sigma, &keep_left)?
            .scaled_re(1.0 / d_r as f64)
            .hermitized();
        let mut keep_right = dims_c.labels();
        keep_right.push(dual_label(&lab_r));
        let rho_right = partial_trace(&sigma, &keep_right)?
            .scaled_re(1.0 / d_l as f64)
            .hermitized();
        let channel_left = Channel::new(
            Dims::single(&lab_l, d_l),
            dims_b.clone(),
            rho_left,
            &relaxed,
        )?;
        let channel_right = Channel::new(
            Dims::single(&lab_r, d_r),
            dims_c.clone(),
            rho_right,
            &relaxed,
        )?;

        let term = block_term(&channel_left, &channel_right, &dims_b, &dims_c)?;
        let emb = Mat::identity(d_b * d_c).kron(&isometry.transpose());
        rec = rec.add(&emb.mul(&term).mul(&emb.adjoint()));

        blocks.push(Block {
            left_dim: d_l,
            right_dim: d_r,
            isometry,
            channel_left,
            channel_right,
        });
    }

    let residual = rec.sub(cjp.mat()).frobenius_norm();
    if residual > tol.decomposition {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: format!("block reconstruction residual {residual:.3e} above tolerance"),
        });
    }
    sort_blocks(&mut blocks, d_a);
    Ok(Decomposition { blocks, residual })
}

/// CJ matrix of left (x) right reordered to (B part, C part, L*, R*).
fn block_term(
    channel_left: &Channel,
    channel_right: &Channel,
    dims_b: &Dims,
    dims_c: &Dims,
) -> Result<Mat> {
    let prod = tensor(channel_left.cj(), channel_right.cj())?;
    let mut order: Vec<String> = dims_b.labels();
    order.extend(dims_c.labels());
    order.extend(channel_left.in_dims().dual().labels());
    order.extend(channel_right.in_dims().dual().labels());
    Ok(prod.permuted(&order)?.into_mat())
}

/// Deterministic block order: by dimensions, then by the rounded diagonal of
/// the block projector on the input space.
fn sort_blocks(blocks: &mut [Block], d_a: usize) {
    let key = |b: &Block| -> (usize, usize, Vec<i64>) {
        let p = b.isometry.adjoint().mul(&b.isometry);
        let diag: Vec<i64> = (0..d_a)
            .map(|i| libm::round(p.at(i, i).re * 1e9) as i64)
            .collect();
        (b.left_dim, b.right_dim, diag)
    };
    blocks.sort_by_key(|x| key(x));
}

/// Kraus operators (d_out x d_in) of a channel given as its CJ operator.
fn kraus_from_cj(cj: &Mat, d_out: usize, d_in: usize, tol: &Tol) -> Result<Vec<Mat>> {
    let eig = eigh_op(
        &DenseOperator::from_mat(Dims::single("k", d_out * d_in), cj.clone())?,
        tol.decomposition,
    )?;
    let scale = eig.values.last().copied().unwrap_or(0.0).max(1.0);
    let mut out = Vec::new();
    for (idx, &lam) in eig.values.iter().enumerate() {
        if lam <= 1e-12 * scale {
            continue;
        }
        let s = libm::sqrt(lam);
        let mut k = Mat::zeros(d_out, d_in);
        for o in 0..d_out {
            for i in 0..d_in {
                k[(o, i)] = eig.vectors.at(o * d_in + i, idx) * Complex64::new(s, 0.0);
            }
        }
        out.push(k);
    }
    Ok(out)
}

/// Isometry columns of the left-side block unitary: |0,l> -> sum_k A_k|l>|k>.
fn left_block_unitary(kraus: &[Mat], d_out: usize, d_l: usize, d_anc: usize) -> Result<Mat> {
    let d_g = d_out * d_l;
    if kraus.len() > d_g {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: "more Kraus operators than garbage dimensions".to_string(),
        });
    }
    let n = d_anc * d_l;
    let mut start = Mat::zeros(n, d_l);
    for (k, a) in kraus.iter().enumerate() {
        for o in 0..d_out {
            for l in 0..d_l {
                start[(o * d_g + k, l)] = a[(o, l)];
            }
        }
    }
    Ok(start.complete_basis())
}

/// Right-side block unitary on (r, anc) coordinates: |r,0> -> sum_k B_k|r>|k>.
fn right_block_unitary(kraus: &[Mat], d_out: usize, d_r: usize, d_anc: usize) -> Result<Mat> {
    let d_h = d_out * d_r;
    if kraus.len() > d_h {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: "more Kraus operators than garbage dimensions".to_string(),
        });
    }
    let m = d_r * d_anc;
    // Build in (anc, r)-major column order so the pinned columns lead, then
    // permute columns back to (r, anc)-major.
    let mut start = Mat::zeros(m, d_r);
    for (k, b) in kraus.iter().enumerate() {
        for o in 0..d_out {
            for r in 0..d_r {
                start[(o * d_h + k, r)] = b[(o, r)];
            }
        }
    }
    let full = start.complete_basis();
    let mut w = Mat::zeros(m, m);
    for r in 0..d_r {
        for lc in 0..d_anc {
            for row in 0..m {
                w[(row, r * d_anc + lc)] = full.at(row, lc * d_r + r);
            }
        }
    }
    Ok(w)
}

/// Builds the commuting-unitary dilation realizing the decomposition: ancilla
/// states are |0><0| on spaces of dimension d_B^2 and d_C^2, and the unitary
/// factors act on disjoint legs of each block.
pub fn build_unitary_dilation(ch: &Channel, dec: &Decomposition, tol: &Tol) -> Result<Dilation> {
    if dec.blocks.is_empty() {
        return Err(CoreError::InvalidParameter {
            detail: "decomposition has no blocks".to_string(),
        });
    }
    let dims_b = dec.blocks[0].channel_left.out_dims().clone();
    let dims_c = dec.blocks[0].channel_right.out_dims().clone();
    let (d_b, d_c) = (dims_b.total_dim(), dims_c.total_dim());
    let d_a = ch.d_in();
    if dec.blocks.iter().map(|b| b.left_dim * b.right_dim).sum::<usize>() != d_a {
        return Err(CoreError::DimensionMismatch {
            context: "block dimensions do not sum to the input dimension".to_string(),
        });
    }
    let (d_lb, d_lc) = (d_b * d_b, d_c * d_c);
    let dim = d_lb * d_a * d_lc;
    let d_f = d_b * d_c * d_a;

    let all_labels: Vec<String> = ch
        .out_dims()
        .labels()
        .into_iter()
        .chain(ch.in_dims().labels())
        .collect();
    let lab_lb = fresh_label("LB", &all_labels);
    let lab_lc = fresh_label("LC", &all_labels);
    let lab_f = fresh_label("F", &all_labels);

    let mut t_map = Mat::zeros(dim, dim);
    let mut v_full = Mat::zeros(dim, dim);
    let mut w_full = Mat::zeros(dim, dim);
    let mut shuffle = Mat::zeros(dim, dim);
    let mut off_a = 0usize; // direct-sum offset in input-space coordinates
    let mut off_f = 0usize; // offset in the garbage factor
    for block in &dec.blocks {
        let (d_l, d_r) = (block.left_dim, block.right_dim);
        let (n_i, m_i) = (d_lb * d_l, d_r * d_lc);
        let off = d_lb * d_lc * off_a;
        let (d_g, d_h) = (d_b * d_l, d_c * d_r);

        let kraus_l = kraus_from_cj(block.channel_left.cj().mat(), d_b, d_l, tol)?;
        let kraus_r = kraus_from_cj(block.channel_right.cj().mat(), d_c, d_r, tol)?;
        let v_i = left_block_unitary(&kraus_l, d_b, d_l, d_lb)?;
        let w_i = right_block_unitary(&kraus_r, d_c, d_r, d_lc)?;

        // Input layout map: (lb, a, lc) -> block coords (lb, l, r, lc).
        for lb in 0..d_lb {
            for l in 0..d_l {
                for r in 0..d_r {
                    for lc in 0..d_lc {
                        let row = off + (lb * d_l + l) * m_i + r * d_lc + lc;
                        for a in 0..d_a {
                            let amp = block.isometry.at(l * d_r + r, a);
                            if amp != ZERO {
                                t_map[(row, (lb * d_a + a) * d_lc + lc)] = amp;
                            }
                        }
                    }
                }
            }
        }
        // V = V_i (x) 1 and W = 1 (x) W_i on this block's summand.
        for x in 0..n_i {
            for xp in 0..n_i {
                let amp = v_i.at(x, xp);
                if amp == ZERO {
                    continue;
                }
                for y in 0..m_i {
                    v_full[(off + x * m_i + y, off + xp * m_i + y)] = amp;
                }
            }
        }
        for y in 0..m_i {
            for yp in 0..m_i {
                let amp = w_i.at(y, yp);
                if amp == ZERO {
                    continue;
                }
                for x in 0..n_i {
                    w_full[(off + x * m_i + y, off + x * m_i + yp)] = amp;
                }
            }
        }
        // Output layout map: (b, g, c, h) -> (b, c, f).
        for b in 0..d_b {
            for g in 0..d_g {
                for c in 0..d_c {
                    for h in 0..d_h {
                        let dom = off + (b * d_g + g) * m_i + c * d_h + h;
                        let row = (b * d_c + c) * d_f + off_f + g * d_h + h;
                        shuffle[(row, dom)] = ONE;
                    }
                }
            }
        }
        off_a += d_l * d_r;
        off_f += d_g * d_h;
    }

    let commutator_norm = v_full.mul(&w_full).sub(&w_full.mul(&v_full)).frobenius_norm();
    let unitary = shuffle.mul(&w_full.mul(&v_full.mul(&t_map)));
    if unitary.isometry_deviation() > tol.decomposition {
        return Err(CoreError::DecompositionNumericallyDegenerate {
            detail: "assembled dilation is not unitary".to_string(),
        });
    }

    // Re-derive the channel: feed |0> on both ancillas, trace the garbage.
    let (dims_bp, dims_cp) = split_outputs(ch, &dims_b.labels(), &dims_c.labels())?;
    let cjp = ordered_cj(ch, &dims_bp, &dims_cp)?;
    let d_o = d_b * d_c;
    let mut rederived = Mat::zeros(d_o * d_a, d_o * d_a);
    for o in 0..d_o {
        for op in 0..d_o {
            for a in 0..d_a {
                for ap in 0..d_a {
                    let mut acc = ZERO;
                    for f in 0..d_f {
                        acc += unitary.at(o * d_f + f, a * d_lc)
                            * unitary.at(op * d_f + f, ap * d_lc).conj();
                    }
                    rederived[(o * d_a + a, op * d_a + ap)] = acc;
                }
            }
        }
    }
    let rederivation_residual = rederived.sub(cjp.mat()).frobenius_norm();

    let mut in_factors = vec![Dim::new(&lab_lb, d_lb)];
    in_factors.extend(ch.in_dims().factors().iter().cloned());
    in_factors.push(Dim::new(&lab_lc, d_lc));
    let in_dims = Dims::new(in_factors)?;
    let mut out_factors: Vec<Dim> = dims_b.factors().to_vec();
    out_factors.extend(dims_c.factors().iter().cloned());
    out_factors.push(Dim::new(&lab_f, d_f));
    let out_dims = Dims::new(out_factors)?;

    let anc = |label: &str, d: usize| -> DenseOperator {
        let mut s = DenseOperator::zeros(Dims::single(label, d));
        s.set(0, 0, ONE);
        s
    };
    Ok(Dilation {
        unitary,
        in_dims,
        out_dims,
        ancilla_left: lab_lb.clone(),
        ancilla_right: lab_lc.clone(),
        garbage: lab_f,
        ancilla_states: vec![anc(&lab_lb, d_lb), anc(&lab_lc, d_lc)],
        v: v_full,
        w: w_full,
        commutator_norm,
        rederivation_residual,
    })
}

/// Tests whether a unitary's marginal channel onto the `to` outputs ignores
/// the `from` inputs: the marginal CJ must factor as (rest) (x) identity on
/// the duals of `from`. Returns the verdict and the factoring residual.
pub fn check_no_causal_influence(
    u: &Mat,
    in_dims: &Dims,
    out_dims: &Dims,
    from: &[String],
    to: &[String],
    tol: &Tol,
) -> Result<(bool, f64)> {
    let dim = in_dims.total_dim();
    if out_dims.total_dim() != dim || u.nrows != dim || u.ncols != dim {
        return Err(CoreError::DimensionMismatch {
            context: "unitary must be square over matching input and output spaces".to_string(),
        });
    }
    if u.isometry_deviation() > tol.algebraic * (dim as f64) {
        return Err(CoreError::InvalidParameter {
            detail: "causal-influence check requires a unitary".to_string(),
        });
    }
    let to_dims = out_dims.subset_in_order(to)?;
    let from_dims = in_dims.subset_in_order(from)?;
    let d_to = to_dims.total_dim();
    let d_from = from_dims.total_dim();
    let d_oth = dim / d_to;

    // Gather the unitary's rows by kept output index.
    let positions: Vec<usize> = to
        .iter()
        .map(|l| out_dims.position(l))
        .collect::<Result<_>>()?;
    let mut gathered: Vec<Mat> = (0..d_to).map(|_| Mat::zeros(d_oth, dim)).collect();
    let mut counters = vec![0usize; d_to];
    let mut idx = vec![0usize; out_dims.len()];
    for row in 0..dim {
        out_dims.unravel(row, &mut idx);
        let mut t = 0usize;
        for &p in &positions {
            t = t * out_dims.factors()[p].d + idx[p];
        }
        let o = counters[t];
        counters[t] += 1;
        for col in 0..dim {
            gathered[t][(o, col)] = u.at(row, col);
        }
    }

    // Marginal CJ: M[(t,I),(t',J)] = sum_o U[(t,o),I] conj(U[(t',o),J]).
    let mut m = Mat::zeros(d_to * dim, d_to * dim);
    for t in 0..d_to {
        for tp in t..d_to {
            let c = gathered[tp].adjoint().mul(&gathered[t]);
            for i in 0..dim {
                for j in 0..dim {
                    let val = c[(j, i)];
                    m[(t * dim + i, tp * dim + j)] = val;
                    if tp != t {
                        m[(tp * dim + j, t * dim + i)] = val.conj();
                    }
                }
            }
        }
    }
    let mut m_factors: Vec<Dim> = to_dims.factors().to_vec();
    m_factors.extend(in_dims.dual().factors().iter().cloned());
    let m_dims = Dims::new(m_factors)?;
    let m_op = DenseOperator::from_mat(m_dims.clone(), m)?;

    let from_duals: Vec<String> = from_dims.dual().labels();
    let keep: Vec<String> = m_dims
        .labels()
        .into_iter()
        .filter(|l| !from_duals.contains(l))
        .collect();
    let reduced = partial_trace(&m_op, &keep)?.scaled_re(1.0 / d_from as f64);
    let embedded = reduced.embedded(&m_dims)?;
    let residual = m_op.sub(&embedded)?.frobenius_norm();
    let scale = m_op.frobenius_norm().max(1.0);
    Ok((residual <= tol.algebraic * scale * 10.0, residual))
}

/// Runs every applicable conditional-independence condition on a k-way output
/// partition and reports the verdicts side by side.
pub fn check_multipartite_qci(
    ch: &Channel,
    parts: &[Vec<String>],
    tol: &Tol,
    rng: &mut ChaCha12Rng,
) -> Result<QciReport> {
    if parts.len() < 2 {
        return Err(CoreError::InvalidParameter {
            detail: "need at least two output parts".to_string(),
        });
    }
    let flat = part_labels(parts);
    let full = ch.out_dims().subset_in_order(&flat)?;
    if full.len() != ch.out_dims().len() {
        return Err(CoreError::InvalidParameter {
            detail: "output parts must cover every output factor".to_string(),
        });
    }

    let marginals: Vec<DenseOperator> = parts
        .iter()
        .map(|p| Ok(ch.marginal_keep_outputs(p)?.into_cj()))
        .collect::<Result<_>>()?;
    let target = ch.cj().dims().clone();
    let refs: Vec<&DenseOperator> = marginals.iter().collect();
    let product = mul_embedded(&refs, &target)?;
    let factorisation_residual = ch.cj().sub(&product)?.frobenius_norm();
    let factorises = factorisation_residual <= tol.decomposition;

    let mut commutator_norm = 0.0f64;
    for i in 0..marginals.len() {
        for j in (i + 1)..marginals.len() {
            let ij = mul_embedded(&[&marginals[i], &marginals[j]], &target)?;
            let ji = mul_embedded(&[&marginals[j], &marginals[i]], &target)?;
            commutator_norm = commutator_norm.max(ij.sub(&ji)?.frobenius_norm());
        }
    }
    let commutes = commutator_norm <= 2.0 * tol.decomposition;

    let rho = ch.normalized_cj();
    let cond = ch.in_dims().dual().labels();
    let mut cmi_value = 0.0f64;
    for (l, part) in parts.iter().enumerate() {
        let rest: Vec<String> = parts
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != l)
            .flat_map(|(_, p)| p.iter().cloned())
            .collect();
        let v = conditional_mutual_information(&rho, part, &rest, &cond, tol)?;
        cmi_value = cmi_value.max(v);
        if parts.len() == 2 {
            break;
        }
    }

    let decomposition = match iterated_decomposition(ch, parts, tol, rng) {
        Ok(dec) => Some(dec),
        Err(CoreError::NotConditionallyIndependent { .. }) => None,
        Err(e) => return Err(e),
    };
    let dilation = match (&decomposition, parts.len()) {
        (Some(dec), 2) => Some(build_unitary_dilation(ch, dec, tol)?),
        _ => None,
    };

    Ok(QciReport {
        factorises,
        commutes,
        cmi_value,
        factorisation_residual,
        commutator_norm,
        decomposition,
        dilation,
    })
}

/// Splits off the first part, then recursively decomposes each block's right
/// channel over the remaining parts. Returns the first-level decomposition.
fn iterated_decomposition(
    ch: &Channel,
    parts: &[Vec<String>],
    tol: &Tol,
    rng: &mut ChaCha12Rng,
) -> Result<Decomposition> {
    let rest = part_labels(&parts[1..]);
    let dec = find_decomposition(ch, &parts[0], &rest, tol, rng)?;
    if parts.len() > 2 {
        for block in &dec.blocks {
            iterated_decomposition(&block.channel_right, &parts[1..], tol, rng)?;
        }
    }
    Ok(dec)
}

/// Channel copying the computational basis into every output: CJ is the sum
/// of |i..i><i..i| (x) |i><i| projectors.
pub fn incoherent_copy_channel(d: usize, out_labels: &[&str], in_label: &str) -> Result<Channel> {
    let (in_dims, out_dims, mut op) = copy_skeleton(d, out_labels, in_label)?;
    let k = out_labels.len();
    for i in 0..d {
        let mut row = 0usize;
        for _ in 0..=k {
            row = row * d + i;
        }
        op.set(row, row, ONE);
    }
    Channel::new(in_dims, out_dims, op, &Tol::default())
}

/// Isometry |i> -> |i..i> as a channel: coherences survive into every output.
pub fn coherent_copy_channel(d: usize, out_labels: &[&str], in_label: &str) -> Result<Channel> {
    let (in_dims, out_dims, mut op) = copy_skeleton(d, out_labels, in_label)?;
    let k = out_labels.len();
    for i in 0..d {
        for j in 0..d {
            let (mut row, mut col) = (0usize, 0usize);
            for _ in 0..=k {
                row = row * d + i;
                col = col * d + j;
            }
            op.set(row, col, ONE);
        }
    }
    Channel::new(in_dims, out_dims, op, &Tol::default())
}

fn copy_skeleton(
    d: usize,
    out_labels: &[&str],
    in_label: &str,
) -> Result<(Dims, Dims, DenseOperator)> {
    if out_labels.is_empty() {
        return Err(CoreError::InvalidParameter {
            detail: "copy channel needs at least one output".to_string(),
        });
    }
    let in_dims = Dims::single(in_label, d);
    let out_dims = Dims::new(out_labels.iter().map(|l| Dim::new(*l, d)).collect())?;
    let mut factors: Vec<Dim> = out_dims.factors().to_vec();
    factors.push(Dim::new(dual_label(in_label), d));
    let op = DenseOperator::zeros(Dims::new(factors)?);
    Ok((in_dims, out_dims, op))
}

/// Samples a channel satisfying the block-decomposition condition by
/// construction: random isometries onto each block and independent random
/// channels on the two legs, reassembled into one CJ operator.
pub fn random_conditionally_independent_channel(
    block_dims: &[(usize, usize)],
    d_b: usize,
    d_c: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Channel> {
    if block_dims.is_empty() {
        return Err(CoreError::InvalidParameter {
            detail: "need at least one block".to_string(),
        });
    }
    let d_a: usize = block_dims.iter().map(|(l, r)| l * r).sum();
    let scramble = crate::random::haar_unitary(d_a, rng);
    let dims_b = Dims::single("B", d_b);
    let dims_c = Dims::single("C", d_c);
    let mut rec = Mat::zeros(d_b * d_c * d_a, d_b * d_c * d_a);
    let mut off = 0usize;
    for &(d_l, d_r) in block_dims {
        let m = d_l * d_r;
        let mut iso = Mat::zeros(m, d_a);
        for row in 0..m {
            for a in 0..d_a {
                iso[(row, a)] = scramble.at(off + row, a);
            }
        }
        let ch_l = random_channel(&Dims::single("L", d_l), &dims_b, None, rng)?;
        let ch_r = random_channel(&Dims::single("R", d_r), &dims_c, None, rng)?;
        let term = block_term(&ch_l, &ch_r, &dims_b, &dims_c)?;
        let emb = Mat::identity(d_b * d_c).kron(&iso.transpose());
        rec = rec.add(&emb.mul(&term).mul(&emb.adjoint()));
        off += m;
    }
    let mut factors: Vec<Dim> = vec![Dim::new("B", d_b), Dim::new("C", d_c)];
    factors.push(Dim::new(dual_label("A"), d_a));
    let cj = DenseOperator::from_mat(Dims::new(factors)?, rec)?.hermitized();
    Channel::new(Dims::single("A", d_a), dims_b.joined(&dims_c)?, cj, &Tol::default())
}
