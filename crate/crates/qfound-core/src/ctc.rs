//! Closed-timelike-curve simulators in standard interaction form: a
//! chronology-respecting register CR meets a chronology-violating register
//! CV in one unitary coupling. Three consistency prescriptions are covered:
//! self-consistent fixed points on CV, post-selected teleportation, and the
//! transition-probability rule together with its Monte Carlo estimator.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::algebra::span_basis;
use crate::dense::{DenseOperator, PureState};
use crate::dims::Dims;
use crate::entropy::{trace_distance, von_neumann_entropy};
use crate::error::{CoreError, Result};
use crate::mat::{inner, Mat, ONE, ZERO};
use crate::random::{haar_state_with, rng_from_seed};
use crate::spectral::{eigh, linear_solve, null_space, spectral_map};
use crate::tol::Tol;

/// Post-selection weights at or below this are treated as exactly zero.
const PARADOX_THRESHOLD: f64 = 1e-12;
/// Trace-norm residual at which a fixed-point iterate is accepted.
const FIXED_POINT_TARGET: f64 = 1e-12;
/// Iteration budget for the noisy fixed-point recursion.
const ITER_BUDGET: usize = 1_000_000;
/// Gradient-norm threshold declaring the entropy maximizer stationary.
const STATIONARITY: f64 = 1e-8;

/// One unitary U on CR ⊗ CV plus the state fed into CR. The factor order of
/// `u` is always CR factors first, CV factors second.
#[derive(Debug, Clone)]
pub struct StandardFormCircuit {
    u: DenseOperator,
    cr_dims: Dims,
    cv_dims: Dims,
    input: DenseOperator,
}

impl StandardFormCircuit {
    pub fn new(
        u: DenseOperator,
        cr_dims: Dims,
        cv_dims: Dims,
        input: DenseOperator,
        tol: &Tol,
    ) -> Result<Self> {
        let joint = cr_dims.joined(&cv_dims)?;
        if u.dims() != &joint {
            return Err(CoreError::DimensionMismatch {
                context: format!(
                    "coupling factors {:?} must be the CR factors followed by the CV factors",
                    u.dims().labels()
                ),
            });
        }
        let dev = u.mat().isometry_deviation();
        if dev > 100.0 * tol.algebraic {
            return Err(CoreError::InvalidParameter {
                detail: format!("coupling deviates from unitarity by {dev:.3e}"),
            });
        }
        if input.dims() != &cr_dims {
            return Err(CoreError::DimensionMismatch {
                context: "input state must live on the chronology-respecting register".to_string(),
            });
        }
        check_state(&input, tol)?;
        Ok(StandardFormCircuit {
            u,
            cr_dims,
            cv_dims,
            input,
        })
    }

    /// Same coupling, different input state.
    pub fn with_input(&self, input: DenseOperator, tol: &Tol) -> Result<Self> {
        StandardFormCircuit::new(
            self.u.clone(),
            self.cr_dims.clone(),
            self.cv_dims.clone(),
            input,
            tol,
        )
    }

    pub fn u(&self) -> &DenseOperator {
        &self.u
    }

    pub fn cr_dims(&self) -> &Dims {
        &self.cr_dims
    }

    pub fn cv_dims(&self) -> &Dims {
        &self.cv_dims
    }

    pub fn input(&self) -> &DenseOperator {
        &self.input
    }

    pub fn d_cr(&self) -> usize {
        self.cr_dims.total_dim()
    }

    pub fn d_cv(&self) -> usize {
        self.cv_dims.total_dim()
    }
}

/// Whether the self-consistent state on CV is unique or one representative
/// of a continuous family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uniqueness {
    Unique,
    Family,
}

/// A self-consistent solution: the state on CV, the emitted state on CR,
/// the achieved fixed-point residual in trace norm, and the entropy (bits)
/// of the CV state.
#[derive(Debug, Clone)]
pub struct DctcSolution {
    pub tau: DenseOperator,
    pub rho_f: DenseOperator,
    pub fixed_point_residual: f64,
    pub entropy_bits: f64,
    pub uniqueness: Uniqueness,
}

/// Output of the transition-probability rule: the emitted state plus the
/// normalized weights of its post-selected and maximally-mixed-CV terms.
#[derive(Debug, Clone)]
pub struct TctcResult {
    pub rho_f: DenseOperator,
    pub p_term_weight: f64,
    pub mix_term_weight: f64,
}

fn check_state(op: &DenseOperator, tol: &Tol) -> Result<()> {
    let dev = op.mat().hermiticity_deviation();
    if dev > 10.0 * tol.algebraic {
        return Err(CoreError::NotHermitian { deviation: dev });
    }
    let tr = op.mat().trace();
    if (tr.re - 1.0).abs() > 100.0 * tol.algebraic || tr.im.abs() > 100.0 * tol.algebraic {
        return Err(CoreError::InvalidParameter {
            detail: format!("state trace {:.6} must be 1", tr.re),
        });
    }
    let lo = min_eig(op.mat())?;
    if lo < -10.0 * tol.algebraic {
        return Err(CoreError::NotPositive { min_eigenvalue: lo });
    }
    Ok(())
}

fn min_eig(m: &Mat) -> Result<f64> {
    let eig = eigh(&m.hermitized(), 1e-6)?;
    Ok(eig.values.first().copied().unwrap_or(0.0))
}

/// Trace norm of a Hermitian matrix (hermitized first to absorb roundoff).
fn trace_norm(m: &Mat) -> Result<f64> {
    let eig = eigh(&m.hermitized(), 1e-6)?;
    Ok(eig.values.iter().map(|v| libm::fabs(*v)).sum())
}

/// Eigenvalue-clips to the positive cone and renormalizes to unit trace.
/// Rejects anything more negative than `neg_tol`.
fn clipped_state(m: &Mat, neg_tol: f64) -> Result<Mat> {
    let eig = eigh(&m.hermitized(), 1e-6)?;
    let lo = eig.values.first().copied().unwrap_or(0.0);
    if lo < -neg_tol {
        return Err(CoreError::NotPositive { min_eigenvalue: lo });
    }
    let d = m.nrows;
    let mut out = Mat::zeros(d, d);
    let mut tr = 0.0;
    for k in 0..d {
        let lam = eig.values[k].max(0.0);
        if lam == 0.0 {
            continue;
        }
        tr += lam;
        for r in 0..d {
            for c in 0..d {
                out[(r, c)] += eig.vectors.at(r, k) * eig.vectors.at(c, k).conj() * lam;
            }
        }
    }
    if tr < 1e-12 {
        return Err(CoreError::InvalidParameter {
            detail: "state has vanishing trace after positivity clipping".to_string(),
        });
    }
    Ok(out.scaled(Complex64::new(1.0 / tr, 0.0)))
}

fn entropy_bits_of(m: &Mat) -> Result<f64> {
    let eig = eigh(&m.hermitized(), 1e-6)?;
    let mut s = 0.0;
    for &lam in &eig.values {
        if lam < -1e-9 {
            return Err(CoreError::NotPositive {
                min_eigenvalue: lam,
            });
        }
        if lam > 0.0 {
            s -= lam * libm::log2(lam);
        }
    }
    Ok(if s == 0.0 { 0.0 } else { s })
}

/// One round trip through the coupling: U (ρ_i ⊗ τ) U†.
fn conjugate_through(c: &StandardFormCircuit, tau: &Mat) -> Mat {
    let u = c.u.mat();
    u.mul(&c.input.mat().kron(tau)).mul(&u.adjoint())
}

/// Reduced state on CV after one round trip: the map whose fixed points are
/// the self-consistent CV states.
fn g_apply(c: &StandardFormCircuit, tau: &Mat) -> Mat {
    let dr = c.d_cr();
    let dv = c.d_cv();
    let y = conjugate_through(c, tau);
    let mut out = Mat::zeros(dv, dv);
    for r in 0..dr {
        for i in 0..dv {
            for j in 0..dv {
                out[(i, j)] += y[(r * dv + i, r * dv + j)];
            }
        }
    }
    out
}

fn trace_out_cv(y: &Mat, dr: usize, dv: usize) -> Mat {
    let mut out = Mat::zeros(dr, dr);
    for k in 0..dv {
        for i in 0..dr {
            for j in 0..dr {
                out[(i, j)] += y[(i * dv + k, j * dv + k)];
            }
        }
    }
    out
}

/// Round trip followed by depolarizing noise of strength `noise` on CV.
fn noisy_g_apply(c: &StandardFormCircuit, tau: &Mat, noise: f64) -> Mat {
    let dv = c.d_cv();
    let g = g_apply(c, tau);
    let mixed = Mat::identity(dv).scaled(Complex64::new(noise / dv as f64, 0.0));
    g.scaled(Complex64::new(1.0 - noise, 0.0)).add(&mixed)
}

/// Matrix of the round-trip map on row-major vectorized CV operators.
fn g_superoperator(c: &StandardFormCircuit) -> Mat {
    let dv = c.d_cv();
    let mut s = Mat::zeros(dv * dv, dv * dv);
    for col in 0..dv * dv {
        let mut e = Mat::zeros(dv, dv);
        e[(col / dv, col % dv)] = ONE;
        let g = g_apply(c, &e);
        for r in 0..dv {
            for cc in 0..dv {
                s[(r * dv + cc, col)] = g[(r, cc)];
            }
        }
    }
    s
}

fn p_mat(c: &StandardFormCircuit) -> Mat {
    let dr = c.d_cr();
    let dv = c.d_cv();
    let u = c.u.mat();
    let mut p = Mat::zeros(dr, dr);
    for k in 0..dv {
        for i in 0..dr {
            for j in 0..dr {
                p[(i, j)] += u.at(i * dv + k, j * dv + k);
            }
        }
    }
    p
}

/// The chronology-respecting block Tr_CV(U). Linear but generally neither
/// unitary nor trace-preserving; its operator norm is at most d_CV.
pub fn p_operator(c: &StandardFormCircuit) -> DenseOperator {
    DenseOperator::from_mat(c.cr_dims.clone(), p_mat(c))
        .expect("CR block is square by construction")
}

fn finish_dctc(
    c: &StandardFormCircuit,
    tau: Mat,
    residual: f64,
    uniqueness: Uniqueness,
    tol: &Tol,
) -> Result<DctcSolution> {
    let rho_f = trace_out_cv(&conjugate_through(c, &tau), c.d_cr(), c.d_cv()).hermitized();
    let tau_op = DenseOperator::from_mat(c.cv_dims.clone(), tau)?;
    let entropy_bits = von_neumann_entropy(&tau_op, tol)?;
    Ok(DctcSolution {
        tau: tau_op,
        rho_f: DenseOperator::from_mat(c.cr_dims.clone(), rho_f)?,
        fixed_point_residual: residual,
        entropy_bits,
        uniqueness,
    })
}

/// Exact fixed point of the noisy round trip, from the linear consistency
/// equation (1−ε)G(τ) + ε·1/d = τ. Strict contraction makes it unique.
fn noisy_fixed_point(c: &StandardFormCircuit, noise: f64) -> Result<Mat> {
    let dv = c.d_cv();
    let s = g_superoperator(c);
    let a = Mat::identity(dv * dv).sub(&s.scaled(Complex64::new(1.0 - noise, 0.0)));
    let mut b = vec![ZERO; dv * dv];
    for k in 0..dv {
        b[k * dv + k] = Complex64::new(noise / dv as f64, 0.0);
    }
    let x = linear_solve(&a, &b)?;
    let mut tau = Mat::zeros(dv, dv);
    for r in 0..dv {
        for cc in 0..dv {
            tau[(r, cc)] = x[r * dv + cc];
        }
    }
    Ok(tau.hermitized())
}

/// Frobenius projection onto the affine slice anchor + span(directions).
/// `directions` must be orthonormal traceless Hermitian matrices.
fn project_to_slice(x: &Mat, anchor: &Mat, directions: &[Mat]) -> Mat {
    let diff = x.sub(anchor);
    let mut out = anchor.clone();
    for b in directions {
        let coeff = inner(&b.a, &diff.a).re;
        out = out.add(&b.scaled(Complex64::new(coeff, 0.0)));
    }
    out.hermitized()
}

/// Finds a density operator in the fixed-point slice by alternating
/// projections between the slice and the positive cone, seeded with the
/// slightly-noisy fixed point (strictly positive, near the slice).
fn feasible_fixed_state(
    c: &StandardFormCircuit,
    anchor: &Mat,
    directions: &[Mat],
) -> Result<Mat> {
    let mut x = noisy_fixed_point(c, 1e-3)?;
    for _ in 0..20_000 {
        let on_slice = project_to_slice(&x, anchor, directions);
        if min_eig(&on_slice)? >= -1e-12 {
            return clipped_state(&on_slice, 1e-9);
        }
        x = clipped_state(&on_slice, f64::INFINITY)?;
    }
    Err(CoreError::ConvergenceFailure {
        detail: "alternating projections onto the fixed-point set did not converge".to_string(),
    })
}

/// Projected gradient ascent of the von Neumann entropy over the affine
/// fixed-point slice, with positivity kept by backtracking. The entropy is
/// strictly concave there, so the stationary point is the unique maximizer.
fn max_entropy_on_slice(start: Mat, directions: &[Mat]) -> Result<Mat> {
    let mut x = start;
    let mut s = entropy_bits_of(&x)?;
    let mut step = 1.0f64;
    for _ in 0..500 {
        let lg = spectral_map(&x.hermitized(), 1e-6, |lam| libm::log2(lam.max(1e-18)))?;
        let g: Vec<f64> = directions.iter().map(|b| -inner(&b.a, &lg.a).re).collect();
        let gn = libm::sqrt(g.iter().map(|v| v * v).sum());
        if gn <= STATIONARITY {
            return Ok(x);
        }
        let mut dir = Mat::zeros(x.nrows, x.ncols);
        for (j, b) in directions.iter().enumerate() {
            dir = dir.add(&b.scaled(Complex64::new(g[j], 0.0)));
        }
        let mut moved = false;
        let mut alpha = step;
        while alpha >= 1e-14 {
            let cand = x.add(&dir.scaled(Complex64::new(alpha, 0.0))).hermitized();
            if min_eig(&cand)? >= -1e-13 {
                let sc = entropy_bits_of(&cand)?;
                if sc >= s + 1e-4 * alpha * gn * gn {
                    x = cand;
                    s = sc;
                    step = (alpha * 2.0).min(1.0);
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            return Err(CoreError::ConvergenceFailure {
                detail: format!("entropy ascent stalled at gradient norm {gn:.3e}"),
            });
        }
    }
    let lg = spectral_map(&x.hermitized(), 1e-6, |lam| libm::log2(lam.max(1e-18)))?;
    let gn = libm::sqrt(
        directions
            .iter()
            .map(|b| {
                let v = -inner(&b.a, &lg.a).re;
                v * v
            })
            .sum(),
    );
    if gn <= STATIONARITY {
        Ok(x)
    } else {
        Err(CoreError::ConvergenceFailure {
            detail: format!("entropy ascent ended above stationarity, gradient norm {gn:.3e}"),
        })
    }
}

/// Solves the self-consistency condition on CV. With `noise` > 0 the noisy
/// round trip is a strict contraction and the unique fixed point is obtained
/// from its linear consistency equation; with `noise` = 0 the full fixed
/// space is computed and the maximum-entropy fixed state is returned,
/// flagged `Family` when the fixed-point set has positive dimension.
pub fn dctc_evolve(c: &StandardFormCircuit, noise: f64, tol: &Tol) -> Result<DctcSolution> {
    if !noise.is_finite() || !(0.0..1.0).contains(&noise) {
        return Err(CoreError::InvalidParameter {
            detail: format!("noise must lie in [0, 1), got {noise}"),
        });
    }
    let dv = c.d_cv();
    if noise > 0.0 {
        let tau = clipped_state(&noisy_fixed_point(c, noise)?, 1e-9)?;
        let residual = trace_norm(&tau.sub(&noisy_g_apply(c, &tau, noise)))?;
        return finish_dctc(c, tau, residual, Uniqueness::Unique, tol);
    }

    let s = g_superoperator(c);
    let a = s.sub(&Mat::identity(dv * dv));
    // Cutoff sits above the eigensolver's absolute noise floor and far below
    // the spectral gap of the round-trip map.
    let ns = null_space(&a, tol.decomposition.max(tol.algebraic))?;
    let mut cands: Vec<Mat> = Vec::new();
    for j in 0..ns.ncols {
        let mut x = Mat::zeros(dv, dv);
        for r in 0..dv {
            for cc in 0..dv {
                x[(r, cc)] = ns.at(r * dv + cc, j);
            }
        }
        // The fixed space is closed under adjoints, so the Hermitian and
        // anti-Hermitian parts of a fixed operator are fixed separately.
        cands.push(x.hermitized());
        cands.push(x.sub(&x.adjoint()).scaled(Complex64::new(0.0, -0.5)));
    }
    let herm = span_basis(&cands);
    let traces: Vec<f64> = herm.iter().map(|h| h.trace().re).collect();
    let pivot = (0..herm.len()).max_by(|&i, &j| {
        traces[i]
            .abs()
            .partial_cmp(&traces[j].abs())
            .expect("traces are finite")
    });
    let pivot = match pivot {
        Some(p) if traces[p].abs() > 1e-9 => p,
        _ => {
            return Err(CoreError::ConvergenceFailure {
                detail: "no normalizable fixed point found on the violating register".to_string(),
            })
        }
    };
    let anchor = herm[pivot]
        .scaled(Complex64::new(1.0 / traces[pivot], 0.0))
        .hermitized();
    let mut traceless: Vec<Mat> = Vec::new();
    for (k, h) in herm.iter().enumerate() {
        if k == pivot {
            continue;
        }
        traceless.push(h.sub(&herm[pivot].scaled(Complex64::new(traces[k] / traces[pivot], 0.0))));
    }
    let directions = span_basis(&traceless);

    if directions.is_empty() {
        let tau = clipped_state(&anchor, 1e-8)?;
        let residual = trace_norm(&tau.sub(&g_apply(c, &tau)))?;
        return finish_dctc(c, tau, residual, Uniqueness::Unique, tol);
    }
    let start = feasible_fixed_state(c, &anchor, &directions)?;
    let tau = clipped_state(&max_entropy_on_slice(start, &directions)?, 1e-8)?;
    let residual = trace_norm(&tau.sub(&g_apply(c, &tau)))?;
    finish_dctc(c, tau, residual, Uniqueness::Family, tol)
}

/// Same fixed point as `dctc_evolve` with positive noise, but reached by
/// plain iteration from a caller-chosen starting state. Exists so that
/// uniqueness can be exercised: any two starts must meet at the same state.
pub fn dctc_evolve_from(
    c: &StandardFormCircuit,
    noise: f64,
    start: &DenseOperator,
    tol: &Tol,
) -> Result<DctcSolution> {
    if !noise.is_finite() || !(noise > 0.0 && noise < 1.0) {
        return Err(CoreError::InvalidParameter {
            detail: format!("iterative solve needs noise in (0, 1), got {noise}"),
        });
    }
    if start.dims() != &c.cv_dims {
        return Err(CoreError::DimensionMismatch {
            context: "starting state must live on the chronology-violating register".to_string(),
        });
    }
    check_state(start, tol)?;
    let mut tau = start.mat().clone();
    for _ in 0..ITER_BUDGET {
        let next = noisy_g_apply(c, &tau, noise);
        let residual = trace_norm(&tau.sub(&next))?;
        if residual <= FIXED_POINT_TARGET {
            return finish_dctc(c, tau, residual, Uniqueness::Unique, tol);
        }
        tau = next;
    }
    Err(CoreError::ConvergenceFailure {
        detail: format!(
            "fixed-point iteration at noise {noise:.3e} missed {FIXED_POINT_TARGET:.0e} within {ITER_BUDGET} steps"
        ),
    })
}

/// Post-selected evolution ρ ↦ PρP†/Tr(PρP†) with P = Tr_CV(U). Fails with
/// a dynamical paradox when the post-selection weight vanishes.
pub fn pctc_evolve(c: &StandardFormCircuit) -> Result<DenseOperator> {
    let p = p_mat(c);
    let out = p.mul(c.input.mat()).mul(&p.adjoint());
    let w = out.trace().re;
    if w <= PARADOX_THRESHOLD {
        return Err(CoreError::DynamicalParadox);
    }
    DenseOperator::from_mat(
        c.cr_dims.clone(),
        out.scaled(Complex64::new(1.0 / w, 0.0)).hermitized(),
    )
}

/// Transition-probability evolution: the normalized sum of the post-selected
/// term PρP† and d_CV times the round trip with maximally mixed CV. Total on
/// every valid circuit since the second term always carries weight d_CV.
pub fn tctc_evolve(c: &StandardFormCircuit) -> TctcResult {
    let dr = c.d_cr();
    let dv = c.d_cv();
    let p = p_mat(c);
    let rho = c.input.mat();
    let post = p.mul(rho).mul(&p.adjoint());
    let w_post = post.trace().re.max(0.0);
    let mixed = Mat::identity(dv).scaled(Complex64::new(1.0 / dv as f64, 0.0));
    let u = c.u.mat();
    let y = u.mul(&rho.kron(&mixed)).mul(&u.adjoint());
    let mix = trace_out_cv(&y, dr, dv).scaled(Complex64::new(dv as f64, 0.0));
    let w_mix = mix.trace().re;
    let z = w_post + w_mix;
    let rho_f = post
        .add(&mix)
        .scaled(Complex64::new(1.0 / z, 0.0))
        .hermitized();
    TctcResult {
        rho_f: DenseOperator::from_mat(c.cr_dims.clone(), rho_f)
            .expect("output lives on the CR factors"),
        p_term_weight: w_post / z,
        mix_term_weight: w_mix / z,
    }
}

/// Monte Carlo estimate of the transition-probability output: averages
/// ⟨φ|U|φ⟩ ρ ⟨φ|U|φ⟩† over Haar-random pure CV states φ (sampled as
/// normalized complex Gaussian vectors) and normalizes by the averaged
/// transition weight.
pub fn tctc_montecarlo(
    c: &StandardFormCircuit,
    samples: usize,
    seed: u64,
) -> Result<DenseOperator> {
    if samples == 0 {
        return Err(CoreError::InvalidParameter {
            detail: "Monte Carlo estimate needs at least one sample".to_string(),
        });
    }
    let dr = c.d_cr();
    let dv = c.d_cv();
    let u = c.u.mat();
    let rho = c.input.mat();
    let mut rng = rng_from_seed(seed);
    let mut num = Mat::zeros(dr, dr);
    let mut den = 0.0;
    for _ in 0..samples {
        let phi = haar_state_with(dv, &mut rng)?;
        let mut uphi = Mat::zeros(dr, dr);
        for r in 0..dr {
            for rp in 0..dr {
                let mut acc = ZERO;
                for k in 0..dv {
                    for l in 0..dv {
                        acc += phi[k].conj() * u.at(r * dv + k, rp * dv + l) * phi[l];
                    }
                }
                uphi[(r, rp)] = acc;
            }
        }
        let out = uphi.mul(rho).mul(&uphi.adjoint());
        den += out.trace().re;
        num = num.add(&out);
    }
    if den <= 1e-300 {
        return Err(CoreError::ConvergenceFailure {
            detail: "every sampled transition weight vanished".to_string(),
        });
    }
    DenseOperator::from_mat(
        c.cr_dims.clone(),
        num.scaled(Complex64::new(1.0 / den, 0.0)).hermitized(),
    )
}

/// Sampled ratio of the two distinct fourth moments of Haar-random state
/// amplitudes, E|φ_a|⁴ / E|φ_a|²|φ_b|². The exact value is 2 in every
/// dimension, which pins the sampler's measure.
pub fn haar_fourth_moment_ratio(dim: usize, samples: usize, seed: u64) -> Result<f64> {
    if dim < 2 || samples == 0 {
        return Err(CoreError::InvalidParameter {
            detail: "moment ratio needs dimension at least 2 and at least one sample".to_string(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let pairs = (dim * (dim - 1) / 2) as f64;
    let mut quartic = 0.0;
    let mut cross = 0.0;
    for _ in 0..samples {
        let phi = haar_state_with(dim, &mut rng)?;
        let p: Vec<f64> = phi.iter().map(|z| z.norm_sqr()).collect();
        let mut q = 0.0;
        let mut x = 0.0;
        for a in 0..dim {
            q += p[a] * p[a];
            for b in (a + 1)..dim {
                x += p[a] * p[b];
            }
        }
        quartic += q / dim as f64;
        cross += x / pairs;
    }
    if cross <= 0.0 {
        return Err(CoreError::ConvergenceFailure {
            detail: "cross moment vanished over the whole sample".to_string(),
        });
    }
    Ok(quartic / cross)
}

/// Trace distance of the transition-probability outputs for two pure inputs
/// (left), against the contraction bound √(1 − |⟨a|b⟩|²/(d_CV+1)²) (right).
/// The left value never exceeds the right beyond numerical tolerance.
pub fn tctc_distinguishability_bound(
    c: &StandardFormCircuit,
    a: &PureState,
    b: &PureState,
    tol: &Tol,
) -> Result<(f64, f64)> {
    if a.dims() != &c.cr_dims || b.dims() != &c.cr_dims {
        return Err(CoreError::DimensionMismatch {
            context: "pure inputs must live on the chronology-respecting register".to_string(),
        });
    }
    for s in [a, b] {
        if libm::fabs(s.norm() - 1.0) > 1e-9 {
            return Err(CoreError::InvalidParameter {
                detail: "pure inputs must be normalized".to_string(),
            });
        }
    }
    let out_a = tctc_evolve(&c.with_input(a.density(), tol)?).rho_f;
    let out_b = tctc_evolve(&c.with_input(b.density(), tol)?).rho_f;
    let lhs = trace_distance(&out_a, &out_b, tol)?;
    let dv = c.d_cv() as f64;
    let overlap = a.inner(b).norm_sqr();
    let rhs = libm::sqrt((1.0 - overlap / ((dv + 1.0) * (dv + 1.0))).max(0.0));
    Ok((lhs, rhs))
}

/// A bit flip on a qubit CV with a trivial CR: the minimal circuit whose
/// post-selected evolution annihilates every input.
pub fn grandfather_circuit() -> StandardFormCircuit {
    let cr = Dims::single("R", 1);
    let cv = Dims::single("V", 2);
    let mut x = Mat::zeros(2, 2);
    x[(0, 1)] = ONE;
    x[(1, 0)] = ONE;
    let u = DenseOperator::from_mat(
        cr.joined(&cv).expect("distinct labels"),
        x,
    )
    .expect("coupling dims match");
    let input = DenseOperator::from_mat(cr.clone(), Mat::identity(1)).expect("scalar state");
    StandardFormCircuit::new(u, cr, cv, input, &Tol::default())
        .expect("builtin circuit is valid by construction")
}

/// Book-and-copy circuit on n-bit registers B (book), M (copy) and CV:
/// |b, m, c⟩ ↦ |b⊕c, c, m⊕b⊕c⟩, i.e. the CV value is XORed into the book,
/// the book is copied out, and the copy is swapped onto the CV. Defaults to
/// the all-zeros input state.
pub fn unproved_theorem_circuit(n_bits: usize) -> Result<StandardFormCircuit> {
    if n_bits == 0 || n_bits > 8 {
        return Err(CoreError::InvalidParameter {
            detail: format!("register width must be between 1 and 8 bits, got {n_bits}"),
        });
    }
    let n = 1usize << n_bits;
    let cr = Dims::of(&[("B", n), ("M", n)]);
    let cv = Dims::single("V", n);
    let dim = n * n * n;
    let mut u = Mat::zeros(dim, dim);
    for b in 0..n {
        for m in 0..n {
            for cbit in 0..n {
                let col = (b * n + m) * n + cbit;
                let row = ((b ^ cbit) * n + cbit) * n + (m ^ b ^ cbit);
                u[(row, col)] = ONE;
            }
        }
    }
    let u = DenseOperator::from_mat(cr.joined(&cv)?, u)?;
    let input = PureState::basis(cr.clone(), 0)?.density();
    StandardFormCircuit::new(u, cr, cv, input, &Tol::default())
}

/// CR and CV of equal dimension coupled by a swap; the post-selected block
/// is the identity. Defaults to the |0⟩ input state.
pub fn swap_circuit(d: usize) -> Result<StandardFormCircuit> {
    if d == 0 {
        return Err(CoreError::InvalidParameter {
            detail: "swap circuit needs dimension at least 1".to_string(),
        });
    }
    let cr = Dims::single("R", d);
    let cv = Dims::single("V", d);
    let mut u = Mat::zeros(d * d, d * d);
    for r in 0..d {
        for cbit in 0..d {
            u[(cbit * d + r, r * d + cbit)] = ONE;
        }
    }
    let u = DenseOperator::from_mat(cr.joined(&cv)?, u)?;
    let input = PureState::basis(cr.clone(), 0)?.density();
    StandardFormCircuit::new(u, cr, cv, input, &Tol::default())
}

/// Uncoupled registers: U = 1. Every CV state is self-consistent. Defaults
/// to the |0⟩ input state.
pub fn identity_circuit(d_cr: usize, d_cv: usize) -> Result<StandardFormCircuit> {
    if d_cr == 0 || d_cv == 0 {
        return Err(CoreError::InvalidParameter {
            detail: "identity circuit needs dimensions at least 1".to_string(),
        });
    }
    let cr = Dims::single("R", d_cr);
    let cv = Dims::single("V", d_cv);
    let u = DenseOperator::from_mat(cr.joined(&cv)?, Mat::identity(d_cr * d_cv))?;
    let input = PureState::basis(cr.clone(), 0)?.density();
    StandardFormCircuit::new(u, cr, cv, input, &Tol::default())
}

/// Looks up a named example circuit. `n_bits` applies only to
/// `unproved_theorem` (default 1).
pub fn builtin_circuit(name: &str, n_bits: Option<usize>) -> Result<StandardFormCircuit> {
    if name == "unproved_theorem" {
        return unproved_theorem_circuit(n_bits.unwrap_or(1));
    }
    if n_bits.is_some() {
        return Err(CoreError::InvalidParameter {
            detail: format!("circuit {name:?} takes no bit-width parameter"),
        });
    }
    match name {
        "grandfather" => Ok(grandfather_circuit()),
        "swap" => swap_circuit(2),
        "identity" => identity_circuit(2, 2),
        _ => Err(CoreError::InvalidParameter {
            detail: format!("unknown builtin circuit {name:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::vec_norm;
    use crate::random::{haar_sample_pure, haar_unitary, random_density};

    fn tol() -> Tol {
        Tol::default()
    }

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_circuit(d_cr: usize, d_cv: usize, seed: u64) -> StandardFormCircuit {
        let mut rng = rng_from_seed(seed);
        let cr = Dims::single("R", d_cr);
        let cv = Dims::single("V", d_cv);
        let u = DenseOperator::from_mat(
            cr.joined(&cv).unwrap(),
            haar_unitary(d_cr * d_cv, &mut rng),
        )
        .unwrap();
        let input = random_density(&cr, &mut rng);
        StandardFormCircuit::new(u, cr, cv, input, &tol()).unwrap()
    }

    fn assert_close(got: Complex64, want: Complex64, eps: f64) {
        assert!(
            (got - want).norm() <= eps,
            "expected {want}, got {got} (eps {eps})"
        );
    }

    #[test]
    fn standard_form_rejects_malformed_circuits() {
        let cr = Dims::single("R", 2);
        let cv = Dims::single("V", 2);
        let joint = cr.joined(&cv).unwrap();
        let input = PureState::basis(cr.clone(), 0).unwrap().density();

        let half = DenseOperator::from_mat(joint.clone(), Mat::identity(4).scaled(c64(0.5, 0.0)))
            .unwrap();
        assert!(matches!(
            StandardFormCircuit::new(half, cr.clone(), cv.clone(), input.clone(), &tol()),
            Err(CoreError::InvalidParameter { .. })
        ));

        let u = DenseOperator::from_mat(joint.clone(), Mat::identity(4)).unwrap();
        let wrong_space = PureState::basis(cv.clone(), 0).unwrap().density();
        assert!(matches!(
            StandardFormCircuit::new(u.clone(), cr.clone(), cv.clone(), wrong_space, &tol()),
            Err(CoreError::DimensionMismatch { .. })
        ));

        let mut bad = Mat::zeros(2, 2);
        bad[(0, 0)] = c64(1.5, 0.0);
        bad[(1, 1)] = c64(-0.5, 0.0);
        let bad = DenseOperator::from_mat(cr.clone(), bad).unwrap();
        assert!(matches!(
            StandardFormCircuit::new(u, cr.clone(), cv, bad, &tol()),
            Err(CoreError::NotPositive { .. })
        ));

        let clash = Dims::single("R", 2);
        let u2 = DenseOperator::from_mat(Dims::of(&[("R", 2), ("V", 2)]), Mat::identity(4))
            .unwrap();
        assert!(matches!(
            StandardFormCircuit::new(
                u2,
                cr,
                clash,
                PureState::basis(Dims::single("R", 2), 0).unwrap().density(),
                &tol()
            ),
            Err(CoreError::LabelCollision { .. })
        ));
    }

    #[test]
    fn p_operator_traces_out_the_violating_register() {
        let p = p_operator(&swap_circuit(2).unwrap());
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { ONE } else { ZERO };
                assert_close(p.at(r, c), want, 1e-12);
            }
        }

        let p = p_operator(&grandfather_circuit());
        assert_close(p.at(0, 0), ZERO, 1e-12);

        // Book-and-copy: P|b,m⟩ = [m = b] Σ_c |b⊕c, c⟩.
        let p = p_operator(&unproved_theorem_circuit(1).unwrap());
        assert_close(p.at(0, 0), ONE, 1e-12);
        assert_close(p.at(3, 0), ONE, 1e-12);
        assert_close(p.at(1, 1), ZERO, 1e-12);
        assert_close(p.at(2, 3), ONE, 1e-12);
        assert_close(p.at(1, 3), ONE, 1e-12);

        // Action-norm bound ‖Pv‖ ≤ d_CV ‖v‖ on a generic circuit.
        let c = random_circuit(2, 3, 5);
        let p = p_mat(&c);
        let mut rng = rng_from_seed(6);
        for _ in 0..10 {
            let v = crate::random::ginibre_vector(2, &mut rng);
            let pv = p.matvec(&v);
            assert!(vec_norm(&pv) <= 3.0 * vec_norm(&v) + 1e-12);
        }
    }

    #[test]
    fn dctc_solves_worked_fixed_points() {
        // Uncoupled registers: every CV state is fixed, entropy picks 1/d.
        let sol = dctc_evolve(&identity_circuit(2, 2).unwrap(), 0.0, &tol()).unwrap();
        assert_eq!(sol.uniqueness, Uniqueness::Family);
        assert!(sol.fixed_point_residual <= 1e-10);
        assert!((sol.entropy_bits - 1.0).abs() <= 1e-9);
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { c64(0.5, 0.0) } else { ZERO };
                assert_close(sol.tau.at(r, c), want, 1e-9);
            }
        }
        assert_close(sol.rho_f.at(0, 0), ONE, 1e-9);

        // Bit flip on CV: fixed states are (1 + r X)/2, maximum entropy at 1/2.
        let sol = dctc_evolve(&grandfather_circuit(), 0.0, &tol()).unwrap();
        assert_eq!(sol.uniqueness, Uniqueness::Family);
        assert_close(sol.tau.at(0, 0), c64(0.5, 0.0), 1e-9);
        assert_close(sol.tau.at(1, 1), c64(0.5, 0.0), 1e-9);
        assert!((sol.entropy_bits - 1.0).abs() <= 1e-9);

        // Book-and-copy from |00⟩: diagonal family, maximum entropy at 1/2,
        // emitted state an even classical mixture of the two books.
        let sol = dctc_evolve(&unproved_theorem_circuit(1).unwrap(), 0.0, &tol()).unwrap();
        assert_eq!(sol.uniqueness, Uniqueness::Family);
        assert_close(sol.tau.at(0, 0), c64(0.5, 0.0), 1e-9);
        assert_close(sol.tau.at(0, 1), ZERO, 1e-9);
        assert_close(sol.rho_f.at(0, 0), c64(0.5, 0.0), 1e-9);
        assert_close(sol.rho_f.at(3, 3), c64(0.5, 0.0), 1e-9);
        assert_close(sol.rho_f.at(0, 3), ZERO, 1e-9);
        assert!(sol.fixed_point_residual <= 1e-10);
    }

    #[test]
    fn dctc_random_circuits_converge_and_agree_across_starts() {
        for seed in 0..10 {
            let c = random_circuit(2, 2, 100 + seed);
            let sol = dctc_evolve(&c, 0.0, &tol()).unwrap();
            assert!(
                sol.fixed_point_residual <= 1e-8,
                "residual {} at seed {seed}",
                sol.fixed_point_residual
            );
            assert_close(sol.tau.mat().trace(), ONE, 1e-9);
        }

        // Noisy round trips are strict contractions: iteration from any two
        // starts meets the exact linear-equation solution.
        let mut rng = rng_from_seed(77);
        for seed in 0..3 {
            let c = random_circuit(2, 2, 200 + seed);
            let exact = dctc_evolve(&c, 0.05, &tol()).unwrap();
            assert_eq!(exact.uniqueness, Uniqueness::Unique);
            let cv = c.cv_dims().clone();
            let a = dctc_evolve_from(&c, 0.05, &random_density(&cv, &mut rng), &tol()).unwrap();
            let b = dctc_evolve_from(&c, 0.05, &random_density(&cv, &mut rng), &tol()).unwrap();
            assert!(trace_distance(&a.tau, &b.tau, &tol()).unwrap() <= 1e-7);
            assert!(trace_distance(&a.tau, &exact.tau, &tol()).unwrap() <= 1e-7);
        }

        // Depolarizing noise drives the uncoupled fixed point to 1/d exactly.
        let sol = dctc_evolve(&identity_circuit(2, 2).unwrap(), 0.05, &tol()).unwrap();
        assert_close(sol.tau.at(0, 0), c64(0.5, 0.0), 1e-12);
        assert_close(sol.tau.at(0, 1), ZERO, 1e-12);
    }

    #[test]
    fn dctc_rejects_bad_noise_and_reports_exhausted_budgets() {
        let c = grandfather_circuit();
        assert!(matches!(
            dctc_evolve(&c, 1.0, &tol()),
            Err(CoreError::InvalidParameter { .. })
        ));
        assert!(matches!(
            dctc_evolve(&c, -0.1, &tol()),
            Err(CoreError::InvalidParameter { .. })
        ));

        // At noise 1e-9 the bit-flip component decays far too slowly for the
        // iteration budget.
        let start = PureState::basis(Dims::single("V", 2), 0).unwrap().density();
        assert!(matches!(
            dctc_evolve_from(&c, 1e-9, &start, &tol()),
            Err(CoreError::ConvergenceFailure { .. })
        ));
        assert!(matches!(
            dctc_evolve_from(&c, 0.0, &start, &tol()),
            Err(CoreError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn pctc_reproduces_worked_examples() {
        assert!(matches!(
            pctc_evolve(&grandfather_circuit()),
            Err(CoreError::DynamicalParadox)
        ));

        // Book-and-copy from |00⟩ post-selects onto (|00⟩ + |11⟩)/√2.
        let rho = pctc_evolve(&unproved_theorem_circuit(1).unwrap()).unwrap();
        for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert_close(rho.at(r, c), c64(0.5, 0.0), 1e-12);
        }
        assert_close(rho.at(1, 1), ZERO, 1e-12);

        // A swap coupling acts as the identity map on any input.
        let mut rng = rng_from_seed(3);
        let cr = Dims::single("R", 2);
        let input = random_density(&cr, &mut rng);
        let c = swap_circuit(2)
            .unwrap()
            .with_input(input.clone(), &tol())
            .unwrap();
        let rho = pctc_evolve(&c).unwrap();
        for r in 0..2 {
            for cc in 0..2 {
                assert_close(rho.at(r, cc), input.at(r, cc), 1e-10);
            }
        }
    }

    #[test]
    fn tctc_reproduces_worked_examples() {
        // Book-and-copy from |00⟩: equal parts post-selected Bell projector
        // and classical mixture.
        let out = tctc_evolve(&unproved_theorem_circuit(1).unwrap());
        assert!((out.p_term_weight - 0.5).abs() <= 1e-12);
        assert!((out.mix_term_weight - 0.5).abs() <= 1e-12);
        assert_close(out.rho_f.at(0, 0), c64(0.5, 0.0), 1e-12);
        assert_close(out.rho_f.at(0, 3), c64(0.25, 0.0), 1e-12);
        assert_close(out.rho_f.at(3, 0), c64(0.25, 0.0), 1e-12);
        assert_close(out.rho_f.at(3, 3), c64(0.5, 0.0), 1e-12);
        assert_close(out.rho_f.at(1, 1), ZERO, 1e-12);

        // A paradoxical post-selection contributes nothing but the map stays
        // total: only the mixture term survives.
        let out = tctc_evolve(&grandfather_circuit());
        assert!(out.p_term_weight.abs() <= 1e-12);
        assert!((out.mix_term_weight - 1.0).abs() <= 1e-12);
        assert_close(out.rho_f.at(0, 0), ONE, 1e-12);

        // Swap coupling: output is a convex mix of the input and the
        // depolarized input, z = 1 + d.
        let cr = Dims::single("R", 2);
        let plus = PureState::new(cr.clone(), vec![c64(0.5f64.sqrt(), 0.0); 2]).unwrap();
        let c = swap_circuit(2)
            .unwrap()
            .with_input(plus.density(), &tol())
            .unwrap();
        let out = tctc_evolve(&c);
        assert!((out.p_term_weight - 1.0 / 3.0).abs() <= 1e-12);
        assert_close(out.rho_f.at(0, 0), c64(0.5, 0.0), 1e-12);
        assert_close(out.rho_f.at(0, 1), c64(1.0 / 6.0, 0.0), 1e-12);
    }

    #[test]
    fn tctc_montecarlo_matches_the_closed_form() {
        let c = unproved_theorem_circuit(1).unwrap();
        let exact = tctc_evolve(&c).rho_f;
        let mc = tctc_montecarlo(&c, 60_000, 7).unwrap();
        let mut worst = 0.0f64;
        for r in 0..4 {
            for cc in 0..4 {
                worst = worst.max((mc.at(r, cc) - exact.at(r, cc)).norm());
            }
        }
        assert!(worst <= 2e-2, "worst deviation {worst}");

        // One-dimensional CV: the estimator is deterministic.
        let c = identity_circuit(2, 1).unwrap();
        let mc = tctc_montecarlo(&c, 3, 9).unwrap();
        assert_close(mc.at(0, 0), ONE, 1e-12);
        assert_close(mc.at(1, 1), ZERO, 1e-12);

        assert!(matches!(
            tctc_montecarlo(&c, 0, 1),
            Err(CoreError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn haar_sampler_has_the_right_fourth_moments() {
        let ratio = haar_fourth_moment_ratio(4, 120_000, 11).unwrap();
        assert!((ratio - 2.0).abs() <= 0.04, "ratio {ratio}");
    }

    #[test]
    fn distinguishability_never_beats_the_contraction_bound() {
        let c = unproved_theorem_circuit(1).unwrap();
        let cr = c.cr_dims().clone();

        let a = PureState::basis(cr.clone(), 0).unwrap();
        let b = PureState::basis(cr.clone(), 1).unwrap();
        let (lhs, rhs) = tctc_distinguishability_bound(&c, &a, &b, &tol()).unwrap();
        assert!((rhs - 1.0).abs() <= 1e-12);
        assert!(lhs <= rhs + 1e-9);

        let (lhs, rhs) = tctc_distinguishability_bound(&c, &a, &a, &tol()).unwrap();
        assert!(lhs <= 1e-12);
        assert!((rhs - (1.0f64 - 1.0 / 9.0).sqrt()).abs() <= 1e-12);

        let g = random_circuit(2, 2, 21);
        for seed in 0..10 {
            let a = haar_sample_pure(2, 300 + seed).unwrap();
            let a = PureState::new(g.cr_dims().clone(), a.amplitudes().to_vec()).unwrap();
            let b = haar_sample_pure(2, 400 + seed).unwrap();
            let b = PureState::new(g.cr_dims().clone(), b.amplitudes().to_vec()).unwrap();
            let (lhs, rhs) = tctc_distinguishability_bound(&g, &a, &b, &tol()).unwrap();
            assert!(lhs <= rhs + 1e-9, "lhs {lhs} rhs {rhs} seed {seed}");
        }

        let wrong = PureState::basis(Dims::single("B", 2), 0).unwrap();
        assert!(matches!(
            tctc_distinguishability_bound(&c, &wrong, &wrong, &tol()),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn builtin_lookup_validates_names() {
        assert!(builtin_circuit("grandfather", None).is_ok());
        let c = builtin_circuit("unproved_theorem", Some(2)).unwrap();
        assert_eq!(c.d_cr(), 16);
        assert_eq!(c.d_cv(), 4);
        assert!(matches!(
            builtin_circuit("warp", None),
            Err(CoreError::InvalidParameter { .. })
        ));
        assert!(matches!(
            builtin_circuit("swap", Some(1)),
            Err(CoreError::InvalidParameter { .. })
        ));
        assert!(matches!(
            unproved_theorem_circuit(0),
            Err(CoreError::InvalidParameter { .. })
        ));
    }
}
