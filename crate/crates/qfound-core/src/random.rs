//! Seeded random constructions: Haar-distributed pure states and unitaries,
//! random channels and density operators. Deterministic given the seed.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channel::{cj_dims, Channel};
use crate::dense::{DenseOperator, PureState};
use crate::dims::Dims;
use crate::error::{CoreError, Result};
use crate::mat::{vec_norm, Mat, ZERO};

/// Fresh generator for a seed; every sampler below takes `&mut impl RngCore`
/// so callers can also share one stream.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform in (0, 1]: 53 random mantissa bits, zero mapped away so logs are
/// always finite.
fn uniform_open(rng: &mut impl RngCore) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    if u <= 0.0 {
        f64::MIN_POSITIVE
    } else {
        u
    }
}

/// Standard normal pair by Box-Muller.
pub fn normal_pair(rng: &mut impl RngCore) -> (f64, f64) {
    let u1 = uniform_open(rng);
    let u2 = uniform_open(rng);
    let r = libm::sqrt(-2.0 * libm::log(u1));
    let th = 2.0 * core::f64::consts::PI * u2;
    (r * libm::cos(th), r * libm::sin(th))
}

/// Standard complex Gaussian (unit variance per complex entry).
pub fn complex_normal(rng: &mut impl RngCore) -> Complex64 {
    let (re, im) = normal_pair(rng);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Vector of iid standard complex Gaussians.
pub fn ginibre_vector(d: usize, rng: &mut impl RngCore) -> Vec<Complex64> {
    (0..d).map(|_| complex_normal(rng)).collect()
}

/// Haar-distributed pure state: a normalized Ginibre vector.
pub fn haar_state_with(d: usize, rng: &mut impl RngCore) -> Result<Vec<Complex64>> {
    if d == 0 {
        return Err(CoreError::InvalidParameter {
            detail: "dimension 0".into(),
        });
    }
    let mut v = ginibre_vector(d, rng);
    let n = vec_norm(&v);
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(v)
}

/// Haar-distributed pure state from a seed, on a single factor labeled `q`.
pub fn haar_sample_pure(d: usize, seed: u64) -> Result<PureState> {
    let mut rng = rng_from_seed(seed);
    let amps = haar_state_with(d, &mut rng)?;
    PureState::new(Dims::single("q", d), amps)
}

/// Haar-distributed unitary: QR of a Ginibre matrix via twice-iterated
/// modified Gram-Schmidt; the positive-diagonal R normalization this produces
/// is exactly the Haar correction.
pub fn haar_unitary(d: usize, rng: &mut impl RngCore) -> Mat {
    let mut cols: Vec<Vec<Complex64>> = (0..d).map(|_| ginibre_vector(d, rng)).collect();
    for j in 0..d {
        for _ in 0..2 {
            for i in 0..j {
                let ip: Complex64 = cols[i]
                    .iter()
                    .zip(cols[j].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let (head, tail) = cols.split_at_mut(j);
                for (x, y) in tail[0].iter_mut().zip(head[i].iter()) {
                    *x -= ip * y;
                }
            }
        }
        let n = vec_norm(&cols[j]);
        for x in cols[j].iter_mut() {
            *x /= n;
        }
    }
    let mut u = Mat::zeros(d, d);
    for (j, col) in cols.iter().enumerate() {
        u.set_col(j, col);
    }
    u
}

/// Random full-rank density operator: normalized G G† with G Ginibre.
pub fn random_density(dims: &Dims, rng: &mut impl RngCore) -> DenseOperator {
    let d = dims.total_dim();
    let mut g = Mat::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            g[(r, c)] = complex_normal(rng);
        }
    }
    let gg = g.mul(&g.adjoint());
    let tr = gg.trace().re;
    DenseOperator::from_mat(dims.clone(), gg.scaled(Complex64::new(1.0 / tr, 0.0)))
        .expect("square by construction")
}

/// Random pure density operator on the given factors.
pub fn random_pure_density(dims: &Dims, rng: &mut impl RngCore) -> DenseOperator {
    let d = dims.total_dim();
    let v = haar_state_with(d, rng).expect("d > 0");
    DenseOperator::outer(dims.clone(), &v, &v).expect("lengths match")
}

/// Random channel with `kraus_rank` Kraus operators: Ginibre blocks
/// normalized so Σ K†K = 1. Full Kraus rank d_in·d_out when `kraus_rank` is
/// `None`.
pub fn random_channel(
    in_dims: &Dims,
    out_dims: &Dims,
    kraus_rank: Option<usize>,
    rng: &mut impl RngCore,
) -> Result<Channel> {
    let din = in_dims.total_dim();
    let dout = out_dims.total_dim();
    let k = kraus_rank.unwrap_or(din * dout).max(1);
    let mut kraus: Vec<Mat> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut g = Mat::zeros(dout, din);
        for r in 0..dout {
            for c in 0..din {
                g[(r, c)] = complex_normal(rng);
            }
        }
        kraus.push(g);
    }
    // T = Σ K†K, then K ← K T^{-1/2}.
    let mut t = Mat::zeros(din, din);
    for km in &kraus {
        t = t.add(&km.adjoint().mul(km));
    }
    let t_inv_sqrt = crate::spectral::spectral_map(&t, 1e-9, |x| {
        if x > 1e-14 {
            1.0 / libm::sqrt(x)
        } else {
            0.0
        }
    })?;
    for km in kraus.iter_mut() {
        *km = km.mul(&t_inv_sqrt);
    }
    channel_from_kraus(in_dims, out_dims, &kraus)
}

/// Builds the dual operator Σ_k vec(K_k) vec(K_k)† from Kraus operators.
pub fn channel_from_kraus(in_dims: &Dims, out_dims: &Dims, kraus: &[Mat]) -> Result<Channel> {
    let din = in_dims.total_dim();
    let dout = out_dims.total_dim();
    let dims = cj_dims(out_dims, in_dims)?;
    let mut cj = DenseOperator::zeros(dims);
    for k in kraus {
        if k.nrows != dout || k.ncols != din {
            return Err(CoreError::DimensionMismatch {
                context: "Kraus operator shape".into(),
            });
        }
        let mut w = vec![ZERO; din * dout];
        for o in 0..dout {
            for i in 0..din {
                w[o * din + i] = k.at(o, i);
            }
        }
        let term = DenseOperator::outer(cj.dims().clone(), &w, &w)?;
        cj = cj.add(&term)?;
    }
    Channel::new_unchecked(in_dims.clone(), out_dims.clone(), cj)
}
