//! Spectral functionals of density operators: entropy, conditional mutual
//! information, fidelity and trace distance. All logarithms are base 2.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dense::{partial_trace, DenseOperator};
use crate::error::{CoreError, Result};
use crate::spectral::{eigh, sqrt_psd};
use crate::tol::Tol;

fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// Von Neumann entropy −Σ λ log₂ λ with the convention 0·log 0 = 0.
/// Eigenvalues in (−tol.algebraic, 0) are clipped to zero; anything more
/// negative is an error.
pub fn von_neumann_entropy(rho: &DenseOperator, tol: &Tol) -> Result<f64> {
    let eig = eigh(rho.mat(), tol.algebraic.max(1e-9))?;
    let mut s = 0.0;
    for &lam in &eig.values {
        if lam < -tol.algebraic {
            return Err(CoreError::NotPositive {
                min_eigenvalue: lam,
            });
        }
        if lam > 0.0 {
            s -= lam * log2(lam);
        }
    }
    // −0.0 from an exactly-pure spectrum reads badly downstream.
    Ok(if s == 0.0 { 0.0 } else { s })
}

/// Quantum conditional mutual information
/// I(A:B|C) = S(AC) + S(BC) − S(C) − S(ABC), evaluated on the reduced state
/// over A∪B∪C (factors outside the three groups are traced out first).
/// The three label groups must be pairwise disjoint. C may be empty, giving
/// the plain mutual information.
pub fn conditional_mutual_information(
    rho: &DenseOperator,
    part_a: &[String],
    part_b: &[String],
    part_c: &[String],
    tol: &Tol,
) -> Result<f64> {
    for (x, y) in [(part_a, part_b), (part_a, part_c), (part_b, part_c)] {
        for l in x {
            if y.contains(l) {
                return Err(CoreError::LabelCollision { label: l.clone() });
            }
        }
    }
    let mut all: Vec<String> = Vec::new();
    all.extend_from_slice(part_a);
    all.extend_from_slice(part_b);
    all.extend_from_slice(part_c);
    for l in &all {
        rho.dims().position(l)?;
    }
    let abc = partial_trace(rho, &all)?;

    let mut ac: Vec<String> = part_a.to_vec();
    ac.extend_from_slice(part_c);
    let mut bc: Vec<String> = part_b.to_vec();
    bc.extend_from_slice(part_c);

    let s_ac = von_neumann_entropy(&partial_trace(&abc, &ac)?, tol)?;
    let s_bc = von_neumann_entropy(&partial_trace(&abc, &bc)?, tol)?;
    let s_c = if part_c.is_empty() {
        0.0
    } else {
        von_neumann_entropy(&partial_trace(&abc, part_c)?, tol)?
    };
    let s_abc = von_neumann_entropy(&abc, tol)?;
    Ok(s_ac + s_bc - s_c - s_abc)
}

/// Fidelity F(ρ,σ) = Tr √(√ρ σ √ρ) ∈ [0,1].
pub fn fidelity(rho: &DenseOperator, sigma: &DenseOperator, tol: &Tol) -> Result<f64> {
    if rho.dims() != sigma.dims() {
        return Err(CoreError::DimensionMismatch {
            context: alloc::format!(
                "fidelity of states on different spaces: {:?} vs {:?}",
                rho.dims().labels(),
                sigma.dims().labels()
            ),
        });
    }
    let sr = sqrt_psd(rho.mat(), tol.algebraic)?;
    let inner = sr.mul(sigma.mat()).mul(&sr);
    let s = sqrt_psd(&inner.hermitized(), tol.decomposition)?;
    Ok(s.trace().re.clamp(0.0, 1.0))
}

/// Trace distance D(ρ,σ) = ½ Tr|ρ−σ| ∈ [0,1].
pub fn trace_distance(rho: &DenseOperator, sigma: &DenseOperator, tol: &Tol) -> Result<f64> {
    if rho.dims() != sigma.dims() {
        return Err(CoreError::DimensionMismatch {
            context: "trace distance of states on different spaces".into(),
        });
    }
    let diff = rho.sub(sigma)?;
    let eig = eigh(diff.mat(), tol.algebraic.max(1e-9))?;
    Ok(0.5 * eig.values.iter().map(|v| libm::fabs(*v)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dims::Dims;
    use crate::mat::ZERO;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tol {
        Tol::default()
    }

    #[test]
    fn entropy_of_pure_and_mixed() {
        let dims = Dims::of(&[("A", 2)]);
        let mut pure = DenseOperator::zeros(dims.clone());
        pure.set(0, 0, c(1.0, 0.0));
        assert_eq!(von_neumann_entropy(&pure, &tol()).unwrap(), 0.0);

        let mut mixed = DenseOperator::zeros(dims);
        mixed.set(0, 0, c(0.5, 0.0));
        mixed.set(1, 1, c(0.5, 0.0));
        assert!((von_neumann_entropy(&mixed, &tol()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_clips_tiny_negative_eigenvalues() {
        let dims = Dims::of(&[("A", 2)]);
        let mut rho = DenseOperator::zeros(dims);
        rho.set(0, 0, c(1.0, 0.0));
        rho.set(1, 1, c(-1e-12, 0.0));
        assert_eq!(von_neumann_entropy(&rho, &tol()).unwrap(), 0.0);
        let mut bad = DenseOperator::zeros(Dims::of(&[("A", 2)]));
        bad.set(0, 0, c(1.0, 0.0));
        bad.set(1, 1, c(-1e-3, 0.0));
        assert!(matches!(
            von_neumann_entropy(&bad, &tol()),
            Err(CoreError::NotPositive { .. })
        ));
    }

    #[test]
    fn cmi_distinguishes_coherent_from_incoherent_correlation() {
        let dims = Dims::of(&[("A", 2), ("B", 2), ("C", 2)]);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mut v = alloc::vec![ZERO; 8];
        v[0] = c(s, 0.0);
        v[7] = c(s, 0.0);
        // (|000⟩+|111⟩)/√2: conditioning cannot break the coherence,
        // I(A:B|C) = 1.
        let coherent = DenseOperator::outer(dims.clone(), &v, &v).unwrap();
        let cmi = conditional_mutual_information(
            &coherent,
            &["A".into()],
            &["B".into()],
            &["C".into()],
            &tol(),
        )
        .unwrap();
        assert!((cmi - 1.0).abs() < 1e-12);

        // The classical mixture ½(|000⟩⟨000| + |111⟩⟨111|) is Markov:
        // I(A:B|C) = 0 while I(A:B) = 1.
        let mut mix = DenseOperator::zeros(dims);
        mix.set(0, 0, c(0.5, 0.0));
        mix.set(7, 7, c(0.5, 0.0));
        let cmi0 = conditional_mutual_information(
            &mix,
            &["A".into()],
            &["B".into()],
            &["C".into()],
            &tol(),
        )
        .unwrap();
        assert!(cmi0.abs() < 1e-12);
        let mi = conditional_mutual_information(&mix, &["A".into()], &["B".into()], &[], &tol())
            .unwrap();
        assert!((mi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cmi_rejects_overlapping_groups() {
        let rho = DenseOperator::identity(Dims::of(&[("A", 2), ("B", 2)])).scaled_re(0.25);
        assert!(matches!(
            conditional_mutual_information(&rho, &["A".into()], &["A".into()], &[], &tol()),
            Err(CoreError::LabelCollision { .. })
        ));
    }

    #[test]
    fn fidelity_and_trace_distance_agree_on_known_pair() {
        let dims = Dims::of(&[("A", 2)]);
        let mut rho = DenseOperator::zeros(dims.clone());
        rho.set(0, 0, c(1.0, 0.0));
        let mut sigma = DenseOperator::zeros(dims);
        sigma.set(0, 0, c(0.5, 0.0));
        sigma.set(1, 1, c(0.5, 0.0));
        // Pure vs maximally mixed qubit: F = 1/√2, D = 1/2.
        let f = fidelity(&rho, &sigma, &tol()).unwrap();
        let d = trace_distance(&rho, &sigma, &tol()).unwrap();
        assert!((f - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((d - 0.5).abs() < 1e-12);
        // Fuchs–van de Graaf upper bound.
        assert!(d <= libm::sqrt(1.0 - f * f) + 1e-12);
    }

    #[test]
    fn fidelity_of_equal_states_is_one() {
        let dims = Dims::of(&[("A", 3)]);
        let mut rho = DenseOperator::zeros(dims);
        rho.set(0, 0, c(0.2, 0.0));
        rho.set(1, 1, c(0.3, 0.0));
        rho.set(2, 2, c(0.5, 0.0));
        assert!((fidelity(&rho, &rho, &tol()).unwrap() - 1.0).abs() < 1e-9);
        assert!(trace_distance(&rho, &rho, &tol()).unwrap() < 1e-12);
    }
}
