//! Numerical tolerances shared across the crate.

/// Tolerance pair separating exact-arithmetic checks from spectral ones.
///
/// `algebraic` guards identities that hold to rounding error (trace
/// preservation, commutators, unitarity); `decomposition` guards anything
/// downstream of an eigendecomposition (eigenvalue clustering, block
/// reconstruction), which loses a few digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    pub algebraic: f64,
    pub decomposition: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            algebraic: 1e-9,
            decomposition: 1e-6,
        }
    }
}

impl Tol {
    /// Scales both members, keeping their ratio. Used by the CLI `--tol` flag.
    pub fn scaled(factor: f64) -> Self {
        let base = Tol::default();
        Tol {
            algebraic: base.algebraic * factor,
            decomposition: base.decomposition * factor,
        }
    }
}

/// Mass below this is treated as zero when reading probability supports.
pub const SUPPORT_EPS: f64 = 1e-12;
