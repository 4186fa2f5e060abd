//! Error taxonomy. Domain failures (paradoxes, invalid models) are separated
//! from structural misuse (dimension or label errors) so callers can map them
//! to distinct exit codes.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, CoreError>;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Operand shapes or factor dimensions do not line up.
    DimensionMismatch { context: String },
    /// Two tensor factors carry the same label.
    LabelCollision { label: String },
    /// A referenced factor label does not exist.
    LabelNotFound { label: String },
    /// Operator expected Hermitian beyond tolerance.
    NotHermitian { deviation: f64 },
    /// Operator expected positive semidefinite; most negative eigenvalue given.
    NotPositive { min_eigenvalue: f64 },
    /// Operator fails the channel normalization conditions.
    NotAChannel { detail: String },
    /// An iterative solver exhausted its budget.
    ConvergenceFailure { detail: String },
    /// Post-selected evolution annihilates the input state.
    DynamicalParadox,
    /// Channel does not factorize across the requested output split.
    NotConditionallyIndependent { residual: f64 },
    /// Block structure exists but could not be resolved at tolerance.
    DecompositionNumericallyDegenerate { detail: String },
    /// Causal model violates its structural preconditions.
    ModelInvalid { violations: Vec<String> },
    /// Channels are not diagonal in the declared product bases.
    NotDecohered { off_diagonal_mass: f64 },
    /// Conditioning on an outcome of probability ~0.
    ZeroProbabilityOutcome { probability: f64 },
    /// Parameter outside its documented domain.
    InvalidParameter { detail: String },
    /// Fingerprint set contains a triple failing anti-distinguishability.
    TriplesNotAntiDistinguishable { detail: String },
    /// Random search exhausted its attempt budget.
    GenerationBudgetExceeded { attempts: u64 },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DimensionMismatch { context } => {
                write!(f, "dimension mismatch: {context}")
            }
            CoreError::LabelCollision { label } => {
                write!(f, "tensor factor label collision: {label:?}")
            }
            CoreError::LabelNotFound { label } => write!(f, "no tensor factor labeled {label:?}"),
            CoreError::NotHermitian { deviation } => {
                write!(f, "operator is not Hermitian (deviation {deviation:.3e})")
            }
            CoreError::NotPositive { min_eigenvalue } => write!(
                f,
                "operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})"
            ),
            CoreError::NotAChannel { detail } => write!(f, "not a valid channel: {detail}"),
            CoreError::ConvergenceFailure { detail } => {
                write!(f, "solver failed to converge: {detail}")
            }
            CoreError::DynamicalParadox => {
                write!(f, "dynamical paradox: post-selection annihilates the input")
            }
            CoreError::NotConditionallyIndependent { residual } => write!(
                f,
                "channel is not conditionally independent (factorization residual {residual:.3e})"
            ),
            CoreError::DecompositionNumericallyDegenerate { detail } => {
                write!(f, "decomposition numerically degenerate: {detail}")
            }
            CoreError::ModelInvalid { violations } => {
                write!(f, "invalid causal model: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            CoreError::NotDecohered { off_diagonal_mass } => write!(
                f,
                "channels are not diagonal in the declared bases (off-diagonal mass {off_diagonal_mass:.3e})"
            ),
            CoreError::ZeroProbabilityOutcome { probability } => write!(
                f,
                "cannot condition on outcome of probability {probability:.3e}"
            ),
            CoreError::InvalidParameter { detail } => write!(f, "invalid parameter: {detail}"),
            CoreError::TriplesNotAntiDistinguishable { detail } => {
                write!(f, "triple fails anti-distinguishability: {detail}")
            }
            CoreError::GenerationBudgetExceeded { attempts } => {
                write!(f, "generation budget exceeded after {attempts} attempts")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

impl CoreError {
    /// True for failures of the modeled physics rather than of the call.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            CoreError::DynamicalParadox
                | CoreError::NotConditionallyIndependent { .. }
                | CoreError::DecompositionNumericallyDegenerate { .. }
                | CoreError::ModelInvalid { .. }
                | CoreError::NotDecohered { .. }
                | CoreError::ZeroProbabilityOutcome { .. }
                | CoreError::TriplesNotAntiDistinguishable { .. }
                | CoreError::ConvergenceFailure { .. }
                | CoreError::GenerationBudgetExceeded { .. }
        )
    }
}
