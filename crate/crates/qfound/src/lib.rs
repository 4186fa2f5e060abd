//! File formats, output encoding, and command implementations behind the
//! `qfound` binary. Exit-code policy: 0 success, 1 domain failure (paradox,
//! invalid model, infeasible request), 2 I/O or schema failure.

use qfound_core::CoreError;

pub mod commands;
pub mod emit;
pub mod schema;
pub mod selftest;

#[derive(Debug)]
pub enum AppError {
    /// Failure of the modeled physics; reported structurally, exit 1.
    Domain { name: &'static str, detail: String },
    /// Malformed input file or value; exit 2.
    Schema(String),
    /// Filesystem or encoder failure; exit 2.
    Io(String),
}

impl AppError {
    pub fn schema(detail: String) -> Self {
        AppError::Schema(detail)
    }

    pub fn io(detail: String) -> Self {
        AppError::Io(detail)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Domain { .. } => 1,
            AppError::Schema(_) | AppError::Io(_) => 2,
        }
    }
}

pub fn error_name(e: &CoreError) -> &'static str {
    match e {
        CoreError::DimensionMismatch { .. } => "DimensionMismatch",
        CoreError::LabelCollision { .. } => "LabelCollision",
        CoreError::LabelNotFound { .. } => "LabelNotFound",
        CoreError::NotHermitian { .. } => "NotHermitian",
        CoreError::NotPositive { .. } => "NotPositive",
        CoreError::NotAChannel { .. } => "NotAChannel",
        CoreError::ConvergenceFailure { .. } => "ConvergenceFailure",
        CoreError::DynamicalParadox => "DynamicalParadox",
        CoreError::NotConditionallyIndependent { .. } => "NotConditionallyIndependent",
        CoreError::DecompositionNumericallyDegenerate { .. } => {
            "DecompositionNumericallyDegenerate"
        }
        CoreError::ModelInvalid { .. } => "ModelInvalid",
        CoreError::NotDecohered { .. } => "NotDecohered",
        CoreError::ZeroProbabilityOutcome { .. } => "ZeroProbabilityOutcome",
        CoreError::InvalidParameter { .. } => "InvalidParameter",
        CoreError::TriplesNotAntiDistinguishable { .. } => "TriplesNotAntiDistinguishable",
        CoreError::GenerationBudgetExceeded { .. } => "GenerationBudgetExceeded",
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        if e.is_domain() {
            AppError::Domain {
                name: error_name(&e),
                detail: e.to_string(),
            }
        } else {
            AppError::Schema(format!("{} ({e})", error_name(&e)))
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Domain { name, detail } => write!(f, "{name}: {detail}"),
            AppError::Schema(d) => write!(f, "schema error: {d}"),
            AppError::Io(d) => write!(f, "io error: {d}"),
        }
    }
}

impl std::error::Error for AppError {}
