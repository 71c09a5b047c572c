use thiserror::Error;

/// Errors raised by geometric constructions, measurements and deformations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate lens: the two ball centers coincide")]
    DegenerateLens,
    #[error("numerical degeneracy at node {node}: {reason}")]
    NumericalDegeneracy { node: usize, reason: String },
    #[error("no strict point: max smallest principal curvature {max_kappa} does not exceed lambda {lambda}")]
    NoStrictPoint { max_kappa: f64, lambda: f64 },
    #[error("trivial body: {0}")]
    TrivialBody(String),
    #[error("radial graph failure at node {node}: {reason}")]
    GraphFailure { node: usize, reason: String },
    #[error("volume constraint has no bracket: {0}")]
    NoBracket(String),
    #[error("convexity exit: min kappa {min_kappa} < lambda {lambda} - tol {tol}")]
    ConvexityExit { min_kappa: f64, lambda: f64, tol: f64 },
    #[error("enclosing ball margin violation: rho {rho} >= R {radius}")]
    MarginViolation { rho: f64, radius: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl GeomError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        GeomError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, GeomError>;

impl GeomError {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            GeomError::Domain(_) => "Domain",
            GeomError::DegenerateLens => "DegenerateLens",
            GeomError::NumericalDegeneracy { .. } => "NumericalDegeneracy",
            GeomError::NoStrictPoint { .. } => "NoStrictPoint",
            GeomError::TrivialBody(_) => "TrivialBody",
            GeomError::GraphFailure { .. } => "GraphFailure",
            GeomError::NoBracket(_) => "NoBracket",
            GeomError::ConvexityExit { .. } => "ConvexityExit",
            GeomError::MarginViolation { .. } => "MarginViolation",
            GeomError::Invalid(_) => "Invalid",
        }
    }
}
