use thiserror::Error;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum FeecError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("index {index} out of bounds (len {len})")]
    OutOfBounds { index: usize, len: usize },

    #[error("unsupported element: {0}")]
    UnsupportedElement(String),

    #[error("element construction failed: {0}")]
    Unisolvence(String),

    #[error("unsupported quadrature degree {degree} (max {max})")]
    UnsupportedQuadrature { degree: usize, max: usize },

    #[error("singular jacobian in pullback")]
    SingularJacobian,

    #[error("invalid space pairing: {0}")]
    InvalidPair(String),

    #[error("point {0:?} lies outside the mesh")]
    PointOutsideMesh(Vec<f64>),

    #[error("singular matrix: {reason}")]
    SingularMatrix {
        reason: String,
        near_null: Option<Vec<f64>>,
    },

    #[error("perturbed operator not invertible at this discretization: {reason}")]
    NotInvertible {
        reason: String,
        near_null: Option<Vec<f64>>,
    },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    EigenConvergence { iterations: usize, residual: f64 },

    #[error("harmonic space has dimension {found}, expected {expected} from the box cohomology")]
    TopologyCheck { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("missing evaluator: {0}")]
    MissingEvaluator(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid pair id {0} (expected 1..=4)")]
    InvalidPairId(usize),

    #[error(transparent)]
    Expr(#[from] crate::coefex::ExprError),
}

pub type Result<T, E = FeecError> = std::result::Result<T, E>;
