use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("{what}: expected {expected}, found {found}")]
    Arity {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size cap exceeded: {requested} entries requested, cap is {cap}")]
    SizeCap { requested: usize, cap: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing block {0}")]
    MissingBlock(String),

    #[error("redundant rows {first} and {other} disagree by {diff:e} after condensation")]
    Condense {
        first: usize,
        other: usize,
        diff: f64,
    },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("regularity violated: det(H_1_4) = {det_h14:e}, cond(F22) = {cond:e}")]
    Regularity { det_h14: f64, cond: f64 },

    #[error("QR iteration did not converge for eigenvalue {index}")]
    QrNoConvergence { index: usize },

    #[error("unsupported truncation order {0} (supported: 1, 2, 3)")]
    UnsupportedOrder(usize),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("cardinality mismatch: {left} vs {right}")]
    Cardinality { left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl Error {
    /// Short stable tag for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::UnknownFunction(_) => "unknown-function",
            Error::UnknownVariable(_) => "unknown-variable",
            Error::UnboundVariable(_) => "unbound-variable",
            Error::Arity { .. } => "arity",
            Error::InvalidModel(_) => "invalid-model",
            Error::Domain(_) => "domain",
            Error::SizeCap { .. } => "size-cap",
            Error::InvalidPermutation(_) => "invalid-permutation",
            Error::Shape(_) => "shape",
            Error::MissingBlock(_) => "missing-block",
            Error::Condense { .. } => "condense",
            Error::BasisMismatch(_) => "basis-mismatch",
            Error::Singular(_) => "singular",
            Error::NoConvergence { .. } => "no-convergence",
            Error::Regularity { .. } => "regularity",
            Error::QrNoConvergence { .. } => "qr-no-convergence",
            Error::UnsupportedOrder(_) => "unsupported-order",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::Cardinality { .. } => "cardinality",
            Error::NonFinite(_) => "non-finite",
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
