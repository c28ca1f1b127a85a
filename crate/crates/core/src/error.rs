use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell} is degenerate (signed area {area:e})")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("facet ({0}, {1}) has more than two incident cells")]
    NonManifold(usize, usize),

    #[error("cell id {0} out of range")]
    InvalidCell(usize),

    #[error("point ({x}, {y}) lies outside cell {cell}")]
    OutsideCell { cell: usize, x: f64, y: f64 },

    #[error("mesh file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("form is not linear in its arguments: {0}")]
    NotLinear(String),

    #[error("coefficient `{0}` is not bound to a finite element function")]
    UnboundCoefficient(String),

    #[error("cannot differentiate: {0}")]
    NotDifferentiable(String),

    #[error("function space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{system} system could not be solved: {reason}")]
    SingularSystem { system: String, reason: String },

    #[error("Newton iteration did not converge in {} iterations (residual history {history:?})", history.len().saturating_sub(1))]
    NewtonDiverged { history: Vec<f64> },

    #[error("singular local problem on cell {cell}: degenerate geometry")]
    SingularLocalProblem { cell: usize },

    #[error("rank-deficient least-squares fit on the patch of cell {cell}")]
    RankDeficient { cell: usize },

    #[error("adaptive iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
