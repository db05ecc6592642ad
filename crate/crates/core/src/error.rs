use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("svd did not converge within {max_iter} iterations")]
    SvdNoConvergence { max_iter: usize },
    #[error("rank {requested} exceeds numerical rank {rank}")]
    Rank { requested: usize, rank: usize },
    #[error("sample set is empty")]
    EmptySample,
    #[error("no full-rank draw after {attempts} attempts")]
    Generation { attempts: usize },
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),
    #[error("contour: {0}")]
    Contour(String),
    #[error("quadrature did not stabilize: {0}")]
    Quadrature(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("matrix file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
