use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("parse error: no records")]
    NoRecords,
    #[error("label error: {0}")]
    Label(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("QP did not converge after {iterations} sweeps (best KKT residual {kkt_residual:e})")]
    QpNonConvergence {
        iterations: usize,
        kkt_residual: f64,
    },
    #[error("internal solver error: {0}")]
    Internal(String),
    #[error("degenerate fold {fold}: {msg}")]
    DegenerateFold { fold: usize, msg: String },
    #[error("grid search refused: {cells} cells exceeds the budget of {budget}")]
    GridBudget { cells: u128, budget: u128 },
    #[error("empty test set")]
    EmptyTestSet,
    #[error("outer round {outer} (tau = {tau:e}): {source}")]
    Outer {
        outer: usize,
        tau: f64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
