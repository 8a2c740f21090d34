use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("decoding order contract violated: {0}")]
    OrderContract(String),

    #[error("degenerate linearization point: {0}")]
    DegenerateLinearization(String),

    #[error("subproblem infeasible: {0}")]
    Infeasible(String),

    #[error("conic solver failed: {0}")]
    NumericalFailure(String),

    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),

    #[error("exhaustive order search is limited to K <= {max} users (got {k})")]
    TooManyUsers { k: usize, max: usize },

    #[error("zero-forcing needs K <= N and a full-column-rank channel matrix")]
    RankDeficient,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
