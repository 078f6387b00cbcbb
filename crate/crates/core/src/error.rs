use thiserror::Error;

/// Errors surfaced by the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("empty point cloud: {0}")]
    EmptyCloud(String),
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),
    #[error("singular covariance: |sigma| = {det:e} below 1e-30")]
    SingularCovariance { det: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("filtration is not monotone: {0}")]
    NonMonotoneFiltration(String),
    #[error("simplex set is not face-closed: {0}")]
    NotFaceClosed(String),
    #[error("unsupported dimension for cycle representative: {0}")]
    UnsupportedDimension(String),
    #[error("complex too large for brute-force oracle: {n} simplices (limit {limit})")]
    TooLargeForOracle { n: usize, limit: usize },
    #[error("optimization diverged: {0}")]
    Divergence(String),
    #[error("superlevel set is empty at threshold {threshold}")]
    EmptySuperlevel { threshold: f64 },
    #[error("extraction failed to reach the target topology: {0}")]
    ConvergenceFailure(String),
    #[error("mismatched list lengths: {0}")]
    LengthMismatch(String),
    #[error("empty mesh: {0}")]
    EmptyMesh(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
