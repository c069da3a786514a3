use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model kind `{0}`")]
    UnknownModel(String),
    #[error("invalid model parameter: {0}")]
    InvalidParam(String),
    #[error("point {point:?} is outside the chart domain of {model}")]
    OutsideDomain { model: String, point: [f64; 3] },
    #[error("degenerate plane: |X∧Y|² = {0:e}")]
    DegeneratePlane(f64),
    #[error("vector is not horizontal (ξ-component {0:e})")]
    NotHorizontal(f64),
    #[error("invalid order k = {0}")]
    InvalidOrder(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown map spec `{0}`")]
    UnknownMap(String),
    #[error("target point outside chart at node {node}: {point:?}")]
    TargetOutsideChart { node: usize, point: [f64; 3] },
    #[error("jet has no third derivatives (finite-difference jets are rejected)")]
    MissingThirdOrder,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("family member {index} is not foliated (defect {defect:e})")]
    NotFoliated { index: usize, defect: f64 },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("flow blew up at step {step} (non-finite or runaway value at node {node})")]
    BlowUp { step: usize, node: usize },
    #[error("node {node} left the tubular neighbourhood at step {step} (|y| = {radius})")]
    TubeEscape { step: usize, node: usize, radius: f64 },
    #[error("unknown check id `{0}`")]
    UnknownCheck(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
