use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("quadrature failed on [{}, {}] (error estimate {error_estimate:.3e})", interval.0, interval.1)]
pub struct QuadratureFailure {
    pub interval: (f64, f64),
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("network is disconnected: vertex {vertex} is not reachable from {root}")]
    DisconnectedGraph { root: String, vertex: String },
    #[error("infinite rod {rod} ends at vertex {vertex}, which has other edges")]
    InfiniteEdgeAtJunction { rod: String, vertex: String },
    #[error("rod {rod} has no initial datum")]
    MissingInitialDatum { rod: String },
    #[error("vertex {vertex}: Robin condition with beta0 = beta1 = 0")]
    DegenerateRobin { vertex: String },
    #[error("duplicate identifier {0}")]
    DuplicateId(String),
    #[error("{context} refers to unknown id {id}")]
    UnknownReference { context: String, id: String },
    #[error("rod {rod}: {reason}")]
    InvalidRod { rod: String, reason: String },
    #[error("vertex {vertex}: {reason}")]
    InvalidVertex { vertex: String, reason: String },
    #[error("rod {rod}: initial datum does not decay at infinity")]
    NonDecayingDatum { rod: String },
    #[error("rod {rod}: {reason}")]
    InvalidDatum { rod: String, reason: String },
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("network has no rods")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<ValidationError>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unsupported expression: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("transform argument {mu} outside the analyticity domain (Im must stay below {limit})")]
    DomainViolation { mu: C64, limit: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureFailure),
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DtnError {
    #[error("near-singular system at lambda = {lambda} (|det| = {det:.3e}, floor {floor:.3e})")]
    NearSingular { lambda: C64, det: f64, floor: f64 },
    #[error("closed form is singular at lambda = 0")]
    SingularAtOrigin,
    #[error("right-hand side still contains unknown solution transforms")]
    UnknownTermPresent,
    #[error("Robin end of rod {rod} with beta0 = 0 is not in the Neumann block")]
    NormalizationFailure { rod: String },
    #[error("system does not match configuration: {0}")]
    WrongConfiguration(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZeroScanError {
    #[error("zero suspected on the boundary of the box near {point}")]
    BoundaryZeroSuspected { point: C64 },
    #[error("zero scan inconclusive: {0}")]
    Inconclusive(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContourError {
    #[error("invalid deformation angle {delta} (must lie in (0, pi/4))")]
    InvalidDeformation { delta: f64 },
    #[error("quadrature node budget exceeded ({nodes} nodes)")]
    TruncationBudgetExceeded { nodes: usize },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    ZeroScan(#[from] ZeroScanError),
    #[error(transparent)]
    Dtn(#[from] DtnError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdmError {
    #[error("rod {rod}: truncated far end influence {influence:.3e} exceeds 1e-6")]
    TruncationTooSmall { rod: String, influence: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
}
