use thiserror::Error;

/// Errors produced by model construction and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error("grid is not connected")]
    DisconnectedGraph,

    /// The load subgraph splits into several components. Each entry lists
    /// load indices (load ordering) of one component.
    #[error("load subgraph is reducible: {} components", components.len())]
    LoadSubgraphReducible { components: Vec<Vec<usize>> },

    #[error("matrix is not a Z-matrix")]
    NotZMatrix,

    #[error("matrix is not irreducible")]
    NotIrreducible,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("voltage at load {index} is not positive")]
    NonPositiveVoltage { index: usize },

    #[error("expected a vector of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("demand contains non-finite entries")]
    NonFiniteDemand,

    #[error("operation requires a single-load grid (n = {n})")]
    NotSingleLoad { n: usize },

    #[error("operation requires a two-load grid (n = {n})")]
    NotTwoLoads { n: usize },

    #[error("solution oracle supports n <= {limit}, got n = {n}")]
    OracleScaleExceeded { n: usize, limit: usize },

    #[error("direction is not in the normalized stability cone")]
    LambdaNotInLambda1,

    #[error("direction is not in the stability cone")]
    LambdaNotInLambda,

    #[error("operating point is not long-term voltage semi-stable")]
    NotSemiStable,

    #[error("continuation stalled at theta = {theta}")]
    StepSizeUnderflow { theta: f64 },

    #[error("ray stays feasible up to scale {cap}")]
    NoCrossingFound { cap: f64 },

    #[error("ray direction must be nonzero and finite")]
    ZeroDirection,

    #[error("multiplier vector must be positive")]
    NonPositiveNu,

    #[error("ray count must be positive")]
    InvalidRayCount,
}

pub type Result<T> = std::result::Result<T, Error>;
