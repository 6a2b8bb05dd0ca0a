use thiserror::Error;

/// Errors raised by the model, solvers, generators and the CLI front end.
#[derive(Debug, Error)]
pub enum DfmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("barrier undefined: node {node} constraint {constraint} has g = {value:e} (point not strictly interior)")]
    BarrierUndefined {
        node: usize,
        constraint: usize,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("subproblem of node {owner} not converged after {iterations} Newton iterations (stationarity {residual:e})")]
    SubproblemNotConverged {
        owner: usize,
        iterations: usize,
        residual: f64,
        best: Box<crate::local_solver::ReallocationPlan>,
    },

    #[error("rank-deficient coupling in KKT system")]
    RankDeficientCoupling,

    #[error("feasibility violated at round {round}: coupling residual {residual:e}, interior margin {margin:e}")]
    FeasibilityViolated {
        round: usize,
        residual: f64,
        margin: f64,
    },

    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    #[error("no strictly feasible point: {0}")]
    NoStrictlyFeasiblePoint(String),

    #[error("diagnostics unavailable at this size: N = {size} exceeds cap {cap}")]
    DiagnosticsUnavailable { size: usize, cap: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no cost data")]
    NoCostData,

    #[error("generator graph: {0}")]
    Graph(String),

    #[error("weight precondition violated: {0}")]
    WeightPrecondition(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DfmError>;
