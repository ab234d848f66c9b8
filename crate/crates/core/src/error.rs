use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),

    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("invalid scenario config: {0}")]
    Config(String),

    #[error("cost matrix has q66 = 0; the Euler-Lagrange equation drops below 12th order")]
    OrderCollapse,

    #[error("characteristic root clustering failed: {0}")]
    RootClustering(String),

    #[error("boundary system is ill-conditioned (condition number {condition:.3e} > {limit:.0e})")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("simulation became non-finite at t = {time} s")]
    Unstable { time: f64 },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("empty averaging window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },

    #[error("relative change against a zero baseline")]
    ZeroBaseline,
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OrderCollapse | Error::RootClustering(_) | Error::IllConditioned { .. } => 3,
            Error::Unstable { .. } => 4,
            _ => 2,
        }
    }

    /// Short machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::InvalidBoundary(_) => "invalid_boundary",
            Error::InvalidStrategy(_) => "invalid_strategy",
            Error::InvalidSimConfig(_) => "invalid_sim_config",
            Error::Config(_) => "config",
            Error::OrderCollapse => "order_collapse",
            Error::RootClustering(_) => "root_clustering",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Unstable { .. } => "unstable",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::EmptyWindow { .. } => "empty_window",
            Error::ZeroBaseline => "zero_baseline",
        }
    }
}
