use thiserror::Error;

/// Everything that can go wrong inside the lab.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("determinant {det:e} is too close to zero")]
    ZeroDeterminant { det: f64 },

    #[error("form does not have signature (2,1): eigenvalues {eigenvalues:?}")]
    WrongSignature { eigenvalues: [f64; 3] },

    #[error("matrix is not in SL3(R): det = {det}")]
    NotUnimodular { det: f64 },

    #[error("ball H_T is empty or degenerate for T = {radius} (need T > sqrt(3))")]
    BallEmpty { radius: f64 },

    #[error("search over nonzero vectors with norm bound {bound} is empty")]
    EmptySearch { bound: f64 },

    #[error("basis condition number {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("delta = {0} must lie in (0, 1)")]
    BadDelta(f64),

    #[error("box {0} must be bounded, non-degenerate and inside the closed positive octant")]
    BadBox(String),

    #[error("schedule is not admissible over the requested k range: {0}")]
    NotAdmissible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
