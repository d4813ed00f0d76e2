use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("search cost {0} is outside the admissible range")]
    CostOutOfRange(f64),

    #[error("prices ({p1}, {p2}) are outside the nondegenerate region for threshold {threshold}")]
    Domain { p1: f64, p2: f64, threshold: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no interior maximum for the rank-two deviation against rival price {rival}")]
    NoInteriorMaximum { rival: f64 },

    #[error("bonus {0} is degenerate; ranking carries no incentive")]
    DegenerateBonus(f64),

    #[error("no root found: {0}")]
    NoRoot(String),

    #[error("no sign change on the bracket [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("the feasible set is empty")]
    Infeasible,

    #[error("prices ({p1}, {p2}) are both below the threshold; use the plain feasible set")]
    WrongRegime { p1: f64, p2: f64 },

    #[error("{0} is only available for the uniform match distribution")]
    UniformOnly(&'static str),

    #[error("data error: {0}")]
    Data(String),
}
