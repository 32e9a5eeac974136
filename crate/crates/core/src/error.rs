use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error at theta {theta:?}: {msg}")]
    Numeric { msg: String, theta: Vec<f64> },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("infeasible band: alpha = {alpha} is below 1/(R+1) for R = {r}")]
    InfeasibleBand { alpha: f64, r: usize },

    #[error("unbounded grid: coordinate {coord} has an infinite confidence limit")]
    UnboundedGrid { coord: usize },

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("pathological norm ball: acceptance rate {rate:.2e} after {proposals} proposals")]
    PathologicalBall { rate: f64, proposals: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn numeric(msg: impl Into<String>, theta: &[f64]) -> Error {
    Error::Numeric {
        msg: msg.into(),
        theta: theta.to_vec(),
    }
}
