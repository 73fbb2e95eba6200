use thiserror::Error;

/// Errors raised by the analytic solvers, metrics and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("packet queue unstable: rho*nu = {load} >= mu = {mu}")]
    Unstable { load: f64, mu: f64 },

    #[error(
        "failed to bracket root: carried({lo}) = {f_lo}, carried({hi}) = {f_hi}, target {target}"
    )]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        target: f64,
    },

    #[error("{what} did not converge: residual {residual:e}")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("ode integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical procedure (root bracketing, ODE
    /// stepping, convergence) as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Bracket { .. } | Error::Integration { .. } | Error::NoConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
