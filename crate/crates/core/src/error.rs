use thiserror::Error;

/// Errors raised by relkep operations.
///
/// Infinite action values are not errors: the discrete action returns
/// `f64::INFINITY` outside its finiteness domain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid physical constants or problem data.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A type-(n, k) non-circular orbit does not exist for this period.
    #[error("no type ({n}, {k}) orbit for T = {period}: need 1 <= n <= i_T = {i_t}")]
    NoSuchOrbit {
        n: u32,
        k: u32,
        period: f64,
        i_t: u32,
    },

    /// The integrator step size collapsed, which happens on approach to the origin.
    #[error("collision: step size underflow at t = {t}")]
    Collision { t: f64 },

    /// Two consecutive loop nodes are too far apart in angle to resolve the winding.
    #[error("winding resolution error: turn of {turn} rad between nodes {index} and {next}")]
    Resolution { index: usize, next: usize, turn: f64 },

    /// A numerical procedure failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
