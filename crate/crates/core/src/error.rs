use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates a model hypothesis.
    #[error("domain error: {0}")]
    Domain(String),

    /// The aggregate equation has no solution (CARA with psi = 1).
    #[error("no constant equilibrium: psi = {psi}, phi = {phi}")]
    NoEquilibrium { phi: f64, psi: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The fixed-point iteration did not settle.
    #[error("fixed-point iteration diverged after {max_iter} iterations (last iterate {last})")]
    Divergent { max_iter: usize, last: f64 },

    /// A line search ended on the edge of its bracket.
    #[error("maximum at bracket boundary {at} of [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64, at: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
