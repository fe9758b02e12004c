use thiserror::Error;

/// Errors produced by the separation solvers, the oracle and the optics model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("parameter {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("degenerate priors (|eta2 - eta1| = 1)")]
    DegeneratePriors,

    #[error("degenerate parabola (s' = 0): use the vertical segment u = s")]
    DegenerateParabola,

    /// The unitarity curve has a cusp at beta = 0 and degenerates into the
    /// hyperbola q1 q2 = s^2, whose endpoint slopes are finite.
    #[error("beta = 0: curve is the hyperbola q1 q2 = s^2 with endpoint slopes {lower_slope} and {upper_slope}")]
    Cusp { lower_slope: f64, upper_slope: f64 },

    #[error("negative square-root argument {0}")]
    NegativeRadicand(f64),

    #[error("numeric failure in {context}: {detail}")]
    Numeric {
        context: &'static str,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numeric(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
