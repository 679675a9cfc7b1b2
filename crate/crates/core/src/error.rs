use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A response denominator vanished (parametric instability point or an undamped pole).
    #[error("pole in {what} at omega = {omega} rad/s")]
    Pole { what: &'static str, omega: f64 },

    /// The force does not transduce into the output quadrature (g = 0).
    #[error("force is unmeasurable at omega = {omega} rad/s (signal transfer vanishes)")]
    Unmeasurable { omega: f64 },

    #[error("singular response matrix at omega = {omega} rad/s")]
    Singular { omega: f64 },

    #[error("eigenvalue solver did not converge")]
    EigenNoConvergence,

    #[error("no interior minimum in [{lo}, {hi}] rad/s (optimum at g = {at} rad/s)")]
    NoInteriorMinimum { lo: f64, hi: f64, at: f64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("{} grid point(s) failed, first at index {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Points(Vec<(usize, Error)>),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            name,
            reason: reason.into(),
        }
    }
}
