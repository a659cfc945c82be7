use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid quadrature: {0}")]
    Quadrature(String),

    #[error("scattering kernel is not normalized: {0}")]
    Kernel(String),

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("coefficient violation: {0}")]
    Coefficient(String),

    #[error("unsupported norm: {0}")]
    Norm(String),

    /// A documented precondition of a solver or reconstruction does not hold
    /// (contraction condition, admissibility class, positivity of data, ...).
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors that mean the inputs do not satisfy an assumption, as opposed
    /// to an iteration that failed to settle.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::Coefficient(_)
                | Error::Grid(_)
                | Error::Quadrature(_)
                | Error::Kernel(_)
                | Error::Shape(_)
                | Error::Norm(_)
                | Error::OutsideDomain { .. }
        )
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::NotConverged { .. } | Error::Divergence(_))
    }
}
