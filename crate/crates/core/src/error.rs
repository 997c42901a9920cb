use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum TodaError {
    /// An input failed a precondition; the message names the violated requirement.
    #[error("validation: {0}")]
    Validation(String),
    /// A computation produced non-finite or otherwise unusable values.
    #[error("numeric: {0}")]
    Numeric(String),
    /// An iterative solver exhausted its budget without reaching tolerance.
    #[error("no convergence after {iters} iterations (residual sup-norm {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    /// A measure lies outside the retraction neighborhood of the barycenter space.
    #[error("outside the eps0-neighborhood of the barycenter space (distance {distance:.4e} >= eps0 {eps0:.4e})")]
    OutsideNeighborhood { distance: f64, eps0: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TodaError>;
