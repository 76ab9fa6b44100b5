use crate::curvature::CurvatureResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input geometry violates a curve or set invariant.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Adaptive quadrature ran out of subdivisions; the partial result is kept.
    #[error("quadrature did not converge: value {:.6e} with error estimate {:.3e}", .partial.value, .partial.error_estimate)]
    Accuracy { partial: Box<CurvatureResult> },

    /// A curve is too short to carry the minimum node count at the requested spacing.
    #[error("curve of length {length:.4e} is too small for spacing {spacing:.4e}")]
    TooSmall { length: f64, spacing: f64 },

    /// Parameter search could not satisfy a constraint.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
