use thiserror::Error;

/// Errors raised by the channel model, estimators and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiError {
    /// A physical parameter violated its domain invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Direction vector is not unit norm.
    #[error("direction is not a unit vector (norm {norm})")]
    NonUnitDirection { norm: f64 },

    /// Range is non-positive or not finite.
    #[error("geometry is not finite or range is non-positive (r = {range_m})")]
    NonFiniteGeometry { range_m: f64 },

    /// The requested bound presumes tri-axial coils at both ends.
    #[error("range CRB closed form requires tri-axial coils at both ends")]
    NotIdentifiable,

    /// Channel estimate is numerically zero.
    #[error("channel estimate has vanishing Frobenius norm")]
    ZeroChannel,

    /// Radial and tangential eigenmodes cannot be separated.
    #[error("top eigengap {gap} of the reconstructed coupling tensor is below {tolerance}")]
    AmbiguousDirection { gap: f64, tolerance: f64 },

    /// Gauss–Newton normal equations could not be solved.
    #[error("Gauss-Newton curvature is singular")]
    SingularCurvature,

    /// Pilot excitations do not span every transmit axis.
    #[error("pilot excitations span {rank} of {required} transmit dimensions")]
    RankDeficientPilots { rank: usize, required: usize },

    /// The coupling-gradient resolution never reaches the reference ToF resolution.
    #[error("no crossover: coupling-gradient resolution exceeds {tof_resolution_m} m over the whole bracket")]
    NoCrossover { tof_resolution_m: f64 },
}

pub type Result<T> = std::result::Result<T, MiError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> MiError {
    MiError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
