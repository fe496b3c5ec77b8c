use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its physical range or not finite.
    #[error("{name} {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mode index {index} out of range for a {n_modes}-mode state")]
    ModeOutOfRange { index: usize, n_modes: usize },

    #[error("state is not physical: {0}")]
    Unphysical(String),

    /// The measured quadrature has zero (or negative) marginal variance.
    #[error("degenerate homodyne measurement: marginal variance {variance}")]
    DegenerateMeasurement { variance: f64 },

    /// The signal slope vanishes, so the error-propagation sensitivity is infinite.
    #[error("sensitivity undefined: signal derivative is zero")]
    SensitivityUndefined,

    /// The photon budget cannot be met with a non-negative probe intensity.
    #[error("photon budget {budget} below the teleportation floor {floor}")]
    Infeasible { budget: f64, floor: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite<T: crate::Real>(name: &'static str, value: T) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn ensure_non_negative<T: crate::Real>(name: &'static str, value: T) -> Result<()> {
    ensure_finite(name, value)?;
    if value >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be >= 0, got {value}")))
    }
}

pub(crate) fn ensure_unit_interval<T: crate::Real>(name: &'static str, value: T) -> Result<()> {
    if value.is_finite() && value >= T::zero() && value <= T::one() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be in [0,1]"))
    }
}
