use thiserror::Error;

/// Errors produced by the rate and attack models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates a documented precondition.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The attenuation coefficient lies outside the region where the
    /// filtering constraints can be solved.
    #[error("attenuation b = {b} is infeasible: {reason}")]
    InfeasibleAttack { b: f64, reason: &'static str },

    /// The two states are identical, so no discriminating measurement exists.
    #[error("states are indistinguishable (overlap = {0})")]
    Indistinguishable(f64),

    /// A scan produced no strictly positive secret key rate.
    #[error("no positive secret key rate found: {0}")]
    NoPositiveRate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad input rather than the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, reason })
    }
}
