use thiserror::Error;

/// Errors raised by the evaluators, oracles and experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("arity {arity} exceeds the enumeration cap of {cap}")]
    ArityCap { arity: usize, cap: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("sign vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("exact computation needs {required} evaluations, cap is {cap}")]
    CostCap { required: u128, cap: u128 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects NaN, infinities and negative values.
pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(invalid(
            name,
            format!("must be finite and >= 0, got {value}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_probability_open(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(invalid(name, format!("must lie in (0, 1), got {value}")));
    }
    Ok(())
}

pub(crate) fn check_probability_closed(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(invalid(name, format!("must lie in [0, 1], got {value}")));
    }
    Ok(())
}

pub(crate) fn check_moment_order(name: &'static str, p: f64, min: f64) -> Result<()> {
    if !p.is_finite() || p < min {
        return Err(invalid(
            name,
            format!("must be finite and >= {min}, got {p}"),
        ));
    }
    Ok(())
}
