use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical quantity fell outside the range the model is defined on.
    #[error("domain error: {quantity} = {value} violates {bound}")]
    Domain {
        quantity: &'static str,
        value: f64,
        bound: String,
    },

    /// The operation does not apply to the given configuration.
    #[error("usage error: {0}")]
    Usage(String),

    /// Integration failed to converge.
    #[error("numeric error: {reason} (t = {t:.6e} s, v_sn = {v:.6} V, h = {h:.3e} s)")]
    Numeric {
        reason: &'static str,
        t: f64,
        v: f64,
        h: f64,
    },

    /// A per-cell failure inside an array evaluation.
    #[error("cell ({row}, {col}): {source}")]
    Cell {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    /// Calibration could not reach the requested anchors.
    #[error("calibration error: {what}: best residual {residual:.3e}")]
    Calibration { what: String, residual: f64 },

    /// A structured-text document did not match its schema.
    #[error("parse error: {0}")]
    Parse(String),

    /// A parsed document violated a value constraint.
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(quantity: &'static str, value: f64, bound: impl Into<String>) -> Self {
        Error::Domain {
            quantity,
            value,
            bound: bound.into(),
        }
    }
}

/// Returns a domain error unless `lo <= value <= hi`.
pub(crate) fn check_range(quantity: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !value.is_finite() || value < lo {
        return Err(Error::domain(quantity, value, format!("lower bound {lo}")));
    }
    if value > hi {
        return Err(Error::domain(quantity, value, format!("upper bound {hi}")));
    }
    Ok(())
}

pub(crate) fn check_positive(quantity: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::domain(quantity, value, "must be > 0"));
    }
    Ok(())
}
