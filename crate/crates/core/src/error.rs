use alloc::string::String;

/// Errors raised by the core model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// A parameter fell outside its documented range.
    #[error("range: `{field}` = {value} is outside [{min}, {max}]")]
    Range {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    /// A structural invariant between several fields does not hold.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("histogram has no samples")]
    EmptyHistogram,
    #[error("region of interest {x},{y} {width}x{height} lies outside the {frame_width}x{frame_height} frame")]
    RoiOutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
        frame_width: u32,
        frame_height: u32,
    },
    #[error("elapsed time must be positive")]
    ZeroElapsed,
}

impl CoreError {
    pub(crate) fn range(field: &'static str, value: f64, min: f64, max: f64) -> Self {
        CoreError::Range {
            field,
            value,
            min,
            max,
        }
    }

    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        CoreError::Invalid {
            field,
            reason: reason.into(),
        }
    }

    /// Offending field, for errors that concern one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            CoreError::Range { field, .. } | CoreError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }

    /// Short machine-readable category, used as the `reason` code on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            CoreError::Range { .. } => "range",
            CoreError::Invalid { .. } => "invalid",
            CoreError::EmptyHistogram => "empty_histogram",
            CoreError::RoiOutOfBounds { .. } => "roi",
            CoreError::ZeroElapsed => "zero_elapsed",
        }
    }
}

pub type CoreResult<T> = Result<T, CoreError>;
