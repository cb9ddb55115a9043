use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A value could not be mapped back through an invertible law.
    #[error("out of range: {0}")]
    Range(String),

    /// A linear fit had a degenerate design matrix.
    #[error("rank deficient fit: {0}")]
    Rank(String),

    /// A nonlinear fit or a derived estimate could not be produced.
    #[error("fit failure: {0}")]
    Fit(String),

    /// The zero-power calibration could not be established.
    #[error("calibration failure: {0}")]
    Calibration(String),

    /// Numerical integration would be unstable or inaccurate.
    #[error("unstable integration: {0}")]
    Unstable(String),

    #[error("wrong particle shape: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

impl Error {
    /// True for errors that come from a failed fit or calibration rather than bad input.
    pub fn is_fit_failure(&self) -> bool {
        matches!(self, Error::Fit(_) | Error::Calibration(_) | Error::Rank(_))
    }

    /// True for errors caused by an invalid configuration or argument.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::Domain(_)
                | Error::Json(_)
                | Error::Shape(_)
                | Error::Unstable(_)
                | Error::Range(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, err: impl FnOnce() -> Error) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(err())
    }
}
