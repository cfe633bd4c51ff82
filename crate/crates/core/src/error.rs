use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("observation {0} is outside the model support [0, 1]")]
    Domain(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ALR update produced a negative value ({0:e}); inputs are inconsistent")]
    NegativeAlr(f64),

    #[error("run has {0} censored stream(s); delay is undefined")]
    Censored(usize),

    #[error("sweep is empty")]
    EmptySweep,

    #[error("malformed run record: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
