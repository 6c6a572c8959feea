use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("rank error: basis columns are linearly dependent")]
    Rank,
    #[error("sampler stalled after {0} rejections")]
    SamplerStall(u64),
    #[error("refused: {0}")]
    Refused(String),
    #[error("promise violation: {0}")]
    PromiseViolation(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("step budget exceeded: {0}")]
    Budget(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("sample stream exhausted after {0} samples")]
    StreamExhausted(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
