use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("oracle unsupported: {0}")]
    UnsupportedOracle(String),
    #[error("size cap exceeded: {what} is {got}, cap is {cap}")]
    SizeCap {
        what: &'static str,
        got: usize,
        cap: usize,
    },
    #[error("policy contract violated: {0}")]
    Contract(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("time limit reached")]
    TimeLimit,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn cap(what: &'static str, got: usize, cap: usize) -> Result<()> {
    if got > cap {
        Err(Error::SizeCap { what, got, cap })
    } else {
        Ok(())
    }
}
