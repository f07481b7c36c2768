use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed PPM input.
    #[error("ppm parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The bitstream could not be decoded.
    #[error("corrupt stream at byte {offset}: {msg}")]
    Corrupt { offset: usize, msg: String },

    /// No parameter configuration fits the byte budget.
    #[error("ratio {ratio} is infeasible: {msg}")]
    Infeasible { ratio: f64, msg: String },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn corrupt(offset: usize, msg: impl Into<String>) -> Self {
        Error::Corrupt {
            offset,
            msg: msg.into(),
        }
    }
}
