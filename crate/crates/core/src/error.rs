use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid code parameters: {0}")]
    InvalidCode(String),

    #[error("invalid system specification: {0}")]
    InvalidSystem(String),

    #[error("invalid interference model: {0}")]
    InvalidModel(String),

    #[error("precision of {requested} digits is below the minimum of {minimum}")]
    PrecisionTooLow { requested: u32, minimum: u32 },

    #[error("unsupported system: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no feasible design for {users} users")]
    Infeasible { users: u32 },

    #[error("malformed event trace: {0}")]
    MalformedTrace(String),
}
