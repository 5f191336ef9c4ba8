use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("network has no persons")]
    EmptyNetwork,

    #[error("every person in the network is isolated (mean degree is 0)")]
    NoEdges,

    #[error("unknown person `{0}`")]
    UnknownPerson(String),

    #[error("record set is empty")]
    EmptyRecords,

    #[error("`{target}` does not appear in any record")]
    TargetAbsent { target: String },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("no relevant records: recall is undefined")]
    NoRelevant,

    #[error("random-retrieval F value is 0: F-gain is undefined")]
    ZeroBaselineF,

    #[error("target `{target}` was never reached in {attempts} simulation attempts")]
    TargetNeverReached { target: String, attempts: u32 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    /// Name of the offending parameter, if the error concerns one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::InvalidParameter { name, .. } => Some(name),
            _ => None,
        }
    }
}
