use thiserror::Error;

/// Failures reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error(
        "blow-up detected at step {step}{}{}",
        traj.map(|t| format!(" (trajectory {t})")).unwrap_or_default(),
        tag.as_ref().map(|t| format!(" [{t}]")).unwrap_or_default()
    )]
    BlowUp { step: u64, traj: Option<u64>, tag: Option<String> },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches a parameter label to a blow-up; other errors pass through.
    pub fn tagged(self, label: impl Into<String>) -> Error {
        match self {
            Error::BlowUp { step, traj, .. } => Error::BlowUp { step, traj, tag: Some(label.into()) },
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
