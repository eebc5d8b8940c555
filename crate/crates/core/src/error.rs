use crate::beat::Beat;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml { line: u32, column: u32, message: String },

    #[error("structural error in part {part:?}, measure {measure}: {message}")]
    Structural { part: String, measure: String, message: String },

    #[error("unresolved instrument {name:?} (nearest: {})", .candidates.join(", "))]
    UnresolvedInstrument { name: String, candidates: Vec<String> },

    #[error("pitch {0} outside MIDI range 0..=127")]
    PitchRange(i32),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("onset {onset} (+{delta}) is outside the alignment domain [{first}, {last}]")]
    Coverage { onset: Beat, delta: f64, first: f64, last: f64 },

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("correlation undefined for constant input")]
    UndefinedCorrelation,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::Divergence { .. } | Error::DegenerateTarget(_)
        )
    }

    pub(crate) fn structural(part: &str, measure: &str, message: impl Into<String>) -> Error {
        Error::Structural { part: part.to_string(), measure: measure.to_string(), message: message.into() }
    }
}
