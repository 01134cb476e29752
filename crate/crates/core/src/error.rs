use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A structured text file failed to parse; `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Elements from different `GroupModel` instances were mixed.
    #[error("elements belong to different group models")]
    ModelMismatch,

    /// A generator letter outside the model alphabet.
    #[error("unknown generator letter {0:?}")]
    UnknownLetter(String),

    /// A caller violated a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The rewriting system failed the critical-pair confluence check.
    #[error("rewriting system is not confluent: critical pair {word:?} reduces to both {left:?} and {right:?}")]
    NotConfluent {
        word: String,
        left: String,
        right: String,
    },

    /// The step distribution is not admissible (its support does not
    /// generate the group as a semigroup within the probe budget).
    #[error("step distribution is not admissible: {0}")]
    NotAdmissible(String),

    /// An enumeration or solver exceeded its configured resource budget.
    #[error("resource budget exceeded: {0}")]
    BudgetExceeded(String),

    /// An iterative solver failed to converge within its iteration cap.
    #[error("iteration cap exceeded in {0} (residual {1:.3e})")]
    NoConvergence(&'static str, f64),

    /// Green-function evaluation is not available for this model/walk.
    #[error("Green evaluation unavailable: {0}")]
    GreenUnavailable(String),

    /// The cone algebra is too shallow to express a translated cone.
    #[error("cone algebra too shallow: {0}")]
    ConeAlgebraTooShallow(String),

    /// Confinement-set calibration could not reach the requested coverage.
    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: &str, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_string(),
            source,
        }
    }
}
