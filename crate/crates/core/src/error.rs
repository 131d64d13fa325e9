use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hankel depth {depth} exceeds the {len} available samples")]
    DepthExceedsData { depth: usize, len: usize },

    #[error("Hankel depth must be at least 1")]
    ZeroDepth,

    #[error("{what}: lengths {left} and {right} are not aligned")]
    Alignment {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{what}: expected dimension {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window of length {got} is shorter than the required {needed} samples")]
    InsufficientWindow { needed: usize, got: usize },

    #[error("window is not a trajectory of the model (residual {residual:.3e})")]
    InconsistentWindow { residual: f64 },

    #[error("initial-trajectory constraint is infeasible (residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("the simulation problem has a unique response; there is nothing to sample")]
    UniqueResponse,

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            found,
        }
    }
}
