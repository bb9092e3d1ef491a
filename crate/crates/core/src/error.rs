use thiserror::Error;

pub type Result<T, E = LilypadError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LilypadError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("site {0:?} is not in the window")]
    SiteOutsideWindow(Vec<i64>),

    #[error("site {0:?} is not settled")]
    Unsettled(Vec<i64>),

    #[error("time {0} is not a recorded snapshot or grid time")]
    UnknownTime(f64),

    #[error("set is empty")]
    EmptySet,

    #[error("total mass is zero")]
    ZeroMass,

    #[error("inputs were built on different environments")]
    EnvironmentMismatch,

    #[error("scenario infeasible: {0}")]
    InfeasibleScenario(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LilypadError {
    /// Stable machine-readable error class.
    pub fn class(&self) -> &'static str {
        match self {
            LilypadError::InvalidParameter(_) => "InvalidParameter",
            LilypadError::SiteOutsideWindow(_) => "SiteOutsideWindow",
            LilypadError::Unsettled(_) => "Unsettled",
            LilypadError::UnknownTime(_) => "UnknownTime",
            LilypadError::EmptySet => "EmptySet",
            LilypadError::ZeroMass => "ZeroMass",
            LilypadError::EnvironmentMismatch => "EnvironmentMismatch",
            LilypadError::InfeasibleScenario(_) => "InfeasibleScenario",
            LilypadError::Integrator(_) => "Integrator",
            LilypadError::Parse { .. } => "Parse",
            LilypadError::Io(_) => "Io",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> LilypadError {
    LilypadError::InvalidParameter(msg.into())
}
