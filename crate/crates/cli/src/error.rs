use lilypad_core::LilypadError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] LilypadError),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable class name printed on failure.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.class(),
            CliError::Config { .. } => "Config",
            CliError::InvalidConfig(_) => "InvalidConfig",
            CliError::Io(_) => "Io",
        }
    }

    /// Error message folded onto one line.
    pub fn detail(&self) -> String {
        self.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
    }
}
