use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] dnls_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn parse(line: impl Into<Option<usize>>, message: impl Into<String>) -> Self {
        Self::Parse {
            line: line.into(),
            message: message.into(),
        }
    }

    /// 2 for anything wrong with the request, 3 for failures while running it.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Validation(_) => 2,
            Self::Core(e) => match e {
                dnls_core::Error::BlowUpDetected { .. } | dnls_core::Error::StepFailure { .. } => 3,
                _ => 2,
            },
            Self::Io { .. } => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
