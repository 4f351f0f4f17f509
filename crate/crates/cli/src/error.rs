use std::fmt;

/// Exit code for a bad invocation, config or input path.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for a failure inside a pipeline stage.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    pub fn stage(stage: &str, err: impl fmt::Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: format!("{stage}: {err}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Tags core errors with the stage they came from.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::stage(stage, e))
    }
}
