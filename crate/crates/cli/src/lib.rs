//! Command-line workflows and the HTTP service behind the `roiform` binary.

pub mod commands;
pub mod project;
pub mod server;

/// Errors that map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    MissingInput(String),
}

/// Exit code for a failed command: 2 for usage errors and missing inputs,
/// 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.downcast_ref::<CliError>().is_some()) {
        2
    } else {
        1
    }
}
