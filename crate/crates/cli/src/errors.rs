//! Exit-code mapping and structured logging.

use attrkit::conformal::ConformalError;
use attrkit::dictionary::DictionaryError;
use attrkit::encoder::EncoderError;
use attrkit::filtration::FiltrationError;
use attrkit::prompts::PromptError;
use attrkit::train::TrainError;

/// Failures split by exit code: domain/validation problems exit 1, I/O
/// problems exit 2.
#[derive(Debug)]
pub enum CliError {
    Domain(String),
    Io(String),
}

impl CliError {
    pub fn domain(message: impl std::fmt::Display) -> Self {
        CliError::Domain(message.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DictionaryError> for CliError {
    fn from(e: DictionaryError) -> Self {
        match e {
            DictionaryError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Dictionary(DictionaryError::Io(io)) => CliError::Io(io.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<ConformalError> for CliError {
    fn from(e: ConformalError) -> Self {
        match e {
            ConformalError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<FiltrationError> for CliError {
    fn from(e: FiltrationError) -> Self {
        match e {
            FiltrationError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<EncoderError> for CliError {
    fn from(e: EncoderError) -> Self {
        match e {
            EncoderError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

/// One structured log line: `{"event": ..., "message": ...}`.
pub fn log_line(event: &str, message: &str) -> String {
    serde_json::json!({ "event": event, "message": message }).to_string()
}

/// Emit a structured event with arbitrary fields to standard error.
pub fn log_event(event: &str, fields: serde_json::Value) {
    let mut object = serde_json::json!({ "event": event });
    if let (Some(target), Some(extra)) = (object.as_object_mut(), fields.as_object()) {
        for (key, value) in extra {
            target.insert(key.clone(), value.clone());
        }
    }
    eprintln!("{object}");
}
