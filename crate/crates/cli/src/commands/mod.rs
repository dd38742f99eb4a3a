pub mod calibrate;
pub mod dict;
pub mod eval;
pub mod filter;
pub mod prompts;
pub mod simulate;
pub mod train;

use attrkit::jsonl::LineDiagnostic;

use crate::errors::{log_event, CliError};

/// Report per-line diagnostics to stderr; with `strict` any diagnostic is a
/// domain failure.
pub fn handle_diagnostics(
    source: &str,
    diagnostics: &[LineDiagnostic],
    strict: bool,
) -> Result<(), CliError> {
    for diagnostic in diagnostics {
        log_event(
            "diagnostic",
            serde_json::json!({
                "source": source,
                "line": diagnostic.line,
                "message": diagnostic.message,
            }),
        );
    }
    if strict && !diagnostics.is_empty() {
        return Err(CliError::domain(format!(
            "{} invalid line(s) in {source} (strict mode)",
            diagnostics.len()
        )));
    }
    Ok(())
}
