use std::path::PathBuf;

use attrkit::dictionary::{AttributeDictionary, DictionaryError};
use clap::Args;

use crate::errors::{log_event, CliError};

#[derive(Args)]
pub struct DictArgs {
    /// Dictionary document (one category record per line).
    #[arg(long, env = "ATTRKIT_DICT")]
    pub dict: PathBuf,
}

pub fn run(args: DictArgs) -> Result<(), CliError> {
    match AttributeDictionary::from_file(&args.dict) {
        Ok(dict) => {
            let dimensions: usize = dict.categories().iter().map(|c| c.dimensions().len()).sum();
            let primitives: usize = dict
                .categories()
                .iter()
                .flat_map(|c| c.dimensions())
                .map(|d| d.len())
                .sum();
            println!(
                "dictionary OK: {} categories, {} dimensions, {} primitives",
                dict.len(),
                dimensions,
                primitives
            );
            log_event(
                "dict-validate",
                serde_json::json!({
                    "categories": dict.len(),
                    "dimensions": dimensions,
                    "primitives": primitives,
                }),
            );
            Ok(())
        }
        Err(DictionaryError::Invalid(violations)) => {
            println!("dictionary INVALID: {} violation(s)", violations.len());
            for violation in &violations {
                println!("  - {violation}");
            }
            Err(CliError::domain(format!(
                "{} violation(s)",
                violations.len()
            )))
        }
        Err(DictionaryError::Parse { line, message }) => {
            println!("dictionary INVALID: parse error at line {line}: {message}");
            Err(CliError::domain(format!("parse error at line {line}")))
        }
        Err(err) => Err(err.into()),
    }
}
