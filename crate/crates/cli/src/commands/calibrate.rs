use std::path::PathBuf;

use attrkit::conformal::{
    calibrate_thresholds, read_calibration_records, AttributeClass, CalibrationConfig,
};
use attrkit::dictionary::AttributeDictionary;
use attrkit::jsonl;
use clap::Args;

use crate::errors::{log_event, CliError};

#[derive(Args)]
pub struct CalibrateArgs {
    /// Calibration records: {instance_id, category, dimension, primitive,
    /// p_hat} per line.
    #[arg(long, env = "ATTRKIT_RECORDS")]
    pub records: PathBuf,
    /// Destination for the threshold table.
    #[arg(long, env = "ATTRKIT_OUTPUT")]
    pub output: PathBuf,
    /// Tolerated miscoverage level.
    #[arg(long, env = "ATTRKIT_ALPHA", default_value_t = 0.1)]
    pub alpha: f64,
    /// Classes with fewer records than this get the fallback threshold.
    #[arg(long, env = "ATTRKIT_MIN_SAMPLES", default_value_t = 10)]
    pub min_samples: usize,
    /// Conservative fixed threshold for sparse or absent classes.
    #[arg(long, env = "ATTRKIT_FALLBACK_TAU", default_value_t = 0.2)]
    pub fallback_tau: f64,
    /// Optional dictionary: every class it defines gets an entry, absent
    /// ones at the fallback threshold.
    #[arg(long, env = "ATTRKIT_DICT")]
    pub dict: Option<PathBuf>,
    /// Fail on any invalid input line instead of skipping it.
    #[arg(long, env = "ATTRKIT_STRICT", default_value_t = false)]
    pub strict: bool,
}

pub fn run(args: CalibrateArgs) -> Result<(), CliError> {
    let (records, diagnostics) = read_calibration_records(&args.records)?;
    super::handle_diagnostics("records", &diagnostics, args.strict)?;

    let registered = match &args.dict {
        Some(path) => AttributeClass::enumerate(&AttributeDictionary::from_file(path)?),
        None => Vec::new(),
    };
    let table = calibrate_thresholds(
        &records,
        &registered,
        &CalibrationConfig {
            alpha: args.alpha,
            min_samples: args.min_samples,
            fallback_tau: args.fallback_tau,
        },
    )?;
    jsonl::write_atomic(&args.output, table.to_jsonl().as_bytes())?;
    log_event(
        "calibrate",
        serde_json::json!({
            "records": records.len(),
            "classes": table.len(),
            "alpha": args.alpha,
        }),
    );
    Ok(())
}
