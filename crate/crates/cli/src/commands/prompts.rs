use std::path::PathBuf;

use attrkit::dictionary::AttributeDictionary;
use attrkit::jsonl::{self, LineDiagnostic};
use attrkit::prompts::{generate_negatives, generate_positive, PromptGenConfig};
use attrkit::records::{InstanceRecord, PromptDumpRecord, PromptKind};
use clap::Args;

use crate::errors::{log_event, CliError};

#[derive(Args)]
pub struct PromptsArgs {
    /// Dictionary document.
    #[arg(long, env = "ATTRKIT_DICT")]
    pub dict: PathBuf,
    /// Labeled instances, one {instance_id, category, attributes} per line.
    #[arg(long, env = "ATTRKIT_INSTANCES")]
    pub instances: PathBuf,
    /// Destination for the prompt dump.
    #[arg(long, env = "ATTRKIT_OUTPUT")]
    pub output: PathBuf,
    /// Per-attribute retention probability for dropout.
    #[arg(long, env = "ATTRKIT_KEEP_PROB", default_value_t = 0.5)]
    pub keep_prob: f64,
    /// Negatives per instance (k).
    #[arg(long, env = "ATTRKIT_NUM_NEGATIVES", default_value_t = 3)]
    pub num_negatives: usize,
    /// Dimensions replaced per counterfactual negative (r).
    #[arg(long, env = "ATTRKIT_REPLACEMENTS", default_value_t = 1)]
    pub replacements: usize,
    /// Root seed for the generation stream.
    #[arg(long, env = "ATTRKIT_SEED")]
    pub seed: u64,
    /// Fail on any invalid input line instead of skipping it.
    #[arg(long, env = "ATTRKIT_STRICT", default_value_t = false)]
    pub strict: bool,
}

pub fn run(args: PromptsArgs) -> Result<(), CliError> {
    let dict = AttributeDictionary::from_file(&args.dict)?;
    let config = PromptGenConfig {
        keep_prob: args.keep_prob,
        num_negatives: args.num_negatives,
        replacements_per_negative: args.replacements,
        rng_seed: args.seed,
    };
    config.validate()?;

    let file = std::fs::File::open(&args.instances)?;
    let mut diagnostics: Vec<LineDiagnostic> = Vec::new();
    let mut instances = Vec::new();
    for item in jsonl::read_lines::<InstanceRecord>(std::io::BufReader::new(file)) {
        match item {
            Ok((line, record)) => {
                let set = record.attribute_set();
                let violations = dict.validate_instance(&set);
                if violations.is_empty() {
                    instances.push((record.instance_id, set));
                } else {
                    for violation in violations {
                        diagnostics.push(LineDiagnostic {
                            line,
                            message: violation.to_string(),
                        });
                    }
                }
            }
            Err(diag) => diagnostics.push(diag),
        }
    }
    super::handle_diagnostics("instances", &diagnostics, args.strict)?;

    let mut rng = attrkit::rng::stream(args.seed, "prompts");
    let mut dump: Vec<PromptDumpRecord> = Vec::new();
    for (instance_id, set) in &instances {
        let positive = generate_positive(set, &config, &mut rng);
        let negatives = generate_negatives(&dict, &positive, set, &config, &mut rng)?;
        dump.push(PromptDumpRecord {
            instance_id: instance_id.clone(),
            kind: PromptKind::Positive,
            tokens: positive.tokens().iter().map(|t| t.to_string()).collect(),
            serialized: positive.serialized().to_string(),
            seed: args.seed,
        });
        for negative in &negatives {
            // Counterfactual negatives keep the instance's tag; a different
            // tag marks a category fallback.
            let kind = if negative.proto_tag() == set.proto_tag() {
                PromptKind::Negative
            } else {
                PromptKind::Fallback
            };
            dump.push(PromptDumpRecord {
                instance_id: instance_id.clone(),
                kind,
                tokens: negative.tokens().iter().map(|t| t.to_string()).collect(),
                serialized: negative.serialized().to_string(),
                seed: args.seed,
            });
        }
    }

    let mut body = Vec::new();
    jsonl::write_lines(&mut body, &dump)?;
    jsonl::write_atomic(&args.output, &body)?;
    log_event(
        "prompts",
        serde_json::json!({
            "instances": instances.len(),
            "records": dump.len(),
            "seed": args.seed,
        }),
    );
    Ok(())
}
