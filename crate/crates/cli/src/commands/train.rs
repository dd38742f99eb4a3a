use std::path::PathBuf;

use attrkit::dictionary::AttributeDictionary;
use attrkit::jsonl::{self, LineDiagnostic};
use attrkit::prompts::{generate_negatives, generate_positive, PromptGenConfig};
use attrkit::records::{FeatureRecord, LossTraceRecord};
use attrkit::train::{train_toy_with_vocabulary, ToyTrainConfig};
use attrkit::TrainingExample;
use clap::Args;

use crate::errors::{log_event, CliError};

#[derive(Args)]
pub struct TrainArgs {
    /// Dictionary document.
    #[arg(long, env = "ATTRKIT_DICT")]
    pub dict: PathBuf,
    /// Labeled features, one {instance_id, category, attributes, feature}
    /// per line.
    #[arg(long, env = "ATTRKIT_FEATURES")]
    pub features: PathBuf,
    /// Destination for the parameter checkpoint.
    #[arg(long, env = "ATTRKIT_OUTPUT")]
    pub output: PathBuf,
    /// Destination for the per-epoch loss trace.
    #[arg(long, env = "ATTRKIT_TRACE")]
    pub trace: PathBuf,
    #[arg(long, env = "ATTRKIT_EPOCHS", default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, env = "ATTRKIT_LEARNING_RATE", default_value_t = 1.0)]
    pub learning_rate: f64,
    /// Embedding dimension.
    #[arg(long, env = "ATTRKIT_DIM", default_value_t = 16)]
    pub dim: usize,
    /// Standard deviation of the Gaussian initialization.
    #[arg(long, env = "ATTRKIT_INIT_SCALE", default_value_t = 0.1)]
    pub init_scale: f64,
    /// Per-attribute retention probability for positive-prompt dropout.
    #[arg(long, env = "ATTRKIT_KEEP_PROB", default_value_t = 0.5)]
    pub keep_prob: f64,
    /// Negatives per instance (k).
    #[arg(long, env = "ATTRKIT_NUM_NEGATIVES", default_value_t = 3)]
    pub num_negatives: usize,
    /// Dimensions replaced per counterfactual negative (r).
    #[arg(long, env = "ATTRKIT_REPLACEMENTS", default_value_t = 1)]
    pub replacements: usize,
    /// Root seed: prompt generation and initialization derive their own
    /// streams from it.
    #[arg(long, env = "ATTRKIT_SEED")]
    pub seed: u64,
    /// Fail on any invalid input line instead of skipping it.
    #[arg(long, env = "ATTRKIT_STRICT", default_value_t = false)]
    pub strict: bool,
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let dict = AttributeDictionary::from_file(&args.dict)?;
    let file = std::fs::File::open(&args.features)?;
    let mut diagnostics: Vec<LineDiagnostic> = Vec::new();
    let mut records: Vec<FeatureRecord> = Vec::new();
    for item in jsonl::read_lines::<FeatureRecord>(std::io::BufReader::new(file)) {
        match item {
            Ok((line, record)) => {
                let violations = dict.validate_instance(&record.attribute_set());
                if violations.is_empty() {
                    records.push(record);
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
    super::handle_diagnostics("features", &diagnostics, args.strict)?;

    let prompt_config = PromptGenConfig {
        keep_prob: args.keep_prob,
        num_negatives: args.num_negatives,
        replacements_per_negative: args.replacements,
        rng_seed: args.seed,
    };
    prompt_config.validate()?;
    let mut rng = attrkit::rng::stream(args.seed, "train-prompts");
    let mut dataset = Vec::with_capacity(records.len());
    for record in &records {
        let set = record.attribute_set();
        let positive = generate_positive(&set, &prompt_config, &mut rng);
        let negatives = generate_negatives(&dict, &positive, &set, &prompt_config, &mut rng)?;
        dataset.push(
            TrainingExample::new(record.feature.clone(), positive, negatives)
                .map_err(CliError::domain)?,
        );
    }

    // Seed the vocabulary with every dictionary token so later evaluation
    // prompts never hit an unknown token, even if dropout hid a primitive
    // during training.
    let mut vocabulary: Vec<String> = dict.category_names().map(str::to_string).collect();
    for cat in dict.categories() {
        for dim in cat.dimensions() {
            vocabulary.extend(dim.primitives().iter().cloned());
        }
    }
    let outcome = train_toy_with_vocabulary(
        &dataset,
        vocabulary,
        &ToyTrainConfig {
            learning_rate: args.learning_rate,
            epochs: args.epochs,
            d: args.dim,
            init_scale: args.init_scale,
            seed: args.seed,
        },
    )?;

    outcome.params.save_checkpoint(&args.output, args.seed)?;
    let trace: Vec<LossTraceRecord> = outcome
        .loss_trace
        .iter()
        .enumerate()
        .map(|(epoch, &loss)| LossTraceRecord { epoch, loss })
        .collect();
    let mut body = Vec::new();
    jsonl::write_lines(&mut body, &trace)?;
    jsonl::write_atomic(&args.trace, &body)?;

    log_event(
        "train",
        serde_json::json!({
            "examples": dataset.len(),
            "epochs": args.epochs,
            "final_loss": outcome.loss_trace.last(),
            "seed": args.seed,
        }),
    );
    Ok(())
}
