use std::collections::BTreeMap;
use std::path::PathBuf;

use attrkit::dictionary::AttributeDictionary;
use attrkit::encoder::EncoderParams;
use attrkit::jsonl::{self, LineDiagnostic};
use attrkit::prompts::{generate_compositional_prompts, Prompt};
use attrkit::records::FeatureRecord;
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::errors::{log_event, CliError};

#[derive(Args)]
pub struct EvalArgs {
    /// Dictionary document.
    #[arg(long, env = "ATTRKIT_DICT")]
    pub dict: PathBuf,
    /// Trained parameter checkpoint.
    #[arg(long, env = "ATTRKIT_CHECKPOINT")]
    pub checkpoint: PathBuf,
    /// Labeled features to evaluate on.
    #[arg(long, env = "ATTRKIT_FEATURES")]
    pub features: PathBuf,
    /// Destination for the ranking report.
    #[arg(long, env = "ATTRKIT_OUTPUT")]
    pub output: PathBuf,
    /// Verification protocol.
    #[arg(long, env = "ATTRKIT_MODE", value_enum, default_value_t = EvalMode::Atomic)]
    pub mode: EvalMode,
    /// Attributes per compositional prompt (compositional mode only).
    #[arg(long, env = "ATTRKIT_N_ATTRS", default_value_t = 2)]
    pub n_attrs: usize,
    /// Fail on any invalid input line instead of skipping it.
    #[arg(long, env = "ATTRKIT_STRICT", default_value_t = false)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Rank single-attribute prompts per labeled dimension.
    Atomic,
    /// Rank every primitive combination over each labeled dimension subset.
    Compositional,
}

#[derive(Serialize)]
struct EvalReport {
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_attrs: Option<usize>,
    instances: u64,
    comparisons: u64,
    top1_hits: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    top1_accuracy: Option<f64>,
    per_category: Vec<CategoryReport>,
}

#[derive(Serialize)]
struct CategoryReport {
    category: String,
    /// Number of prompts the protocol enumerates for this category.
    prompt_count: usize,
    /// First few serialized prompts actually ranked, for inspection.
    sample_prompts: Vec<String>,
    comparisons: u64,
    hits: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    per_dimension: Vec<DimensionReport>,
}

#[derive(Serialize)]
struct DimensionReport {
    dimension: String,
    comparisons: u64,
    hits: u64,
    accuracy: f64,
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let dict = AttributeDictionary::from_file(&args.dict)?;
    let (params, _) = EncoderParams::load_checkpoint(&args.checkpoint)?;

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

    let report = match args.mode {
        EvalMode::Atomic => eval_atomic(&dict, &params, &records)?,
        EvalMode::Compositional => {
            eval_compositional(&dict, &params, &records, args.n_attrs)?
        }
    };

    let doc = serde_json::to_string_pretty(&report).expect("report serializes");
    jsonl::write_atomic(&args.output, doc.as_bytes())?;
    log_event(
        "eval",
        serde_json::json!({
            "mode": report.mode,
            "instances": report.instances,
            "comparisons": report.comparisons,
            "top1_accuracy": report.top1_accuracy,
        }),
    );
    Ok(())
}

fn eval_atomic(
    dict: &AttributeDictionary,
    params: &EncoderParams,
    records: &[FeatureRecord],
) -> Result<EvalReport, CliError> {
    struct Tally {
        comparisons: u64,
        hits: u64,
    }
    let mut per_dim: BTreeMap<(String, String), Tally> = BTreeMap::new();
    let mut samples: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut instances = 0u64;

    for record in records {
        let Some(cat) = dict.category(&record.category) else {
            continue;
        };
        instances += 1;
        for dim in cat.dimensions() {
            let Some(truth) = record.attributes.get(dim.key()) else {
                continue;
            };
            let candidates: Vec<Prompt> = dim
                .primitives()
                .iter()
                .map(|p| {
                    Prompt::new(record.category.clone(), vec![p.clone()])
                        .expect("single primitive cannot repeat")
                })
                .collect();
            let sample = samples.entry(record.category.clone()).or_default();
            if sample.len() < 8 {
                sample.extend(
                    candidates
                        .iter()
                        .take(8 - sample.len())
                        .map(|p| p.serialized().to_string()),
                );
            }
            let ranked = params.rank_prompts(&record.feature, &candidates)?;
            let tally = per_dim
                .entry((record.category.clone(), dim.key().to_string()))
                .or_insert(Tally {
                    comparisons: 0,
                    hits: 0,
                });
            tally.comparisons += 1;
            if ranked[0].0.primitives()[0] == *truth {
                tally.hits += 1;
            }
        }
    }

    let mut per_category: Vec<CategoryReport> = Vec::new();
    for cat in dict.categories() {
        let dims: Vec<DimensionReport> = cat
            .dimensions()
            .iter()
            .filter_map(|dim| {
                per_dim
                    .get(&(cat.name().to_string(), dim.key().to_string()))
                    .map(|tally| DimensionReport {
                        dimension: dim.key().to_string(),
                        comparisons: tally.comparisons,
                        hits: tally.hits,
                        accuracy: tally.hits as f64 / tally.comparisons as f64,
                    })
            })
            .collect();
        if dims.is_empty() {
            continue;
        }
        let comparisons: u64 = dims.iter().map(|d| d.comparisons).sum();
        let hits: u64 = dims.iter().map(|d| d.hits).sum();
        per_category.push(CategoryReport {
            category: cat.name().to_string(),
            // One atomic prompt per primitive of every dimension.
            prompt_count: cat.dimensions().iter().map(|d| d.len()).sum(),
            sample_prompts: samples.get(cat.name()).cloned().unwrap_or_default(),
            comparisons,
            hits,
            accuracy: Some(hits as f64 / comparisons as f64),
            per_dimension: dims,
        });
    }

    let comparisons: u64 = per_category.iter().map(|c| c.comparisons).sum();
    let hits: u64 = per_category.iter().map(|c| c.hits).sum();
    Ok(EvalReport {
        mode: "atomic".to_string(),
        n_attrs: None,
        instances,
        comparisons,
        top1_hits: hits,
        top1_accuracy: (comparisons > 0).then(|| hits as f64 / comparisons as f64),
        per_category,
    })
}

fn eval_compositional(
    dict: &AttributeDictionary,
    params: &EncoderParams,
    records: &[FeatureRecord],
    n_attrs: usize,
) -> Result<EvalReport, CliError> {
    struct Tally {
        prompt_count: usize,
        comparisons: u64,
        hits: u64,
        samples: Vec<String>,
    }
    let mut per_category: BTreeMap<String, Tally> = BTreeMap::new();
    let mut instances = 0u64;

    for record in records {
        let Some(cat) = dict.category(&record.category) else {
            continue;
        };
        instances += 1;
        let tally = per_category
            .entry(record.category.clone())
            .or_insert_with(|| Tally {
                prompt_count: generate_compositional_prompts(dict, &record.category, n_attrs)
                    .map(|p| p.len())
                    .unwrap_or(0),
                comparisons: 0,
                hits: 0,
                samples: Vec::new(),
            });

        // Labeled dimensions in dictionary order.
        let labeled: Vec<usize> = cat
            .dimensions()
            .iter()
            .enumerate()
            .filter(|(_, dim)| record.attributes.contains_key(dim.key()))
            .map(|(i, _)| i)
            .collect();
        if labeled.len() < n_attrs {
            continue;
        }
        for subset in combinations(labeled.len(), n_attrs) {
            let dims: Vec<usize> = subset.iter().map(|&i| labeled[i]).collect();
            // All primitive combinations over the chosen dimensions.
            let mut candidates = Vec::new();
            let mut choice = vec![0usize; n_attrs];
            'outer: loop {
                let primitives: Vec<String> = dims
                    .iter()
                    .zip(&choice)
                    .map(|(&d, &c)| cat.dimensions()[d].primitives()[c].clone())
                    .collect();
                candidates.push(
                    Prompt::new(record.category.clone(), primitives)
                        .expect("distinct dimensions give distinct primitives"),
                );
                let mut slot = n_attrs;
                loop {
                    if slot == 0 {
                        break 'outer;
                    }
                    slot -= 1;
                    choice[slot] += 1;
                    if choice[slot] < cat.dimensions()[dims[slot]].len() {
                        break;
                    }
                    choice[slot] = 0;
                    if slot == 0 {
                        break 'outer;
                    }
                }
            }
            let truth: Vec<String> = dims
                .iter()
                .map(|&d| record.attributes[cat.dimensions()[d].key()].clone())
                .collect();
            if tally.samples.len() < 8 {
                tally.samples.extend(
                    candidates
                        .iter()
                        .take(8 - tally.samples.len())
                        .map(|p| p.serialized().to_string()),
                );
            }
            let ranked = params.rank_prompts(&record.feature, &candidates)?;
            tally.comparisons += 1;
            if ranked[0].0.primitives() == truth.as_slice() {
                tally.hits += 1;
            }
        }
    }

    let per_category: Vec<CategoryReport> = per_category
        .into_iter()
        .map(|(category, tally)| CategoryReport {
            category,
            prompt_count: tally.prompt_count,
            sample_prompts: tally.samples,
            comparisons: tally.comparisons,
            hits: tally.hits,
            accuracy: (tally.comparisons > 0)
                .then(|| tally.hits as f64 / tally.comparisons as f64),
            per_dimension: Vec::new(),
        })
        .collect();

    let comparisons: u64 = per_category.iter().map(|c| c.comparisons).sum();
    let hits: u64 = per_category.iter().map(|c| c.hits).sum();
    Ok(EvalReport {
        mode: "compositional".to_string(),
        n_attrs: Some(n_attrs),
        instances,
        comparisons,
        top1_hits: hits,
        top1_accuracy: (comparisons > 0).then(|| hits as f64 / comparisons as f64),
        per_category,
    })
}

/// All `r`-element subsets of `0..n` in lexicographic order.
fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    if r > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..r).collect();
    loop {
        out.push(current.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - r {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in i + 1..r {
            current[j] = current[j - 1] + 1;
        }
    }
}
