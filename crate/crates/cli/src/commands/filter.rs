use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use attrkit::conformal::ThresholdTable;
use attrkit::dictionary::AttributeDictionary;
use attrkit::filtration::{
    dataset_stats, export, filter_annotations, read_candidates, read_filtered, ClassStats,
    FilterOptions, FilteredAnnotation, PipelineStats, StatsBuilder,
};
use attrkit::jsonl::LineDiagnostic;
use clap::Args;

use crate::errors::{log_event, CliError};

#[derive(Args)]
pub struct FilterArgs {
    /// Dictionary document.
    #[arg(long, env = "ATTRKIT_DICT")]
    pub dict: PathBuf,
    /// Calibrated threshold table.
    #[arg(long, env = "ATTRKIT_TABLE")]
    pub table: PathBuf,
    /// Candidate annotation shards; each is filtered independently.
    #[arg(long = "candidates", env = "ATTRKIT_CANDIDATES", required = true, num_args = 1..)]
    pub candidates: Vec<PathBuf>,
    /// Destination for the filtered annotations.
    #[arg(long, env = "ATTRKIT_OUTPUT")]
    pub output: PathBuf,
    /// Destination for the statistics document.
    #[arg(long, env = "ATTRKIT_STATS")]
    pub stats: PathBuf,
    /// Optional ground truth (filtered-annotation schema with true
    /// attributes) for coverage and false-discovery statistics.
    #[arg(long, env = "ATTRKIT_GROUND_TRUTH")]
    pub ground_truth: Option<PathBuf>,
    /// Record the full passing set per dimension on every output record.
    #[arg(long, env = "ATTRKIT_KEEP_PASSING_SETS", default_value_t = false)]
    pub keep_passing_sets: bool,
    /// Worker cap for shard processing.
    #[arg(long, env = "ATTRKIT_JOBS", default_value_t = 1)]
    pub jobs: usize,
    /// Fail on any invalid input line instead of skipping it.
    #[arg(long, env = "ATTRKIT_STRICT", default_value_t = false)]
    pub strict: bool,
}

pub fn run(args: FilterArgs) -> Result<(), CliError> {
    let dict = AttributeDictionary::from_file(&args.dict)?;
    let table = ThresholdTable::from_file(&args.table)?;
    let options = FilterOptions {
        keep_passing_sets: args.keep_passing_sets,
        ..FilterOptions::default()
    };

    // Each shard is independent; process up to `jobs` at a time and
    // reassemble in input order so output bytes do not depend on scheduling.
    type ShardResult = Result<(Vec<FilteredAnnotation>, StatsBuilder, Vec<LineDiagnostic>), CliError>;
    let jobs = args.jobs.max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<ShardResult>>> =
        args.candidates.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(args.candidates.len()) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= args.candidates.len() {
                    break;
                }
                let result: ShardResult = (|| {
                    let (records, diagnostics) =
                        read_candidates(&args.candidates[index], &dict)?;
                    let outcome = filter_annotations(records, &dict, &table, &options)?;
                    Ok((outcome.annotations, outcome.stats, diagnostics))
                })();
                *slots[index].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let mut annotations = Vec::new();
    let mut stats_builder = StatsBuilder::default();
    for (path, slot) in args.candidates.iter().zip(slots) {
        let (shard_annotations, shard_stats, diagnostics) = slot
            .into_inner()
            .expect("slot lock")
            .expect("every shard processed")?;
        super::handle_diagnostics(&path.display().to_string(), &diagnostics, args.strict)?;
        annotations.extend(shard_annotations);
        stats_builder.merge(shard_stats);
    }
    let mut stats = stats_builder.finalize();

    if let Some(path) = &args.ground_truth {
        let (truth, diagnostics) = read_filtered(path)?;
        super::handle_diagnostics("ground-truth", &diagnostics, args.strict)?;
        let (gt_stats, mismatches) = dataset_stats(&annotations, Some(&truth));
        for message in &mismatches {
            log_event("diagnostic", serde_json::json!({ "message": message }));
        }
        if args.strict && !mismatches.is_empty() {
            return Err(CliError::domain(format!(
                "{} ground-truth mismatch(es) (strict mode)",
                mismatches.len()
            )));
        }
        merge_ground_truth(&mut stats, gt_stats);
    }

    export(&annotations, &stats, &args.output, &args.stats)?;
    log_event(
        "filter",
        serde_json::json!({
            "shards": args.candidates.len(),
            "instances": stats.instances,
            "attributes": stats.attributes,
            "multi_pass": stats.multi_pass_count,
        }),
    );
    Ok(())
}

/// Fold ground-truth coverage and false-discovery numbers into the filter
/// statistics, matching classes by (category, dimension, primitive).
fn merge_ground_truth(stats: &mut PipelineStats, gt: PipelineStats) {
    stats.fdr = gt.fdr;
    for gt_class in gt.per_class {
        let key = (
            gt_class.category.clone(),
            gt_class.dimension.clone(),
            gt_class.primitive.clone(),
        );
        match stats.per_class.iter_mut().find(|c| {
            (c.category.clone(), c.dimension.clone(), c.primitive.clone()) == key
        }) {
            Some(existing) => {
                existing.true_instances = gt_class.true_instances;
                existing.coverage = gt_class.coverage;
                existing.false_retained = gt_class.false_retained;
                existing.fdr = gt_class.fdr;
            }
            None => stats.per_class.push(ClassStats {
                evaluated: None,
                retention_rate: None,
                ..gt_class
            }),
        }
    }
    stats
        .per_class
        .sort_by(|a, b| {
            (&a.category, &a.dimension, &a.primitive).cmp(&(&b.category, &b.dimension, &b.primitive))
        });
}
