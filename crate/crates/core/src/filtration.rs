//! Large-scale candidate filtration.
//!
//! Ingests candidate annotations (instance metadata plus per-dimension
//! probability vectors), applies the calibrated per-class thresholds, keeps
//! at most one primitive per dimension (highest passing probability, ties to
//! dictionary order), and emits the filtered dataset plus statistics.
//! Instances always survive: an instance whose every attribute is rejected
//! stays in the output as an attribute-free detection, so the attribute
//! count is a subset of the instance count. Boxes are ingested and passed
//! through untouched, never produced here.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::{AttributeClass, ThresholdTable};
use crate::dictionary::{AttributeDictionary, Violation};
use crate::encoder::{EncoderError, EncoderParams};
use crate::jsonl::{self, LineDiagnostic};

#[derive(Debug, Error)]
pub enum FiltrationError {
    #[error("instance {instance_id}: unknown category {category:?}")]
    UnknownCategory {
        instance_id: String,
        category: String,
    },
    #[error("instance {instance_id}: unknown dimension {dimension:?} for category {category:?}")]
    UnknownDimension {
        instance_id: String,
        category: String,
        dimension: String,
    },
    #[error(
        "instance {instance_id}: dimension {dimension:?} has {got} probabilities, expected {expected}"
    )]
    ArityMismatch {
        instance_id: String,
        dimension: String,
        got: usize,
        expected: usize,
    },
    #[error("threshold table has no entry for class {0}")]
    MissingThreshold(AttributeClass),
    #[error("instance {instance_id}: {source}")]
    Scoring {
        instance_id: String,
        source: EncoderError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A candidate annotation awaiting filtration: one detected instance with a
/// probability vector per scored dimension. Probability vectors follow the
/// dictionary order of their dimension's primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateAnnotation {
    pub instance_id: String,
    pub image_id: String,
    /// x, y, width, height in pixels.
    pub bbox: [f64; 4],
    pub category: String,
    pub dimension_probs: BTreeMap<String, Vec<f64>>,
}

/// Tolerance on probability-vector normalization at ingest.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

impl CandidateAnnotation {
    /// Structural check against the dictionary. Violations are data.
    pub fn validate(&self, dict: &AttributeDictionary) -> Vec<Violation> {
        let ctx = format!("candidate {:?}", self.instance_id);
        let Some(cat) = dict.category(&self.category) else {
            return vec![Violation {
                context: ctx,
                message: format!("unknown category {:?}", self.category),
            }];
        };
        let mut violations = Vec::new();
        for (key, probs) in &self.dimension_probs {
            match cat.dimension(key) {
                None => violations.push(Violation {
                    context: ctx.clone(),
                    message: format!("unknown dimension {key:?}"),
                }),
                Some(dim) => {
                    if probs.len() != dim.len() {
                        violations.push(Violation {
                            context: ctx.clone(),
                            message: format!(
                                "dimension {key:?} has {} probabilities, expected {}",
                                probs.len(),
                                dim.len()
                            ),
                        });
                        continue;
                    }
                    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        violations.push(Violation {
                            context: ctx.clone(),
                            message: format!("dimension {key:?} has probabilities outside [0, 1]"),
                        });
                        continue;
                    }
                    let total: f64 = probs.iter().sum();
                    if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
                        violations.push(Violation {
                            context: ctx.clone(),
                            message: format!(
                                "dimension {key:?} probabilities sum to {total}, expected 1"
                            ),
                        });
                    }
                }
            }
        }
        violations
    }
}

/// A filtered annotation: the instance with only the attribute assignments
/// that passed their thresholds, at most one per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredAnnotation {
    pub instance_id: String,
    pub image_id: String,
    pub bbox: [f64; 4],
    pub category: String,
    pub attributes: BTreeMap<String, String>,
    /// Raw passing sets per dimension, kept only on request for analysis.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub passing: Option<BTreeMap<String, Vec<String>>>,
}

/// How multiple passing primitives of one dimension are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExclusivityPolicy {
    /// Keep the highest-probability passing primitive; ties break toward
    /// dictionary order.
    #[default]
    ArgmaxAmongPassing,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOptions {
    pub policy: ExclusivityPolicy,
    /// Record the full passing set per dimension on every output record.
    pub keep_passing_sets: bool,
}

/// Mergeable statistics accumulator. Merging is commutative and
/// associative, so shards can be processed independently.
#[derive(Debug, Clone, Default)]
pub struct StatsBuilder {
    images: BTreeSet<String>,
    instances: u64,
    attributes: u64,
    multi_pass_count: u64,
    per_class: BTreeMap<AttributeClass, ClassCounts>,
}

#[derive(Debug, Clone, Copy, Default)]
struct ClassCounts {
    evaluated: u64,
    retained: u64,
}

impl StatsBuilder {
    pub fn merge(&mut self, other: StatsBuilder) {
        self.images.extend(other.images);
        self.instances += other.instances;
        self.attributes += other.attributes;
        self.multi_pass_count += other.multi_pass_count;
        for (class, counts) in other.per_class {
            let slot = self.per_class.entry(class).or_default();
            slot.evaluated += counts.evaluated;
            slot.retained += counts.retained;
        }
    }

    pub fn finalize(self) -> PipelineStats {
        PipelineStats {
            images: self.images.len() as u64,
            instances: self.instances,
            attributes: self.attributes,
            multi_pass_count: self.multi_pass_count,
            per_class: self
                .per_class
                .into_iter()
                .map(|(class, counts)| ClassStats {
                    category: class.category,
                    dimension: class.dimension,
                    primitive: class.primitive,
                    retained: counts.retained,
                    evaluated: Some(counts.evaluated),
                    retention_rate: Some(if counts.evaluated == 0 {
                        0.0
                    } else {
                        counts.retained as f64 / counts.evaluated as f64
                    }),
                    true_instances: None,
                    coverage: None,
                    false_retained: None,
                    fdr: None,
                })
                .collect(),
            fdr: None,
        }
    }
}

/// Dataset statistics document: images / instances / attributes counts plus
/// per-class breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub images: u64,
    pub instances: u64,
    /// Retained (instance, dimension) assignments.
    pub attributes: u64,
    /// Instances-dimensions where more than one primitive passed.
    pub multi_pass_count: u64,
    pub per_class: Vec<ClassStats>,
    /// Aggregate empirical false-discovery rate over checked retained
    /// attributes, present only when ground truth was supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fdr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub category: String,
    pub dimension: String,
    pub primitive: String,
    pub retained: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub evaluated: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub retention_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_instances: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub false_retained: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fdr: Option<f64>,
}

#[derive(Debug)]
pub struct FilterOutcome {
    pub annotations: Vec<FilteredAnnotation>,
    pub stats: StatsBuilder,
}

/// Apply the threshold table to a stream of candidates.
///
/// Per dimension the passing set is every primitive whose probability meets
/// its threshold; the retained primitive is the argmax among them. Every
/// instance is kept even when no attribute survives.
pub fn filter_annotations(
    candidates: impl IntoIterator<Item = CandidateAnnotation>,
    dict: &AttributeDictionary,
    table: &ThresholdTable,
    options: &FilterOptions,
) -> Result<FilterOutcome, FiltrationError> {
    let ExclusivityPolicy::ArgmaxAmongPassing = options.policy;
    let mut annotations = Vec::new();
    let mut stats = StatsBuilder::default();

    for candidate in candidates {
        let cat = dict
            .category(&candidate.category)
            .ok_or_else(|| FiltrationError::UnknownCategory {
                instance_id: candidate.instance_id.clone(),
                category: candidate.category.clone(),
            })?;
        let mut attributes = BTreeMap::new();
        let mut passing_sets = BTreeMap::new();

        for (key, probs) in &candidate.dimension_probs {
            let dim = cat
                .dimension(key)
                .ok_or_else(|| FiltrationError::UnknownDimension {
                    instance_id: candidate.instance_id.clone(),
                    category: candidate.category.clone(),
                    dimension: key.clone(),
                })?;
            if probs.len() != dim.len() {
                return Err(FiltrationError::ArityMismatch {
                    instance_id: candidate.instance_id.clone(),
                    dimension: key.clone(),
                    got: probs.len(),
                    expected: dim.len(),
                });
            }

            let mut passing: Vec<(usize, f64)> = Vec::new();
            for (i, primitive) in dim.primitives().iter().enumerate() {
                let class = AttributeClass::new(&candidate.category, key, primitive);
                let entry = table
                    .get(&class)
                    .ok_or(FiltrationError::MissingThreshold(class))?;
                stats.per_class.entry(
                    AttributeClass::new(&candidate.category, key, primitive),
                ).or_default().evaluated += 1;
                if probs[i] >= entry.tau {
                    passing.push((i, probs[i]));
                }
            }
            if passing.len() > 1 {
                stats.multi_pass_count += 1;
            }
            if options.keep_passing_sets {
                passing_sets.insert(
                    key.clone(),
                    passing
                        .iter()
                        .map(|&(i, _)| dim.primitives()[i].clone())
                        .collect::<Vec<String>>(),
                );
            }
            // Argmax among passing; iteration is in dictionary order and the
            // comparison strict, so ties resolve to the earliest primitive.
            let mut winner: Option<(usize, f64)> = None;
            for &(i, p) in &passing {
                if winner.is_none_or(|(_, best)| p > best) {
                    winner = Some((i, p));
                }
            }
            if let Some((i, _)) = winner {
                let primitive = dim.primitives()[i].clone();
                stats
                    .per_class
                    .entry(AttributeClass::new(&candidate.category, key, &primitive))
                    .or_default()
                    .retained += 1;
                stats.attributes += 1;
                attributes.insert(key.clone(), primitive);
            }
        }

        stats.images.insert(candidate.image_id.clone());
        stats.instances += 1;
        annotations.push(FilteredAnnotation {
            instance_id: candidate.instance_id,
            image_id: candidate.image_id,
            bbox: candidate.bbox,
            category: candidate.category,
            attributes,
            passing: if options.keep_passing_sets {
                Some(passing_sets)
            } else {
                None
            },
        });
    }

    Ok(FilterOutcome { annotations, stats })
}

/// Instance metadata for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub instance_id: String,
    pub image_id: String,
    pub bbox: [f64; 4],
    pub category: String,
}

/// Score instances with the toy encoders: one probability vector per
/// dimension of the instance's category.
pub fn score_candidates(
    params: &EncoderParams,
    dict: &AttributeDictionary,
    instances: &[(InstanceMeta, Vec<f64>)],
) -> Result<Vec<CandidateAnnotation>, FiltrationError> {
    let mut out = Vec::with_capacity(instances.len());
    for (meta, feature) in instances {
        let cat = dict
            .category(&meta.category)
            .ok_or_else(|| FiltrationError::UnknownCategory {
                instance_id: meta.instance_id.clone(),
                category: meta.category.clone(),
            })?;
        let mut dimension_probs = BTreeMap::new();
        for dim in cat.dimensions() {
            let probs = params
                .attribute_probabilities(feature, dict, &meta.category, dim.key())
                .map_err(|source| FiltrationError::Scoring {
                    instance_id: meta.instance_id.clone(),
                    source,
                })?;
            dimension_probs.insert(dim.key().to_string(), probs);
        }
        out.push(CandidateAnnotation {
            instance_id: meta.instance_id.clone(),
            image_id: meta.image_id.clone(),
            bbox: meta.bbox,
            category: meta.category.clone(),
            dimension_probs,
        });
    }
    Ok(out)
}

/// Stream candidates from a line-delimited file, validating each against the
/// dictionary. Malformed or invalid lines come back as located diagnostics.
pub fn read_candidates(
    path: impl AsRef<Path>,
    dict: &AttributeDictionary,
) -> Result<(Vec<CandidateAnnotation>, Vec<LineDiagnostic>), FiltrationError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for item in jsonl::read_lines::<CandidateAnnotation>(reader) {
        match item {
            Ok((line, candidate)) => {
                let violations = candidate.validate(dict);
                if violations.is_empty() {
                    records.push(candidate);
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
    Ok((records, diagnostics))
}

/// Read a filtered-annotation file (also the ground-truth format).
pub fn read_filtered(
    path: impl AsRef<Path>,
) -> Result<(Vec<FilteredAnnotation>, Vec<LineDiagnostic>), FiltrationError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for item in jsonl::read_lines::<FilteredAnnotation>(reader) {
        match item {
            Ok((_, record)) => records.push(record),
            Err(diag) => diagnostics.push(diag),
        }
    }
    Ok((records, diagnostics))
}

/// Recompute dataset statistics from a filtered dataset alone, optionally
/// scoring it against ground truth (same record shape, attributes holding
/// the true assignments). Id mismatches in either direction come back as
/// diagnostics, not errors.
pub fn dataset_stats(
    filtered: &[FilteredAnnotation],
    ground_truth: Option<&[FilteredAnnotation]>,
) -> (PipelineStats, Vec<String>) {
    let mut images = BTreeSet::new();
    let mut retained: BTreeMap<AttributeClass, u64> = BTreeMap::new();
    let mut attributes = 0u64;
    for record in filtered {
        images.insert(record.image_id.as_str());
        attributes += record.attributes.len() as u64;
        for (dim, primitive) in &record.attributes {
            *retained
                .entry(AttributeClass::new(&record.category, dim, primitive))
                .or_default() += 1;
        }
    }

    let mut diagnostics = Vec::new();
    let mut true_instances: BTreeMap<AttributeClass, u64> = BTreeMap::new();
    let mut covered: BTreeMap<AttributeClass, u64> = BTreeMap::new();
    let mut checked: BTreeMap<AttributeClass, u64> = BTreeMap::new();
    let mut false_retained: BTreeMap<AttributeClass, u64> = BTreeMap::new();

    if let Some(truth) = ground_truth {
        let mut by_id: BTreeMap<&str, &FilteredAnnotation> = BTreeMap::new();
        for record in truth {
            if by_id.insert(record.instance_id.as_str(), record).is_some() {
                diagnostics.push(format!(
                    "ground truth has duplicate instance_id {:?}",
                    record.instance_id
                ));
            }
        }
        let mut filtered_ids = BTreeSet::new();
        for record in filtered {
            filtered_ids.insert(record.instance_id.as_str());
            let Some(gt) = by_id.get(record.instance_id.as_str()) else {
                diagnostics.push(format!(
                    "instance {:?} has no ground-truth record",
                    record.instance_id
                ));
                continue;
            };
            for (dim, primitive) in &record.attributes {
                let class = AttributeClass::new(&record.category, dim, primitive);
                *checked.entry(class.clone()).or_default() += 1;
                if gt.attributes.get(dim) != Some(primitive) {
                    *false_retained.entry(class).or_default() += 1;
                }
            }
        }
        for gt in truth {
            if !filtered_ids.contains(gt.instance_id.as_str()) {
                diagnostics.push(format!(
                    "ground-truth instance {:?} is missing from the filtered set",
                    gt.instance_id
                ));
                continue;
            }
            let filtered_record = filtered
                .iter()
                .find(|r| r.instance_id == gt.instance_id)
                .expect("id present");
            for (dim, primitive) in &gt.attributes {
                let class = AttributeClass::new(&gt.category, dim, primitive);
                *true_instances.entry(class.clone()).or_default() += 1;
                if filtered_record.attributes.get(dim) == Some(primitive) {
                    *covered.entry(class).or_default() += 1;
                }
            }
        }
    }

    let mut classes: BTreeSet<AttributeClass> = retained.keys().cloned().collect();
    classes.extend(true_instances.keys().cloned());
    let per_class: Vec<ClassStats> = classes
        .into_iter()
        .map(|class| {
            let retained_count = retained.get(&class).copied().unwrap_or(0);
            let (true_count, coverage) = if ground_truth.is_some() {
                let t = true_instances.get(&class).copied().unwrap_or(0);
                let c = covered.get(&class).copied().unwrap_or(0);
                (
                    Some(t),
                    if t == 0 { None } else { Some(c as f64 / t as f64) },
                )
            } else {
                (None, None)
            };
            let (false_count, fdr) = if ground_truth.is_some() {
                let n = checked.get(&class).copied().unwrap_or(0);
                let f = false_retained.get(&class).copied().unwrap_or(0);
                (
                    Some(f),
                    if n == 0 { None } else { Some(f as f64 / n as f64) },
                )
            } else {
                (None, None)
            };
            ClassStats {
                category: class.category,
                dimension: class.dimension,
                primitive: class.primitive,
                retained: retained_count,
                evaluated: None,
                retention_rate: None,
                true_instances: true_count,
                coverage,
                false_retained: false_count,
                fdr,
            }
        })
        .collect();

    let aggregate_fdr = if ground_truth.is_some() {
        let total_checked: u64 = checked.values().sum();
        let total_false: u64 = false_retained.values().sum();
        if total_checked == 0 {
            None
        } else {
            Some(total_false as f64 / total_checked as f64)
        }
    } else {
        None
    };

    (
        PipelineStats {
            images: images.len() as u64,
            instances: filtered.len() as u64,
            attributes,
            multi_pass_count: 0,
            per_class,
            fdr: aggregate_fdr,
        },
        diagnostics,
    )
}

/// Write the filtered dataset (one record per line) and the stats document,
/// atomically and byte-deterministically.
pub fn export(
    annotations: &[FilteredAnnotation],
    stats: &PipelineStats,
    annotations_path: impl AsRef<Path>,
    stats_path: impl AsRef<Path>,
) -> Result<(), FiltrationError> {
    let mut body = String::new();
    for record in annotations {
        body.push_str(&serde_json::to_string(record).expect("annotation serializes"));
        body.push('\n');
    }
    jsonl::write_atomic(annotations_path, body.as_bytes())?;
    let doc = serde_json::to_string_pretty(stats).expect("stats serialize");
    jsonl::write_atomic(stats_path, doc.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{calibrate_thresholds, CalibrationConfig, CalibrationRecord};
    use crate::dictionary::CategoryRecord;

    fn dict() -> AttributeDictionary {
        AttributeDictionary::from_records(vec![CategoryRecord::new(
            "Plane",
            [
                ("engines", vec!["one", "two", "four"]),
                ("wings", vec!["straight", "swept"]),
            ],
        )])
        .unwrap()
    }

    fn uniform_table(dict: &AttributeDictionary, tau: f64) -> ThresholdTable {
        // Build through calibration so entries are well-formed: constant
        // scores give q_hat = 1 - tau for any rank <= n.
        let mut records = Vec::new();
        for class in AttributeClass::enumerate(dict) {
            for i in 0..19 {
                records.push(CalibrationRecord {
                    instance_id: format!("{}-{i}", class.primitive),
                    category: class.category.clone(),
                    dimension: class.dimension.clone(),
                    primitive: class.primitive.clone(),
                    p_hat: tau,
                });
            }
        }
        calibrate_thresholds(&records, &[], &CalibrationConfig::default()).unwrap()
    }

    fn candidate(id: &str, engines: [f64; 3], wings: [f64; 2]) -> CandidateAnnotation {
        CandidateAnnotation {
            instance_id: id.to_string(),
            image_id: format!("img-{id}"),
            bbox: [0.0, 0.0, 10.0, 10.0],
            category: "Plane".to_string(),
            dimension_probs: [
                ("engines".to_string(), engines.to_vec()),
                ("wings".to_string(), wings.to_vec()),
            ]
            .into_iter()
            .collect(),
        }
    }

    #[test]
    fn argmax_among_passing_wins() {
        let dict = dict();
        let table = uniform_table(&dict, 0.10);
        let outcome = filter_annotations(
            [candidate("a", [0.3, 0.15, 0.55], [0.95, 0.05])],
            &dict,
            &table,
            &FilterOptions::default(),
        )
        .unwrap();
        let record = &outcome.annotations[0];
        assert_eq!(record.attributes["engines"], "four");
        assert_eq!(record.attributes["wings"], "straight");
        let stats = outcome.stats.finalize();
        assert_eq!(stats.instances, 1);
        assert_eq!(stats.attributes, 2);
        // engines had three passing, wings one: one multi-pass event.
        assert_eq!(stats.multi_pass_count, 1);
    }

    #[test]
    fn reject_all_keeps_instances_but_drops_attributes() {
        let dict = dict();
        // Fallback-only table with an unreachable threshold.
        let mut records = Vec::new();
        for class in AttributeClass::enumerate(&dict) {
            records.push(CalibrationRecord {
                instance_id: format!("only-{}", class.primitive),
                category: class.category.clone(),
                dimension: class.dimension.clone(),
                primitive: class.primitive.clone(),
                p_hat: 1.0,
            });
        }
        let table = calibrate_thresholds(
            &records,
            &[],
            &CalibrationConfig {
                fallback_tau: 1.1,
                ..CalibrationConfig::default()
            },
        )
        .unwrap();
        let outcome = filter_annotations(
            [candidate("a", [0.5, 0.3, 0.2], [0.6, 0.4])],
            &dict,
            &table,
            &FilterOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.annotations.len(), 1);
        assert!(outcome.annotations[0].attributes.is_empty());
        let stats = outcome.stats.finalize();
        assert_eq!(stats.instances, 1);
        assert_eq!(stats.attributes, 0);
    }

    #[test]
    fn exact_tie_resolves_to_dictionary_order() {
        let dict = dict();
        let table = uniform_table(&dict, 0.10);
        let outcome = filter_annotations(
            [candidate("a", [0.4, 0.4, 0.2], [0.5, 0.5])],
            &dict,
            &table,
            &FilterOptions::default(),
        )
        .unwrap();
        let record = &outcome.annotations[0];
        assert_eq!(record.attributes["engines"], "one");
        assert_eq!(record.attributes["wings"], "straight");
    }

    #[test]
    fn missing_threshold_names_the_class() {
        let dict = dict();
        let table = ThresholdTable::default();
        let err = filter_annotations(
            [candidate("a", [1.0, 0.0, 0.0], [1.0, 0.0])],
            &dict,
            &table,
            &FilterOptions::default(),
        )
        .unwrap_err();
        match err {
            FiltrationError::MissingThreshold(class) => {
                assert_eq!(class.category, "Plane");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn passing_sets_are_kept_on_request() {
        let dict = dict();
        let table = uniform_table(&dict, 0.10);
        let outcome = filter_annotations(
            [candidate("a", [0.3, 0.15, 0.55], [0.95, 0.05])],
            &dict,
            &table,
            &FilterOptions {
                keep_passing_sets: true,
                ..FilterOptions::default()
            },
        )
        .unwrap();
        let passing = outcome.annotations[0].passing.as_ref().unwrap();
        assert_eq!(passing["engines"], vec!["one", "two", "four"]);
        assert_eq!(passing["wings"], vec!["straight"]);
    }

    #[test]
    fn threshold_soundness_is_recheckable_from_outputs() {
        let dict = dict();
        let table = uniform_table(&dict, 0.25);
        let candidates = vec![
            candidate("a", [0.5, 0.3, 0.2], [0.9, 0.1]),
            candidate("b", [0.05, 0.05, 0.9], [0.5, 0.5]),
            candidate("c", [0.34, 0.33, 0.33], [0.2, 0.8]),
        ];
        let outcome = filter_annotations(
            candidates.clone(),
            &dict,
            &table,
            &FilterOptions::default(),
        )
        .unwrap();
        for (cand, record) in candidates.iter().zip(&outcome.annotations) {
            for (dim, primitive) in &record.attributes {
                let d = dict.category("Plane").unwrap().dimension(dim).unwrap();
                let idx = d.primitives().iter().position(|p| p == primitive).unwrap();
                let tau = table
                    .get(&AttributeClass::new("Plane", dim, primitive))
                    .unwrap()
                    .tau;
                assert!(cand.dimension_probs[dim][idx] >= tau);
            }
            // Exclusivity is structural: BTreeMap has one value per key.
            assert!(record.attributes.len() <= 2);
        }
    }

    #[test]
    fn shard_concatenation_equals_single_pass() {
        let dict = dict();
        let table = uniform_table(&dict, 0.10);
        let shard_a = vec![
            candidate("a", [0.5, 0.3, 0.2], [0.9, 0.1]),
            candidate("b", [0.05, 0.05, 0.9], [0.5, 0.5]),
        ];
        let shard_b = vec![candidate("c", [0.34, 0.33, 0.33], [0.2, 0.8])];
        let whole: Vec<CandidateAnnotation> =
            shard_a.iter().chain(&shard_b).cloned().collect();

        let single = filter_annotations(whole, &dict, &table, &FilterOptions::default()).unwrap();
        let mut first =
            filter_annotations(shard_a, &dict, &table, &FilterOptions::default()).unwrap();
        let second =
            filter_annotations(shard_b, &dict, &table, &FilterOptions::default()).unwrap();
        first.stats.merge(second.stats);
        let mut merged_annotations = first.annotations;
        merged_annotations.extend(second.annotations);

        assert_eq!(single.annotations, merged_annotations);
        assert_eq!(single.stats.finalize(), first.stats.finalize());
    }

    #[test]
    fn stats_from_identical_ground_truth_are_perfect() {
        let dict = dict();
        let table = uniform_table(&dict, 0.10);
        let outcome = filter_annotations(
            [
                candidate("a", [0.9, 0.05, 0.05], [0.8, 0.2]),
                candidate("b", [0.05, 0.9, 0.05], [0.1, 0.9]),
            ],
            &dict,
            &table,
            &FilterOptions::default(),
        )
        .unwrap();
        let (stats, diagnostics) =
            dataset_stats(&outcome.annotations, Some(&outcome.annotations));
        assert!(diagnostics.is_empty());
        assert_eq!(stats.fdr, Some(0.0));
        for class in &stats.per_class {
            if class.true_instances.unwrap_or(0) > 0 {
                assert_eq!(class.coverage, Some(1.0));
            }
            assert_eq!(class.fdr.unwrap_or(0.0), 0.0);
        }
    }

    #[test]
    fn empty_dataset_gives_all_zero_stats() {
        let (stats, diagnostics) = dataset_stats(&[], None);
        assert!(diagnostics.is_empty());
        assert_eq!(stats.images, 0);
        assert_eq!(stats.instances, 0);
        assert_eq!(stats.attributes, 0);
        assert!(stats.per_class.is_empty());
    }

    #[test]
    fn id_mismatches_surface_as_diagnostics() {
        let dict = dict();
        let table = uniform_table(&dict, 0.10);
        let outcome = filter_annotations(
            [candidate("a", [0.9, 0.05, 0.05], [0.8, 0.2])],
            &dict,
            &table,
            &FilterOptions::default(),
        )
        .unwrap();
        let mut truth = outcome.annotations.clone();
        truth[0].instance_id = "different".to_string();
        let (_, diagnostics) = dataset_stats(&outcome.annotations, Some(&truth));
        assert_eq!(diagnostics.len(), 2, "one mismatch in each direction");
    }

    #[test]
    fn export_then_ingest_is_identity() {
        let dict = dict();
        let table = uniform_table(&dict, 0.10);
        let outcome = filter_annotations(
            [
                candidate("a", [0.9, 0.05, 0.05], [0.8, 0.2]),
                candidate("b", [0.05, 0.9, 0.05], [0.1, 0.9]),
            ],
            &dict,
            &table,
            &FilterOptions::default(),
        )
        .unwrap();
        let stats = outcome.stats.finalize();
        let dir = tempfile::tempdir().unwrap();
        let ann_path = dir.path().join("filtered.jsonl");
        let stats_path = dir.path().join("stats.json");
        export(&outcome.annotations, &stats, &ann_path, &stats_path).unwrap();

        let (loaded, diagnostics) = read_filtered(&ann_path).unwrap();
        assert!(diagnostics.is_empty());
        assert_eq!(loaded, outcome.annotations);

        let reloaded_stats: PipelineStats =
            serde_json::from_str(&std::fs::read_to_string(&stats_path).unwrap()).unwrap();
        assert_eq!(reloaded_stats, stats);

        // Byte determinism across repeated exports.
        let ann2 = dir.path().join("filtered2.jsonl");
        let stats2 = dir.path().join("stats2.json");
        export(&outcome.annotations, &stats, &ann2, &stats2).unwrap();
        assert_eq!(
            std::fs::read(&ann_path).unwrap(),
            std::fs::read(&ann2).unwrap()
        );
        assert_eq!(
            std::fs::read(&stats_path).unwrap(),
            std::fs::read(&stats2).unwrap()
        );
    }

    #[test]
    fn ingest_reports_malformed_lines_with_numbers() {
        let dict = dict();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("candidates.jsonl");
        let good = serde_json::to_string(&candidate("a", [0.9, 0.05, 0.05], [0.8, 0.2])).unwrap();
        let bad_schema = "{\"instance_id\": 5}";
        let bad_category = serde_json::to_string(&CandidateAnnotation {
            category: "Spaceship".to_string(),
            ..candidate("c", [0.9, 0.05, 0.05], [0.8, 0.2])
        })
        .unwrap();
        std::fs::write(&path, format!("{good}\n{bad_schema}\n{bad_category}\n{good}\n")).unwrap();
        let (records, diagnostics) = read_candidates(&path, &dict).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(diagnostics.len(), 2);
        assert_eq!(diagnostics[0].line, 2);
        assert_eq!(diagnostics[1].line, 3);
    }

    #[test]
    fn empty_file_ingests_to_empty_stream() {
        let dict = dict();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let (records, diagnostics) = read_candidates(&path, &dict).unwrap();
        assert!(records.is_empty());
        assert!(diagnostics.is_empty());
    }

    #[test]
    fn stricter_alpha_never_retains_more() {
        let dict = dict();
        let candidates: Vec<CandidateAnnotation> = (0..40)
            .map(|i| {
                let spread = (i as f64 * 0.37).sin().abs().min(0.99);
                candidate(
                    &format!("i{i}"),
                    [spread, (1.0 - spread) / 2.0, (1.0 - spread) / 2.0],
                    [spread, 1.0 - spread],
                )
            })
            .collect();
        // Calibration records spread over [0,1] probabilities.
        let mut records = Vec::new();
        for class in AttributeClass::enumerate(&dict) {
            for i in 0..50 {
                records.push(CalibrationRecord {
                    instance_id: format!("{}-{i}", class.primitive),
                    category: class.category.clone(),
                    dimension: class.dimension.clone(),
                    primitive: class.primitive.clone(),
                    p_hat: (i as f64 + 0.5) / 50.0,
                });
            }
        }
        let mut previous = u64::MAX;
        for alpha in [0.05, 0.1, 0.3, 0.5, 0.8] {
            let table = calibrate_thresholds(
                &records,
                &[],
                &CalibrationConfig {
                    alpha,
                    ..CalibrationConfig::default()
                },
            )
            .unwrap();
            let outcome = filter_annotations(
                candidates.clone(),
                &dict,
                &table,
                &FilterOptions::default(),
            )
            .unwrap();
            let retained = outcome.stats.finalize().attributes;
            assert!(
                retained <= previous,
                "alpha {alpha}: retained {retained} > previous {previous}"
            );
            previous = retained;
        }
    }
}
