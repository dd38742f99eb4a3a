//! Split conformal calibration of per-class probability thresholds.
//!
//! For each attribute class the non-conformity score of a calibration item
//! is one minus the model's probability for the true class. The threshold is
//! `tau = 1 - q_hat` where `q_hat` is the ceil((n+1)(1-alpha))-th smallest
//! calibration score: the finite-sample-corrected quantile, which is what
//! delivers the marginal guarantee that a fresh true label lands in the
//! prediction set with probability at least `1 - alpha` under
//! exchangeability. Classes with too few calibration items fall back to a
//! conservative fixed threshold instead of an unstable quantile.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::AttributeDictionary;
use crate::jsonl::LineDiagnostic;

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("alpha {0} is outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("no scores to take a quantile of")]
    EmptyScores,
    #[error("no labeled items to measure coverage on")]
    EmptyLabeled,
    #[error("class {0} is missing from the threshold table")]
    MissingClass(AttributeClass),
    #[error("simulation sizes must all be at least 1")]
    EmptySimulation,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A fully qualified attribute class: category, dimension, primitive.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct AttributeClass {
    pub category: String,
    pub dimension: String,
    pub primitive: String,
}

impl AttributeClass {
    pub fn new(
        category: impl Into<String>,
        dimension: impl Into<String>,
        primitive: impl Into<String>,
    ) -> Self {
        AttributeClass {
            category: category.into(),
            dimension: dimension.into(),
            primitive: primitive.into(),
        }
    }

    /// Every class a dictionary defines, in dictionary order.
    pub fn enumerate(dict: &AttributeDictionary) -> Vec<AttributeClass> {
        let mut out = Vec::new();
        for cat in dict.categories() {
            for dim in cat.dimensions() {
                for primitive in dim.primitives() {
                    out.push(AttributeClass::new(cat.name(), dim.key(), primitive));
                }
            }
        }
        out
    }
}

impl fmt::Display for AttributeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.category, self.dimension, self.primitive
        )
    }
}

/// One calibration item: the model's probability for the ground-truth class
/// of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub instance_id: String,
    pub category: String,
    pub dimension: String,
    pub primitive: String,
    pub p_hat: f64,
}

impl CalibrationRecord {
    pub fn class(&self) -> AttributeClass {
        AttributeClass::new(&self.category, &self.dimension, &self.primitive)
    }
}

/// Non-conformity score: 1 - p_hat.
pub fn nonconformity(p_hat: f64) -> Result<f64, ConformalError> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(ConformalError::ProbabilityOutOfRange(p_hat));
    }
    Ok(1.0 - p_hat)
}

/// Rank of the finite-sample conformal quantile: ceil((n+1)(1-alpha)).
/// Products within 1e-9 of an integer are treated as that integer, so float
/// rounding cannot push an exact rank up by one.
pub(crate) fn conformal_rank(n: usize, alpha: f64) -> usize {
    let target = (n as f64 + 1.0) * (1.0 - alpha);
    let nearest = target.round();
    if (target - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        target.ceil() as usize
    }
}

/// The ceil((n+1)(1-alpha))-th smallest score. When that rank exceeds n the
/// maximal score bound 1 is returned, which yields tau = 0 (accept all).
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64, ConformalError> {
    if scores.is_empty() {
        return Err(ConformalError::EmptyScores);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConformalError::AlphaOutOfRange(alpha));
    }
    let rank = conformal_rank(scores.len(), alpha);
    if rank > scores.len() {
        return Ok(1.0);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

/// How a threshold was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMethod {
    Conformal,
    Fallback,
}

/// Calibrated threshold for one class, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub tau: f64,
    pub method: ThresholdMethod,
    pub n_cal: usize,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_hat: Option<f64>,
}

/// Per-class calibrated thresholds. Immutable once built; iteration follows
/// class order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThresholdTable {
    entries: BTreeMap<AttributeClass, ThresholdEntry>,
}

/// Wire record for threshold table files.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ThresholdRecord {
    category: String,
    dimension: String,
    primitive: String,
    tau: f64,
    method: ThresholdMethod,
    n_cal: usize,
    alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    q_hat: Option<f64>,
}

impl ThresholdTable {
    pub fn get(&self, class: &AttributeClass) -> Option<&ThresholdEntry> {
        self.entries.get(class)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&AttributeClass, &ThresholdEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (class, entry) in &self.entries {
            let record = ThresholdRecord {
                category: class.category.clone(),
                dimension: class.dimension.clone(),
                primitive: class.primitive.clone(),
                tau: entry.tau,
                method: entry.method,
                n_cal: entry.n_cal,
                alpha: entry.alpha,
                q_hat: entry.q_hat,
            };
            out.push_str(&serde_json::to_string(&record).expect("threshold serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_reader(reader: impl BufRead) -> Result<Self, ConformalError> {
        let mut entries = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ThresholdRecord = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: {e}", idx + 1),
                )
            })?;
            entries.insert(
                AttributeClass::new(record.category, record.dimension, record.primitive),
                ThresholdEntry {
                    tau: record.tau,
                    method: record.method,
                    n_cal: record.n_cal,
                    alpha: record.alpha,
                    q_hat: record.q_hat,
                },
            );
        }
        Ok(ThresholdTable { entries })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConformalError> {
        let file = std::fs::File::open(path)?;
        Self::parse_reader(std::io::BufReader::new(file))
    }
}

/// Calibration knobs; defaults follow the engine's standard configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub alpha: f64,
    /// Classes with fewer calibration items than this get the fallback.
    pub min_samples: usize,
    /// Conservative fixed threshold for sparse or absent classes.
    pub fallback_tau: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            alpha: 0.1,
            min_samples: 10,
            fallback_tau: 0.2,
        }
    }
}

/// Calibrate one threshold per class.
///
/// Classes with at least `min_samples` records get the conformal threshold
/// `tau = 1 - q_hat`; sparser classes, and any registered class absent from
/// the records, get the fixed fallback.
pub fn calibrate_thresholds(
    records: &[CalibrationRecord],
    registered: &[AttributeClass],
    config: &CalibrationConfig,
) -> Result<ThresholdTable, ConformalError> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(ConformalError::AlphaOutOfRange(config.alpha));
    }
    let mut grouped: BTreeMap<AttributeClass, Vec<f64>> = BTreeMap::new();
    for class in registered {
        grouped.entry(class.clone()).or_default();
    }
    for record in records {
        let score = nonconformity(record.p_hat)?;
        grouped.entry(record.class()).or_default().push(score);
    }

    let mut entries = BTreeMap::new();
    for (class, scores) in grouped {
        let n_cal = scores.len();
        let entry = if n_cal >= config.min_samples {
            let q_hat = conformal_quantile(&scores, config.alpha)?;
            ThresholdEntry {
                tau: 1.0 - q_hat,
                method: ThresholdMethod::Conformal,
                n_cal,
                alpha: config.alpha,
                q_hat: Some(q_hat),
            }
        } else {
            ThresholdEntry {
                tau: config.fallback_tau,
                method: ThresholdMethod::Fallback,
                n_cal,
                alpha: config.alpha,
                q_hat: None,
            }
        };
        entries.insert(class, entry);
    }
    Ok(ThresholdTable { entries })
}

/// The prediction set: every class whose probability meets or exceeds its
/// threshold (boundary inclusive). Errors if a queried class has no entry.
pub fn prediction_set(
    probabilities: &BTreeMap<AttributeClass, f64>,
    table: &ThresholdTable,
) -> Result<BTreeSet<AttributeClass>, ConformalError> {
    let mut set = BTreeSet::new();
    for (class, p_hat) in probabilities {
        let entry = table
            .get(class)
            .ok_or_else(|| ConformalError::MissingClass(class.clone()))?;
        if *p_hat >= entry.tau {
            set.insert(class.clone());
        }
    }
    Ok(set)
}

/// Fraction of labeled items whose true class lands in the prediction set.
pub fn empirical_coverage(
    table: &ThresholdTable,
    labeled: &[(BTreeMap<AttributeClass, f64>, AttributeClass)],
) -> Result<f64, ConformalError> {
    if labeled.is_empty() {
        return Err(ConformalError::EmptyLabeled);
    }
    let mut hits = 0usize;
    for (probabilities, truth) in labeled {
        let set = prediction_set(probabilities, table)?;
        if set.contains(truth) {
            hits += 1;
        }
    }
    Ok(hits as f64 / labeled.len() as f64)
}

/// Law of the synthetic ground-truth probability for coverage simulations.
/// Both laws are continuous on [0, 1], so scores carry no ties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ScoreDistribution {
    Uniform,
    /// p_hat = u^(1/gamma): gamma > 1 skews toward confident predictions.
    Power { gamma: f64 },
}

impl ScoreDistribution {
    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self {
            ScoreDistribution::Uniform => u,
            ScoreDistribution::Power { gamma } => u.powf(1.0 / gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub distribution: ScoreDistribution,
    pub alpha: f64,
    pub n_cal: usize,
    pub n_test: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Monte Carlo verification report for the coverage guarantee.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub alpha: f64,
    pub n_cal: usize,
    pub n_test: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_coverage: f64,
    pub std_coverage: f64,
    pub per_trial: Vec<f64>,
}

/// Draw i.i.d. continuous scores for calibration and test from the same law,
/// calibrate, and measure empirical coverage, per trial.
///
/// For continuous scores the mean coverage lies in
/// `[1 - alpha, 1 - alpha + 1/(n_cal + 1)]` in expectation.
pub fn simulate_coverage(config: &SimulationConfig) -> Result<CoverageReport, ConformalError> {
    if config.n_cal == 0 || config.n_test == 0 || config.trials == 0 {
        return Err(ConformalError::EmptySimulation);
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(ConformalError::AlphaOutOfRange(config.alpha));
    }
    let mut rng = crate::rng::stream(config.seed, "simulate-coverage");
    let mut per_trial = Vec::with_capacity(config.trials);
    for _ in 0..config.trials {
        let scores: Vec<f64> = (0..config.n_cal)
            .map(|_| 1.0 - config.distribution.sample(&mut rng))
            .collect();
        let q_hat = conformal_quantile(&scores, config.alpha)?;
        let tau = 1.0 - q_hat;
        let hits = (0..config.n_test)
            .filter(|_| config.distribution.sample(&mut rng) >= tau)
            .count();
        per_trial.push(hits as f64 / config.n_test as f64);
    }
    let mean = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
    let var = per_trial
        .iter()
        .map(|c| (c - mean).powi(2))
        .sum::<f64>()
        / per_trial.len() as f64;
    Ok(CoverageReport {
        alpha: config.alpha,
        n_cal: config.n_cal,
        n_test: config.n_test,
        trials: config.trials,
        seed: config.seed,
        mean_coverage: mean,
        std_coverage: var.sqrt(),
        per_trial,
    })
}

/// Read calibration records from a line-delimited file; malformed or
/// out-of-range lines come back as located diagnostics.
pub fn read_calibration_records(
    path: impl AsRef<Path>,
) -> Result<(Vec<CalibrationRecord>, Vec<LineDiagnostic>), ConformalError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for item in crate::jsonl::read_lines::<CalibrationRecord>(reader) {
        match item {
            Ok((line, record)) => {
                if !(0.0..=1.0).contains(&record.p_hat) {
                    diagnostics.push(LineDiagnostic {
                        line,
                        message: format!("p_hat {} is outside [0, 1]", record.p_hat),
                    });
                } else {
                    records.push(record);
                }
            }
            Err(diag) => diagnostics.push(diag),
        }
    }
    Ok((records, diagnostics))
}
