//! Prompt generation: stochastic positive views, counterfactual hard
//! negatives, category fallbacks, and compositional enumeration.
//!
//! A prompt is a category tag followed by attribute primitives, serialized
//! with the `" + "` separator (e.g. `Plane + Four-engine + Swept wing`).
//! The tag is always the first token and is exempt from dropout and
//! shuffling. Positives keep each attribute independently with probability
//! `keep_prob` and then permute the survivors. Negatives swap primitives for
//! same-dimension antagonists, so they stay structurally valid but
//! semantically contradictory; instances that cannot yield enough distinct
//! counterfactuals fall back to bare tags of other categories.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{AttributeDictionary, DictionaryError, InstanceAttributeSet};

/// Exact separator used between prompt tokens, spaces included.
pub const SEPARATOR: &str = " + ";

/// A serialized attribute prompt. The tag is always token zero; primitives
/// never repeat.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    proto_tag: String,
    primitives: Vec<String>,
    serialized: String,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt has no tokens")]
    Empty,
    #[error("duplicate primitive {0:?} in prompt")]
    DuplicatePrimitive(String),
    #[error("keep_prob must lie in (0, 1], got {0}")]
    InvalidKeepProb(f64),
    #[error("replacements_per_negative must be at least 1")]
    InvalidReplacements,
    #[error("category {0:?} has no other category to draw fallback negatives from")]
    NoFallbackCategory(String),
    #[error("category {category:?} has {available} dimensions, cannot combine {requested}")]
    TooManyAttributes {
        category: String,
        available: usize,
        requested: usize,
    },
    #[error("positive prompt was not generated from the given instance: {0}")]
    PositiveInstanceMismatch(String),
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
}

impl Prompt {
    /// Build a prompt, rejecting duplicate primitives.
    pub fn new(
        proto_tag: impl Into<String>,
        primitives: Vec<String>,
    ) -> Result<Self, PromptError> {
        for (i, p) in primitives.iter().enumerate() {
            if primitives[..i].contains(p) {
                return Err(PromptError::DuplicatePrimitive(p.clone()));
            }
        }
        Ok(Self::from_parts(proto_tag.into(), primitives))
    }

    /// Bare-tag prompt with no attributes.
    pub fn bare(proto_tag: impl Into<String>) -> Self {
        Self::from_parts(proto_tag.into(), Vec::new())
    }

    pub(crate) fn from_parts(proto_tag: String, primitives: Vec<String>) -> Self {
        let serialized = render(&proto_tag, &primitives);
        Prompt {
            proto_tag,
            primitives,
            serialized,
        }
    }

    /// Parse a serialized prompt back into its token list. The first token
    /// becomes the tag.
    pub fn parse(serialized: &str) -> Result<Self, PromptError> {
        if serialized.is_empty() {
            return Err(PromptError::Empty);
        }
        let mut tokens = serialized.split(SEPARATOR).map(str::to_string);
        let proto_tag = tokens.next().expect("split yields at least one token");
        Prompt::new(proto_tag, tokens.collect())
    }

    pub fn proto_tag(&self) -> &str {
        &self.proto_tag
    }

    /// Primitives in serialized order (tag excluded).
    pub fn primitives(&self) -> &[String] {
        &self.primitives
    }

    /// The exact serialized string: tag and primitives joined by `" + "`.
    pub fn serialized(&self) -> &str {
        &self.serialized
    }

    /// All tokens in order, tag first.
    pub fn tokens(&self) -> Vec<&str> {
        std::iter::once(self.proto_tag.as_str())
            .chain(self.primitives.iter().map(String::as_str))
            .collect()
    }
}

impl std::fmt::Display for Prompt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.serialized)
    }
}

fn render(proto_tag: &str, primitives: &[String]) -> String {
    let mut out = String::with_capacity(
        proto_tag.len() + primitives.iter().map(|p| p.len() + SEPARATOR.len()).sum::<usize>(),
    );
    out.push_str(proto_tag);
    for p in primitives {
        out.push_str(SEPARATOR);
        out.push_str(p);
    }
    out
}

/// Knobs for stochastic prompt generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptGenConfig {
    /// Per-attribute Bernoulli retention probability for dropout, in (0, 1].
    pub keep_prob: f64,
    /// Number of negatives per instance (k).
    pub num_negatives: usize,
    /// Dimensions replaced per counterfactual negative (r).
    pub replacements_per_negative: usize,
    /// Root seed for the generation stream.
    pub rng_seed: u64,
}

impl Default for PromptGenConfig {
    fn default() -> Self {
        PromptGenConfig {
            keep_prob: 0.5,
            num_negatives: 3,
            replacements_per_negative: 1,
            rng_seed: 0,
        }
    }
}

impl PromptGenConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(PromptError::InvalidKeepProb(self.keep_prob));
        }
        if self.replacements_per_negative == 0 {
            return Err(PromptError::InvalidReplacements);
        }
        Ok(())
    }
}

/// Generate a stochastic positive view of an instance: independent
/// per-attribute dropout followed by a uniform permutation of the survivors.
/// The tag is never dropped or moved. An empty survivor set (bare-tag
/// prompt) is allowed.
///
/// The instance must validate against its dictionary; assignments are
/// consumed in their stored order before shuffling.
pub fn generate_positive<R: Rng + ?Sized>(
    instance: &InstanceAttributeSet,
    config: &PromptGenConfig,
    rng: &mut R,
) -> Prompt {
    let mut kept: Vec<String> = Vec::with_capacity(instance.len());
    for (_, primitive) in instance.assignments() {
        if rng.random::<f64>() < config.keep_prob {
            kept.push(primitive.clone());
        }
    }
    kept.shuffle(rng);
    Prompt::from_parts(instance.proto_tag().to_string(), kept)
}

/// Generate `k` negatives for a positive prompt.
///
/// Each counterfactual negative differs from the positive in exactly
/// `replacements_per_negative` dimension assignments, swapping each replaced
/// primitive for a same-dimension antagonist while leaving the other tokens
/// and their order untouched. Negatives are sampled uniformly without
/// replacement from the counterfactual space; when the positive is too short
/// or the space is exhausted, the shortfall is filled with bare-tag prompts
/// of other categories (duplicates only appear once those categories are
/// exhausted too).
pub fn generate_negatives<R: Rng + ?Sized>(
    dict: &AttributeDictionary,
    positive: &Prompt,
    instance: &InstanceAttributeSet,
    config: &PromptGenConfig,
    rng: &mut R,
) -> Result<Vec<Prompt>, PromptError> {
    config.validate()?;
    let k = config.num_negatives;
    if k == 0 {
        return Ok(Vec::new());
    }
    if positive.proto_tag() != instance.proto_tag() {
        return Err(PromptError::PositiveInstanceMismatch(format!(
            "tag {:?} vs instance {:?}",
            positive.proto_tag(),
            instance.proto_tag()
        )));
    }
    for primitive in positive.primitives() {
        if instance.assignments().iter().all(|(_, v)| v != primitive) {
            return Err(PromptError::PositiveInstanceMismatch(format!(
                "primitive {primitive:?} is not assigned on the instance"
            )));
        }
    }

    let space = CounterfactualSpace::build(dict, positive, config.replacements_per_negative)?;
    let mut negatives = space.sample(k, rng);
    if negatives.len() < k {
        let shortfall = k - negatives.len();
        let fallbacks =
            generate_category_fallback_negatives(dict, positive.proto_tag(), shortfall, rng)?;
        negatives.extend(fallbacks);
    }
    Ok(negatives)
}

/// The set of single-instance counterfactuals: every way of replacing
/// exactly `r` of the positive's primitives with same-dimension antagonists.
/// Candidates are indexed in a fixed order (position combinations
/// lexicographically, antagonists in dictionary order) so sampling is
/// reproducible.
struct CounterfactualSpace<'a> {
    positive: &'a Prompt,
    /// Per replaced-position-combination: the positions and, per position,
    /// the antagonist list in dictionary order.
    combos: Vec<Combo<'a>>,
    total: u64,
}

struct Combo<'a> {
    positions: Vec<usize>,
    antagonists: Vec<Vec<&'a str>>,
    size: u64,
}

impl<'a> CounterfactualSpace<'a> {
    fn build(
        dict: &'a AttributeDictionary,
        positive: &'a Prompt,
        replacements: usize,
    ) -> Result<Self, PromptError> {
        let n = positive.primitives().len();
        let mut per_position: Vec<Vec<&str>> = Vec::with_capacity(n);
        for primitive in positive.primitives() {
            let key = dict.dimension_of(positive.proto_tag(), primitive)?;
            per_position.push(dict.antagonists(positive.proto_tag(), key, primitive)?);
        }

        let mut combos = Vec::new();
        let mut total: u64 = 0;
        if replacements <= n {
            for positions in combinations(n, replacements) {
                let antagonists: Vec<Vec<&str>> =
                    positions.iter().map(|&p| per_position[p].clone()).collect();
                let size = antagonists
                    .iter()
                    .map(|a| a.len() as u64)
                    .product::<u64>();
                if size > 0 {
                    total += size;
                    combos.push(Combo {
                        positions,
                        antagonists,
                        size,
                    });
                }
            }
        }
        Ok(CounterfactualSpace {
            positive,
            combos,
            total,
        })
    }

    /// Decode the candidate at `index` in enumeration order.
    fn candidate(&self, index: u64) -> Prompt {
        let mut remaining = index;
        for combo in &self.combos {
            if remaining >= combo.size {
                remaining -= combo.size;
                continue;
            }
            let mut primitives = self.positive.primitives().to_vec();
            // Mixed-radix decode over the antagonist lists.
            for (slot, antagonists) in combo.antagonists.iter().enumerate().rev() {
                let radix = antagonists.len() as u64;
                let digit = (remaining % radix) as usize;
                remaining /= radix;
                primitives[combo.positions[slot]] = antagonists[digit].to_string();
            }
            return Prompt::from_parts(self.positive.proto_tag().to_string(), primitives);
        }
        unreachable!("candidate index out of range");
    }

    /// Up to `k` distinct counterfactuals. When `k` covers the whole space
    /// the candidates come back in enumeration order; otherwise they are
    /// drawn uniformly without replacement via the stream.
    fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<Prompt> {
        if self.total == 0 {
            return Vec::new();
        }
        if k as u64 >= self.total {
            return (0..self.total).map(|i| self.candidate(i)).collect();
        }
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let index = rng.random_range(0..self.total);
            if seen.insert(index) {
                out.push(self.candidate(index));
            }
        }
        out
    }
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
        // Advance to the next combination.
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

/// Draw `k` bare-tag prompts of categories other than `proto_tag`: without
/// replacement until the pool is exhausted, then with replacement.
pub fn generate_category_fallback_negatives<R: Rng + ?Sized>(
    dict: &AttributeDictionary,
    proto_tag: &str,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Prompt>, PromptError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let others: Vec<&str> = dict
        .category_names()
        .filter(|name| *name != proto_tag)
        .collect();
    if others.is_empty() {
        return Err(PromptError::NoFallbackCategory(proto_tag.to_string()));
    }
    let mut order: Vec<usize> = (0..others.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let pick = if i < order.len() {
            order[i]
        } else {
            rng.random_range(0..others.len())
        };
        out.push(Prompt::bare(others[pick]));
    }
    Ok(out)
}

/// Enumerate every compositional prompt over `n_attrs` distinct dimensions
/// of a category: one prompt per dimension subset x per primitive choice, in
/// dictionary order.
pub fn generate_compositional_prompts(
    dict: &AttributeDictionary,
    category: &str,
    n_attrs: usize,
) -> Result<Vec<Prompt>, PromptError> {
    let cat = dict
        .category(category)
        .ok_or_else(|| DictionaryError::UnknownCategory(category.to_string()))?;
    let dims = cat.dimensions();
    if n_attrs > dims.len() {
        return Err(PromptError::TooManyAttributes {
            category: category.to_string(),
            available: dims.len(),
            requested: n_attrs,
        });
    }
    let mut prompts = Vec::new();
    for subset in combinations(dims.len(), n_attrs) {
        let mut choice = vec![0usize; n_attrs];
        loop {
            let primitives: Vec<String> = subset
                .iter()
                .zip(&choice)
                .map(|(&d, &c)| dims[d].primitives()[c].clone())
                .collect();
            prompts.push(Prompt::from_parts(category.to_string(), primitives));
            // Odometer increment over the primitive choices, last dimension
            // fastest, so output stays in dictionary order.
            let mut slot = n_attrs;
            loop {
                if slot == 0 {
                    break;
                }
                slot -= 1;
                choice[slot] += 1;
                if choice[slot] < dims[subset[slot]].len() {
                    break;
                }
                choice[slot] = 0;
                if slot == 0 {
                    break;
                }
            }
            if choice.iter().all(|&c| c == 0) {
                break;
            }
            if n_attrs == 0 {
                break;
            }
        }
        if n_attrs == 0 {
            // The single empty combination yields the bare-tag prompt once.
            break;
        }
    }
    Ok(prompts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::CategoryRecord;
    use crate::rng::stream;
    use std::collections::{HashMap, HashSet};

    fn demo_dict() -> AttributeDictionary {
        AttributeDictionary::from_records(vec![
            CategoryRecord::new(
                "Plane",
                [
                    (
                        "Number of engines",
                        vec!["One-engine", "Twin-engine", "Four-engine", "Eight-engine"],
                    ),
                    ("Propulsion type", vec!["Jet", "Propeller"]),
                    (
                        "Wing configuration",
                        vec!["Straight wing", "Swept wing", "Flying wing"],
                    ),
                ],
            ),
            CategoryRecord::new("Ship", [("Usage", vec!["Civilian Ship", "Military Ship"])]),
            CategoryRecord::new("Bridge", [("Span", vec!["Short", "Long"])]),
            CategoryRecord::new("Harbor", [("Size", vec!["Small", "Large"])]),
        ])
        .unwrap()
    }

    fn plane_instance() -> InstanceAttributeSet {
        InstanceAttributeSet::with_assignments(
            "Plane",
            [
                ("Number of engines", "Twin-engine"),
                ("Propulsion type", "Jet"),
                ("Wing configuration", "Swept wing"),
            ],
        )
    }

    #[test]
    fn serialization_matches_the_documented_form() {
        let p = Prompt::new(
            "Plane",
            vec!["four engines".to_string(), "swept wings".to_string()],
        )
        .unwrap();
        assert_eq!(p.serialized(), "Plane + four engines + swept wings");
        assert_eq!(Prompt::bare("Plane").serialized(), "Plane");
    }

    #[test]
    fn parse_inverts_serialize() {
        let p = Prompt::new(
            "Plane",
            vec!["Twin-engine".to_string(), "Swept wing".to_string()],
        )
        .unwrap();
        let parsed = Prompt::parse(p.serialized()).unwrap();
        assert_eq!(parsed, p);
        assert_eq!(parsed.tokens(), vec!["Plane", "Twin-engine", "Swept wing"]);
    }

    #[test]
    fn duplicate_primitives_are_rejected() {
        let err = Prompt::new("Plane", vec!["Jet".into(), "Jet".into()]).unwrap_err();
        assert!(matches!(err, PromptError::DuplicatePrimitive(_)));
    }

    #[test]
    fn keep_prob_one_retains_everything() {
        let cfg = PromptGenConfig {
            keep_prob: 1.0,
            ..PromptGenConfig::default()
        };
        let inst = plane_instance();
        let mut rng = stream(11, "positive");
        for _ in 0..50 {
            let p = generate_positive(&inst, &cfg, &mut rng);
            assert_eq!(p.primitives().len(), inst.len());
            assert_eq!(p.proto_tag(), "Plane");
            let set: HashSet<&str> = p.primitives().iter().map(String::as_str).collect();
            assert_eq!(
                set,
                HashSet::from(["Twin-engine", "Jet", "Swept wing"]),
                "dropout must not fire at keep_prob 1.0"
            );
        }
    }

    #[test]
    fn positive_primitives_are_a_subset_of_the_instance() {
        let cfg = PromptGenConfig::default();
        let inst = plane_instance();
        let mut rng = stream(12, "positive");
        for _ in 0..200 {
            let p = generate_positive(&inst, &cfg, &mut rng);
            for primitive in p.primitives() {
                assert!(inst.assignments().iter().any(|(_, v)| v == primitive));
            }
        }
    }

    #[test]
    fn dropout_subset_frequencies_match_the_bernoulli_product_law() {
        // Independent-Bernoulli oracle: with keep_prob 0.5 over 3 attributes
        // each of the 8 subsets has probability 1/8 exactly.
        let cfg = PromptGenConfig {
            keep_prob: 0.5,
            ..PromptGenConfig::default()
        };
        let inst = plane_instance();
        let draws = 10_000usize;
        let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
        let mut rng = stream(4242, "dropout-law");
        for _ in 0..draws {
            let p = generate_positive(&inst, &cfg, &mut rng);
            let mut key: Vec<String> = p.primitives().to_vec();
            key.sort_unstable();
            *counts.entry(key).or_default() += 1;
        }
        assert_eq!(counts.len(), 8, "all 8 subsets should occur");
        let expected = draws as f64 / 8.0;
        let sigma = (draws as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
        for (subset, count) in &counts {
            let dev = (*count as f64 - expected).abs();
            assert!(
                dev <= 3.0 * sigma,
                "subset {subset:?} occurred {count} times, expected {expected} +- {:.1}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn single_swap_negatives_enumerate_all_antagonists() {
        // One primitive from a 4-primitive dimension, r = 1, k = 3: the
        // counterfactual space is exactly the 3 antagonist prompts.
        let dict = demo_dict();
        let inst = InstanceAttributeSet::with_assignments(
            "Plane",
            [("Number of engines", "Twin-engine")],
        );
        let cfg = PromptGenConfig {
            keep_prob: 1.0,
            num_negatives: 3,
            replacements_per_negative: 1,
            rng_seed: 0,
        };
        let mut rng = stream(0, "negatives");
        let positive = generate_positive(&inst, &cfg, &mut rng);
        let negatives = generate_negatives(&dict, &positive, &inst, &cfg, &mut rng).unwrap();
        let got: Vec<&str> = negatives.iter().map(|p| p.serialized()).collect();
        assert_eq!(
            got,
            vec![
                "Plane + One-engine",
                "Plane + Four-engine",
                "Plane + Eight-engine"
            ],
            "full coverage comes back in dictionary order"
        );
    }

    #[test]
    fn negatives_differ_in_exactly_r_dimensions() {
        let dict = demo_dict();
        let inst = plane_instance();
        for r in 1..=2usize {
            let cfg = PromptGenConfig {
                keep_prob: 1.0,
                num_negatives: 6,
                replacements_per_negative: r,
                rng_seed: 0,
            };
            let mut rng = stream(77 + r as u64, "negatives");
            let positive = generate_positive(&inst, &cfg, &mut rng);
            let negatives =
                generate_negatives(&dict, &positive, &inst, &cfg, &mut rng).unwrap();
            assert_eq!(negatives.len(), 6);
            for neg in &negatives {
                assert_eq!(neg.proto_tag(), "Plane");
                // Brute-force diff by dimension.
                let diff = assignment_diff(&dict, &positive, neg);
                assert_eq!(diff, r, "negative {neg} differs in {diff} dims, wanted {r}");
                // Still a valid instance: one primitive per dimension.
                let as_instance = prompt_as_instance(&dict, neg);
                assert!(dict.validate_instance(&as_instance).is_empty());
            }
            // Pairwise distinct.
            let set: HashSet<&str> = negatives.iter().map(|p| p.serialized()).collect();
            assert_eq!(set.len(), negatives.len());
            assert!(!set.contains(positive.serialized()));
        }
    }

    fn assignment_diff(dict: &AttributeDictionary, a: &Prompt, b: &Prompt) -> usize {
        let to_map = |p: &Prompt| -> HashMap<String, String> {
            p.primitives()
                .iter()
                .map(|prim| {
                    (
                        dict.dimension_of(p.proto_tag(), prim).unwrap().to_string(),
                        prim.clone(),
                    )
                })
                .collect()
        };
        let ma = to_map(a);
        let mb = to_map(b);
        let keys: HashSet<&String> = ma.keys().chain(mb.keys()).collect();
        keys.into_iter()
            .filter(|k| ma.get(*k) != mb.get(*k))
            .count()
    }

    fn prompt_as_instance(dict: &AttributeDictionary, p: &Prompt) -> InstanceAttributeSet {
        let pairs: Vec<(String, String)> = p
            .primitives()
            .iter()
            .map(|prim| {
                (
                    dict.dimension_of(p.proto_tag(), prim).unwrap().to_string(),
                    prim.clone(),
                )
            })
            .collect();
        InstanceAttributeSet::with_assignments(p.proto_tag(), pairs)
    }

    #[test]
    fn replacement_keeps_other_positions_and_order() {
        let dict = demo_dict();
        let inst = plane_instance();
        let cfg = PromptGenConfig {
            keep_prob: 1.0,
            num_negatives: 5,
            replacements_per_negative: 1,
            rng_seed: 0,
        };
        let mut rng = stream(5, "negatives-order");
        let positive = generate_positive(&inst, &cfg, &mut rng);
        let negatives = generate_negatives(&dict, &positive, &inst, &cfg, &mut rng).unwrap();
        for neg in &negatives {
            assert_eq!(neg.primitives().len(), positive.primitives().len());
            let changed: Vec<usize> = positive
                .primitives()
                .iter()
                .zip(neg.primitives())
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(changed.len(), 1, "exactly one position changed in place");
        }
    }

    #[test]
    fn zero_negatives_requested_yields_empty_list() {
        let dict = demo_dict();
        let inst = plane_instance();
        let cfg = PromptGenConfig {
            num_negatives: 0,
            ..PromptGenConfig::default()
        };
        let mut rng = stream(1, "negatives");
        let positive = generate_positive(&inst, &cfg, &mut rng);
        let negatives = generate_negatives(&dict, &positive, &inst, &cfg, &mut rng).unwrap();
        assert!(negatives.is_empty());
    }

    #[test]
    fn bare_positive_falls_back_to_other_categories() {
        let dict = demo_dict();
        let inst = InstanceAttributeSet::new("Plane");
        let cfg = PromptGenConfig {
            num_negatives: 3,
            ..PromptGenConfig::default()
        };
        let mut rng = stream(9, "fallback");
        let positive = generate_positive(&inst, &cfg, &mut rng);
        assert!(positive.primitives().is_empty());
        let negatives = generate_negatives(&dict, &positive, &inst, &cfg, &mut rng).unwrap();
        assert_eq!(negatives.len(), 3);
        for neg in &negatives {
            assert!(neg.primitives().is_empty());
            assert_ne!(neg.proto_tag(), "Plane");
        }
    }

    #[test]
    fn fallback_sampling_is_without_replacement_until_exhausted() {
        let dict = demo_dict();
        let mut rng = stream(2, "fallback-wr");
        let negs = generate_category_fallback_negatives(&dict, "Plane", 2, &mut rng).unwrap();
        assert_eq!(negs.len(), 2);
        let tags: HashSet<&str> = negs.iter().map(|p| p.proto_tag()).collect();
        assert_eq!(tags.len(), 2, "no repeats before exhaustion");
        for tag in &tags {
            assert!(["Ship", "Bridge", "Harbor"].contains(tag));
        }
        // Ask for more than exist: first three are distinct, rest repeat.
        let mut rng = stream(3, "fallback-wr");
        let many = generate_category_fallback_negatives(&dict, "Plane", 7, &mut rng).unwrap();
        assert_eq!(many.len(), 7);
        let first_three: HashSet<&str> = many[..3].iter().map(|p| p.proto_tag()).collect();
        assert_eq!(first_three.len(), 3);
    }

    #[test]
    fn fallback_without_other_categories_errors() {
        let dict = AttributeDictionary::from_records(vec![CategoryRecord::new(
            "Plane",
            [("Propulsion type", vec!["Jet", "Propeller"])],
        )])
        .unwrap();
        let mut rng = stream(4, "fallback-single");
        let err =
            generate_category_fallback_negatives(&dict, "Plane", 1, &mut rng).unwrap_err();
        assert!(matches!(err, PromptError::NoFallbackCategory(_)));
        // k = 0 stays fine even then.
        let empty =
            generate_category_fallback_negatives(&dict, "Plane", 0, &mut rng).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn compositional_counts_match_the_enumeration_oracle() {
        // Sizes {4, 2, 3}: pairs contribute 4*2 + 4*3 + 2*3 = 26.
        let dict = demo_dict();
        let prompts = generate_compositional_prompts(&dict, "Plane", 2).unwrap();
        assert_eq!(prompts.len(), 26);
        // Independent oracle: subset-sum of products via bitmask enumeration.
        let sizes = [4usize, 2, 3];
        let mut expected = 0usize;
        for mask in 0u32..8 {
            if mask.count_ones() == 2 {
                let mut product = 1;
                for (i, size) in sizes.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        product *= size;
                    }
                }
                expected += product;
            }
        }
        assert_eq!(prompts.len(), expected);
        // All distinct, tag first everywhere.
        let set: HashSet<&str> = prompts.iter().map(|p| p.serialized()).collect();
        assert_eq!(set.len(), prompts.len());
        for p in &prompts {
            assert_eq!(p.proto_tag(), "Plane");
            assert_eq!(p.primitives().len(), 2);
        }
    }

    #[test]
    fn compositional_two_by_three_yields_six() {
        let dict = AttributeDictionary::from_records(vec![CategoryRecord::new(
            "C",
            [("a", vec!["a1", "a2"]), ("b", vec!["b1", "b2", "b3"])],
        )])
        .unwrap();
        let prompts = generate_compositional_prompts(&dict, "C", 2).unwrap();
        assert_eq!(prompts.len(), 6);
        assert_eq!(prompts[0].serialized(), "C + a1 + b1");
        assert_eq!(prompts[5].serialized(), "C + a2 + b3");
    }

    #[test]
    fn atomic_prompts_cover_single_dimensions() {
        let dict = demo_dict();
        let prompts = generate_compositional_prompts(&dict, "Plane", 1).unwrap();
        assert_eq!(prompts.len(), 4 + 2 + 3);
        assert!(prompts
            .iter()
            .any(|p| p.serialized() == "Plane + Eight-engine"));
    }

    #[test]
    fn too_many_attributes_is_an_error() {
        let dict = demo_dict();
        let err = generate_compositional_prompts(&dict, "Plane", 4).unwrap_err();
        assert!(matches!(err, PromptError::TooManyAttributes { .. }));
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let dict = demo_dict();
        let inst = plane_instance();
        let cfg = PromptGenConfig::default();
        let run = |seed: u64| -> Vec<String> {
            let mut rng = stream(seed, "determinism");
            let mut out = Vec::new();
            for _ in 0..20 {
                let pos = generate_positive(&inst, &cfg, &mut rng);
                let negs = generate_negatives(&dict, &pos, &inst, &cfg, &mut rng).unwrap();
                out.push(pos.serialized().to_string());
                out.extend(negs.iter().map(|p| p.serialized().to_string()));
            }
            out
        };
        assert_eq!(run(123), run(123));
        assert_ne!(run(123), run(124));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn token() -> impl Strategy<Value = String> {
            "[A-Za-z][A-Za-z0-9 _-]{0,10}[A-Za-z0-9]".prop_filter(
                "serializer-safe token",
                |s| !s.contains(SEPARATOR) && !s.starts_with("+ ") && !s.ends_with(" +"),
            )
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn serialize_parse_round_trip(
                tag in token(),
                prims in proptest::collection::vec(token(), 0..5)
            ) {
                let mut unique = prims;
                unique.sort();
                unique.dedup();
                let p = Prompt::new(tag, unique).unwrap();
                let parsed = Prompt::parse(p.serialized()).unwrap();
                prop_assert_eq!(parsed.tokens(), p.tokens());
            }

            #[test]
            fn proto_tag_is_always_token_zero(
                seed in any::<u64>(),
                keep_prob in 0.05f64..=1.0
            ) {
                let dict = demo_dict();
                let inst = plane_instance();
                let cfg = PromptGenConfig { keep_prob, num_negatives: 4, replacements_per_negative: 1, rng_seed: seed };
                let mut rng = stream(seed, "prop-tag");
                let pos = generate_positive(&inst, &cfg, &mut rng);
                prop_assert_eq!(pos.tokens()[0], "Plane");
                let negs = generate_negatives(&dict, &pos, &inst, &cfg, &mut rng).unwrap();
                for neg in negs {
                    let tokens = neg.tokens();
                    prop_assert_eq!(tokens[0], neg.proto_tag());
                }
            }
        }
    }
}
