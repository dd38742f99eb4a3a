//! Structured attribute dictionaries and per-instance attribute sets.
//!
//! A dictionary maps each object category to an ordered list of attribute
//! dimensions (independent axes of visual variation, e.g. engine count), and
//! each dimension to an ordered list of mutually exclusive semantic
//! primitives (its discrete states). An instance carries a category tag plus
//! at most one primitive per dimension.
//!
//! Structural rules enforced at construction:
//! - dimension keys are unique within a category,
//! - primitives are unique within a dimension and across all dimensions of
//!   one category, so every primitive maps back to exactly one dimension,
//! - every dimension has at least two primitives (a one-state dimension has
//!   no antagonist to swap in),
//! - category names and primitives must survive prompt serialization, so
//!   they may not embed the `" + "` separator.
//!
//! Dictionary order of categories, dimensions, and primitives is preserved
//! from the source document and used for every deterministic enumeration.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::SEPARATOR;

/// Wire record for one category, as stored in dictionary files
/// (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub category: String,
    pub dimensions: Vec<DimensionRecord>,
}

/// Wire record for one attribute dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionRecord {
    pub key: String,
    pub values: Vec<String>,
}

impl CategoryRecord {
    pub fn new<N, K, V, VI, DI>(category: N, dimensions: DI) -> Self
    where
        N: Into<String>,
        DI: IntoIterator<Item = (K, VI)>,
        K: Into<String>,
        VI: IntoIterator<Item = V>,
        V: Into<String>,
    {
        CategoryRecord {
            category: category.into(),
            dimensions: dimensions
                .into_iter()
                .map(|(key, values)| DimensionRecord {
                    key: key.into(),
                    values: values.into_iter().map(Into::into).collect(),
                })
                .collect(),
        }
    }
}

/// One attribute dimension: a key plus its ordered, mutually exclusive
/// primitive set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimension {
    key: String,
    primitives: Vec<String>,
}

impl Dimension {
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Primitives in dictionary order.
    pub fn primitives(&self) -> &[String] {
        &self.primitives
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn contains(&self, primitive: &str) -> bool {
        self.primitives.iter().any(|p| p == primitive)
    }
}

/// One category: its name plus ordered dimensions, with lookup indices.
#[derive(Debug, Clone)]
pub struct Category {
    name: String,
    dimensions: Vec<Dimension>,
    dim_index: HashMap<String, usize>,
    primitive_owner: HashMap<String, usize>,
}

impl Category {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Dimensions in dictionary order.
    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn dimension(&self, key: &str) -> Option<&Dimension> {
        self.dim_index.get(key).map(|&i| &self.dimensions[i])
    }

    /// The dimension owning `primitive`, if any. Total over the category's
    /// primitives thanks to cross-dimension uniqueness.
    pub fn dimension_of_primitive(&self, primitive: &str) -> Option<&Dimension> {
        self.primitive_owner
            .get(primitive)
            .map(|&i| &self.dimensions[i])
    }
}

/// Validated structured attribute dictionary.
///
/// Immutable after construction; shareable across worker threads.
#[derive(Debug, Clone)]
pub struct AttributeDictionary {
    categories: Vec<Category>,
    index: HashMap<String, usize>,
}

/// A structural constraint violation found while validating a dictionary
/// document or an instance attribute set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub context: String,
    pub message: String,
}

impl Violation {
    fn new(context: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            context: context.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("dictionary is structurally invalid:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("unknown dimension {key:?} in category {category:?}")]
    UnknownDimension { category: String, key: String },
    #[error("unknown primitive {primitive:?} in category {category:?}")]
    UnknownPrimitive {
        category: String,
        primitive: String,
    },
    #[error("primitive {primitive:?} does not belong to dimension {key:?} of category {category:?}")]
    PrimitiveNotInDimension {
        category: String,
        key: String,
        primitive: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl AttributeDictionary {
    /// Build a dictionary from category records, validating every structural
    /// constraint. All violations are collected before reporting.
    pub fn from_records(records: Vec<CategoryRecord>) -> Result<Self, DictionaryError> {
        let mut violations = Vec::new();
        let mut categories = Vec::with_capacity(records.len());
        let mut index = HashMap::new();

        for record in records {
            let ctx = format!("category {:?}", record.category);
            if record.category.is_empty() {
                violations.push(Violation::new(&ctx, "category name is empty"));
            }
            if let Some(reason) = separator_clash(&record.category) {
                violations.push(Violation::new(&ctx, format!("category name {reason}")));
            }
            if index.contains_key(&record.category) {
                violations.push(Violation::new(&ctx, "duplicate category"));
                continue;
            }

            let mut dimensions: Vec<Dimension> = Vec::with_capacity(record.dimensions.len());
            let mut dim_index = HashMap::new();
            let mut primitive_owner: HashMap<String, usize> = HashMap::new();

            for dim in record.dimensions {
                let dim_ctx = format!("{ctx}, dimension {:?}", dim.key);
                if dim.key.is_empty() {
                    violations.push(Violation::new(&dim_ctx, "dimension key is empty"));
                }
                if dim_index.contains_key(&dim.key) {
                    violations.push(Violation::new(&dim_ctx, "duplicate dimension key"));
                    continue;
                }
                if dim.values.len() < 2 {
                    violations.push(Violation::new(
                        &dim_ctx,
                        format!(
                            "dimension has {} primitive(s); at least 2 are required",
                            dim.values.len()
                        ),
                    ));
                }

                let dim_pos = dimensions.len();
                let mut seen_here: HashMap<&str, ()> = HashMap::new();
                for value in &dim.values {
                    if value.is_empty() {
                        violations.push(Violation::new(&dim_ctx, "primitive is empty"));
                        continue;
                    }
                    if let Some(reason) = separator_clash(value) {
                        violations.push(Violation::new(
                            &dim_ctx,
                            format!("primitive {value:?} {reason}"),
                        ));
                    }
                    if seen_here.insert(value.as_str(), ()).is_some() {
                        violations.push(Violation::new(
                            &dim_ctx,
                            format!("duplicate primitive {value:?}"),
                        ));
                        continue;
                    }
                    if let Some(&owner) = primitive_owner.get(value.as_str()) {
                        let owner_key: &str = &dimensions[owner].key;
                        violations.push(Violation::new(
                            &dim_ctx,
                            format!(
                                "primitive {value:?} already belongs to dimension {owner_key:?}"
                            ),
                        ));
                        continue;
                    }
                    primitive_owner.insert(value.clone(), dim_pos);
                }

                dim_index.insert(dim.key.clone(), dim_pos);
                dimensions.push(Dimension {
                    key: dim.key,
                    primitives: dim.values,
                });
            }

            index.insert(record.category.clone(), categories.len());
            categories.push(Category {
                name: record.category,
                dimensions,
                dim_index,
                primitive_owner,
            });
        }

        if violations.is_empty() {
            Ok(AttributeDictionary { categories, index })
        } else {
            Err(DictionaryError::Invalid(violations))
        }
    }

    /// Parse a dictionary from its line-delimited document form.
    pub fn parse_str(source: &str) -> Result<Self, DictionaryError> {
        Self::parse_reader(source.as_bytes())
    }

    pub fn parse_reader(reader: impl BufRead) -> Result<Self, DictionaryError> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CategoryRecord =
                serde_json::from_str(&line).map_err(|e| DictionaryError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            records.push(record);
        }
        Self::from_records(records)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DictionaryError> {
        let file = std::fs::File::open(path)?;
        Self::parse_reader(std::io::BufReader::new(file))
    }

    /// Serialize back to the line-delimited document form, preserving order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in self.to_records() {
            out.push_str(&serde_json::to_string(&record).expect("dictionary serializes"));
            out.push('\n');
        }
        out
    }

    pub fn to_records(&self) -> Vec<CategoryRecord> {
        self.categories
            .iter()
            .map(|c| CategoryRecord {
                category: c.name.clone(),
                dimensions: c
                    .dimensions
                    .iter()
                    .map(|d| DimensionRecord {
                        key: d.key.clone(),
                        values: d.primitives.clone(),
                    })
                    .collect(),
            })
            .collect()
    }

    /// Categories in dictionary order.
    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn category(&self, name: &str) -> Option<&Category> {
        self.index.get(name).map(|&i| &self.categories[i])
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    fn require_category(&self, name: &str) -> Result<&Category, DictionaryError> {
        self.category(name)
            .ok_or_else(|| DictionaryError::UnknownCategory(name.to_string()))
    }

    /// The unique dimension key owning `primitive` within `category`.
    pub fn dimension_of(&self, category: &str, primitive: &str) -> Result<&str, DictionaryError> {
        let cat = self.require_category(category)?;
        cat.dimension_of_primitive(primitive)
            .map(|d| d.key())
            .ok_or_else(|| DictionaryError::UnknownPrimitive {
                category: category.to_string(),
                primitive: primitive.to_string(),
            })
    }

    /// All same-dimension alternatives to `primitive`, in dictionary order.
    /// Never contains `primitive` itself; length is the dimension arity
    /// minus one.
    pub fn antagonists(
        &self,
        category: &str,
        dimension_key: &str,
        primitive: &str,
    ) -> Result<Vec<&str>, DictionaryError> {
        let cat = self.require_category(category)?;
        let dim = cat
            .dimension(dimension_key)
            .ok_or_else(|| DictionaryError::UnknownDimension {
                category: category.to_string(),
                key: dimension_key.to_string(),
            })?;
        if !dim.contains(primitive) {
            return Err(DictionaryError::PrimitiveNotInDimension {
                category: category.to_string(),
                key: dimension_key.to_string(),
                primitive: primitive.to_string(),
            });
        }
        Ok(dim
            .primitives()
            .iter()
            .filter(|p| p.as_str() != primitive)
            .map(|p| p.as_str())
            .collect())
    }

    /// Check an instance against the dictionary. Violations are data, not
    /// failures; an empty list means the instance is valid. Partial
    /// annotation (missing dimensions) is legal, as is an empty set.
    pub fn validate_instance(&self, instance: &InstanceAttributeSet) -> Vec<Violation> {
        let ctx = format!("instance of {:?}", instance.proto_tag);
        let Some(cat) = self.category(&instance.proto_tag) else {
            return vec![Violation::new(&ctx, "unknown category")];
        };
        let mut violations = Vec::new();
        let mut seen: HashMap<&str, ()> = HashMap::new();
        for (key, primitive) in &instance.assignments {
            if seen.insert(key.as_str(), ()).is_some() {
                violations.push(Violation::new(
                    &ctx,
                    format!("dimension {key:?} is assigned more than once"),
                ));
                continue;
            }
            match cat.dimension(key) {
                None => violations.push(Violation::new(&ctx, format!("unknown dimension {key:?}"))),
                Some(dim) => {
                    if !dim.contains(primitive) {
                        violations.push(Violation::new(
                            &ctx,
                            format!("unknown primitive {primitive:?} for dimension {key:?}"),
                        ));
                    }
                }
            }
        }
        violations
    }
}

/// Tokens flow through the prompt serializer, which joins them with `" + "`;
/// a token that collides with the separator would not round-trip.
fn separator_clash(token: &str) -> Option<&'static str> {
    if token.contains(SEPARATOR) {
        Some("contains the prompt separator \" + \"")
    } else if token.starts_with("+ ") {
        Some("starts with \"+ \"")
    } else if token.ends_with(" +") {
        Some("ends with \" +\"")
    } else {
        None
    }
}

/// Per-instance attribute assignments: a category tag plus at most one
/// primitive per dimension, in insertion order. May cover any subset of the
/// category's dimensions, including none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceAttributeSet {
    proto_tag: String,
    assignments: Vec<(String, String)>,
}

impl InstanceAttributeSet {
    pub fn new(proto_tag: impl Into<String>) -> Self {
        InstanceAttributeSet {
            proto_tag: proto_tag.into(),
            assignments: Vec::new(),
        }
    }

    pub fn with_assignments<K, V, I>(proto_tag: impl Into<String>, assignments: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        InstanceAttributeSet {
            proto_tag: proto_tag.into(),
            assignments: assignments
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    /// Assign a primitive to a dimension, replacing any prior assignment of
    /// the same dimension.
    pub fn assign(&mut self, dimension_key: impl Into<String>, primitive: impl Into<String>) {
        let key = dimension_key.into();
        let primitive = primitive.into();
        match self.assignments.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = primitive,
            None => self.assignments.push((key, primitive)),
        }
    }

    pub fn proto_tag(&self) -> &str {
        &self.proto_tag
    }

    /// Assignments in insertion order.
    pub fn assignments(&self) -> &[(String, String)] {
        &self.assignments
    }

    pub fn get(&self, dimension_key: &str) -> Option<&str> {
        self.assignments
            .iter()
            .find(|(k, _)| k == dimension_key)
            .map(|(_, v)| v.as_str())
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}
