//! Wire records shared by the pipeline tools.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dictionary::InstanceAttributeSet;

/// A labeled instance without features: `{instance_id, category,
/// attributes}`, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: String,
    pub category: String,
    /// dimension key -> assigned primitive.
    pub attributes: BTreeMap<String, String>,
}

impl InstanceRecord {
    pub fn attribute_set(&self) -> InstanceAttributeSet {
        InstanceAttributeSet::with_assignments(
            self.category.clone(),
            self.attributes
                .iter()
                .map(|(k, v)| (k.clone(), v.clone())),
        )
    }
}

/// A labeled instance with a precomputed visual feature vector, the input to
/// toy training, scoring, and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub instance_id: String,
    pub category: String,
    pub attributes: BTreeMap<String, String>,
    pub feature: Vec<f64>,
}

impl FeatureRecord {
    pub fn attribute_set(&self) -> InstanceAttributeSet {
        InstanceAttributeSet::with_assignments(
            self.category.clone(),
            self.attributes
                .iter()
                .map(|(k, v)| (k.clone(), v.clone())),
        )
    }
}

/// What role a dumped prompt plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Positive,
    Negative,
    Fallback,
    Compositional,
}

/// One line of a prompt dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDumpRecord {
    pub instance_id: String,
    pub kind: PromptKind,
    pub tokens: Vec<String>,
    pub serialized: String,
    pub seed: u64,
}

/// One line of a loss trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTraceRecord {
    pub epoch: usize,
    pub loss: f64,
}
