//! Synthetic data: a separable toy attribute task and a sample dictionary.
//!
//! The toy task draws one primitive per dimension uniformly, then emits a
//! visual feature that is the concatenation of the per-dimension one-hot
//! encodings plus Gaussian noise. A linear projection can separate it, which
//! makes end-to-end behavior (training, calibration, filtration) checkable
//! with hard expectations instead of vibes.

use rand::Rng;

use crate::dictionary::{AttributeDictionary, CategoryRecord, InstanceAttributeSet};
use crate::filtration::InstanceMeta;
use crate::grad::TrainingExample;
use crate::prompts::{self, PromptGenConfig};
use crate::records::FeatureRecord;
use crate::rng::normal;

/// A generic dictionary with one attribute-bearing category of the
/// requested dimension arities (keys `k0, k1, ...`, primitives `k0-v0,
/// k0-v1, ...`), plus optional attribute-free decoy categories to back
/// category-fallback negatives.
pub fn toy_dictionary(
    category: &str,
    sizes: &[usize],
    decoys: &[&str],
) -> AttributeDictionary {
    let dims: Vec<(String, Vec<String>)> = sizes
        .iter()
        .enumerate()
        .map(|(m, &n)| {
            let key = format!("k{m}");
            let values = (0..n).map(|j| format!("k{m}-v{j}")).collect();
            (key, values)
        })
        .collect();
    let mut records = vec![CategoryRecord::new(category, dims)];
    for decoy in decoys {
        records.push(CategoryRecord::new(
            *decoy,
            Vec::<(String, Vec<String>)>::new(),
        ));
    }
    AttributeDictionary::from_records(records).expect("generated dictionary is valid")
}

/// A small aircraft dictionary with realistic dimensions, handy for demos
/// and tests.
pub fn plane_dictionary() -> AttributeDictionary {
    AttributeDictionary::from_records(vec![
        CategoryRecord::new(
            "Plane",
            [
                ("Propulsion type", vec!["Jet", "Propeller"]),
                (
                    "Number of engines",
                    vec!["One-engine", "Twin-engine", "Four-engine", "Eight-engine"],
                ),
                (
                    "Wing configuration",
                    vec![
                        "Straight wing",
                        "Swept wing",
                        "Flying wing",
                        "Swept delta wing",
                    ],
                ),
            ],
        ),
        CategoryRecord::new(
            "Ship",
            [(
                "Usage",
                vec!["Civilian Ship", "Commercial Ship", "Military Ship"],
            )],
        ),
        CategoryRecord::new(
            "Vehicle",
            [("Usage", vec!["Engineering Vehicle", "Truck", "Van"])],
        ),
    ])
    .expect("sample dictionary is valid")
}

/// One synthetic instance: its true attributes and its noisy feature.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub instance_id: String,
    pub attributes: InstanceAttributeSet,
    pub feature: Vec<f64>,
}

/// Feature dimensionality of the one-hot layout for a category.
pub fn feature_dim(dict: &AttributeDictionary, category: &str) -> usize {
    dict.category(category)
        .map(|c| c.dimensions().iter().map(|d| d.len()).sum())
        .unwrap_or(0)
}

/// Draw `count` instances of `category` with uniformly random primitives and
/// one-hot-plus-noise features.
pub fn generate_instances<R: Rng + ?Sized>(
    dict: &AttributeDictionary,
    category: &str,
    count: usize,
    noise_std: f64,
    id_prefix: &str,
    rng: &mut R,
) -> Vec<SyntheticInstance> {
    let cat = dict.category(category).expect("category exists");
    let d_in = feature_dim(dict, category);
    (0..count)
        .map(|i| {
            let mut assignments = Vec::new();
            let mut feature = vec![0.0; d_in];
            let mut offset = 0;
            for dim in cat.dimensions() {
                let pick = rng.random_range(0..dim.len());
                assignments.push((dim.key().to_string(), dim.primitives()[pick].clone()));
                feature[offset + pick] = 1.0;
                offset += dim.len();
            }
            for x in &mut feature {
                *x += normal(rng, 0.0, noise_std);
            }
            SyntheticInstance {
                instance_id: format!("{id_prefix}{i}"),
                attributes: InstanceAttributeSet::with_assignments(category, assignments),
                feature,
            }
        })
        .collect()
}

/// Turn instances into training examples: a stochastic positive plus the
/// configured negatives per instance.
pub fn training_examples<R: Rng + ?Sized>(
    dict: &AttributeDictionary,
    instances: &[SyntheticInstance],
    config: &PromptGenConfig,
    rng: &mut R,
) -> Result<Vec<TrainingExample>, crate::prompts::PromptError> {
    let mut out = Vec::with_capacity(instances.len());
    for instance in instances {
        let positive = prompts::generate_positive(&instance.attributes, config, rng);
        let negatives =
            prompts::generate_negatives(dict, &positive, &instance.attributes, config, rng)?;
        out.push(
            TrainingExample::new(instance.feature.clone(), positive, negatives)
                .expect("generated example is well-formed"),
        );
    }
    Ok(out)
}

impl SyntheticInstance {
    pub fn feature_record(&self) -> FeatureRecord {
        FeatureRecord {
            instance_id: self.instance_id.clone(),
            category: self.attributes.proto_tag().to_string(),
            attributes: self
                .attributes
                .assignments()
                .iter()
                .cloned()
                .collect(),
            feature: self.feature.clone(),
        }
    }

    pub fn instance_meta(&self, image_id: &str) -> InstanceMeta {
        InstanceMeta {
            instance_id: self.instance_id.clone(),
            image_id: image_id.to_string(),
            bbox: [0.0, 0.0, 1.0, 1.0],
            category: self.attributes.proto_tag().to_string(),
        }
    }
}
