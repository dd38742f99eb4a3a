//! Structured-attribute annotation toolkit.
//!
//! Objects are described not by monolithic labels but by a category tag plus
//! orthogonal attribute dimensions with mutually exclusive states. This
//! crate provides the machinery around that representation:
//!
//! - [`dictionary`]: validated attribute dictionaries and per-instance
//!   attribute sets.
//! - [`prompts`]: stochastic positive prompts (dropout + shuffle),
//!   counterfactual hard negatives (same-dimension swaps), category
//!   fallbacks, and compositional enumeration.
//! - [`encoder`] / [`loss`] / [`grad`] / [`train`]: analytic desk-scale
//!   encoders, instance-wise and batch contrastive losses, exact gradients,
//!   and a deterministic full-batch trainer.
//! - [`gradcheck`]: central-difference verification of the gradients.
//! - [`conformal`]: split conformal calibration of per-class probability
//!   thresholds with a finite-sample coverage guarantee, plus a Monte Carlo
//!   harness that checks it.
//! - [`filtration`]: streaming candidate filtration under the calibrated
//!   thresholds, with exclusivity enforcement and dataset statistics.
//! - [`synth`]: synthetic separable tasks for end-to-end verification.
//!
//! Every randomized stage draws from a named, seeded stream ([`rng`]), so
//! identical inputs and seeds reproduce identical outputs byte for byte.
//!
//! See the crate examples for runnable walkthroughs of each capability.

pub mod conformal;
pub mod dictionary;
pub mod encoder;
pub mod filtration;
pub mod grad;
pub mod gradcheck;
pub mod jsonl;
pub mod loss;
pub mod prompts;
pub mod records;
pub mod rng;
pub mod synth;
pub mod train;

pub use conformal::{
    calibrate_thresholds, conformal_quantile, nonconformity, prediction_set, simulate_coverage,
    AttributeClass, CalibrationConfig, CalibrationRecord, ThresholdTable,
};
pub use dictionary::{AttributeDictionary, InstanceAttributeSet};
pub use encoder::{cosine_sim, EncoderParams};
pub use filtration::{
    dataset_stats, filter_annotations, score_candidates, CandidateAnnotation, FilteredAnnotation,
    PipelineStats,
};
pub use grad::{loss_gradients, TrainingExample};
pub use loss::{batch_infonce_loss, instance_contrastive_loss};
pub use prompts::{
    generate_category_fallback_negatives, generate_compositional_prompts, generate_negatives,
    generate_positive, Prompt, PromptGenConfig,
};
pub use train::{train_toy, train_toy_with_vocabulary, ToyTrainConfig};
