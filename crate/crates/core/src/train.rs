//! Full-batch gradient-descent trainer for the desk-scale encoders.
//!
//! Plain deterministic gradient descent from a seeded Gaussian
//! initialization: no momentum, no adaptive state, so every run is exactly
//! reproducible and the loss trace is analytically checkable.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::EncoderParams;
use crate::grad::{loss_and_gradients, GradError, TrainingExample};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("example {index} has feature dimension {got}, expected {expected}")]
    FeatureDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Grad(#[from] GradError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Embedding dimension.
    pub d: usize,
    /// Standard deviation of the Gaussian initialization.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        ToyTrainConfig {
            learning_rate: 1.0,
            epochs: 200,
            d: 16,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    /// Mean batch loss at the start of each epoch, before that epoch's
    /// update.
    pub loss_trace: Vec<f64>,
}

/// Train on the full dataset for `epochs` steps of gradient descent.
///
/// The vocabulary is the set of tokens appearing in the dataset's prompts;
/// initialization draws follow sorted token order, so identical seeds give
/// bit-identical outcomes.
pub fn train_toy(
    dataset: &[TrainingExample],
    config: &ToyTrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_toy_with_vocabulary(dataset, std::iter::empty::<String>(), config)
}

/// Like [`train_toy`], with extra tokens folded into the vocabulary so the
/// trained table also covers prompts the dataset happens not to exercise.
pub fn train_toy_with_vocabulary(
    dataset: &[TrainingExample],
    extra_vocabulary: impl IntoIterator<Item = String>,
    config: &ToyTrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let d_in = dataset[0].visual_feature.len();
    for (index, example) in dataset.iter().enumerate() {
        if example.visual_feature.len() != d_in {
            return Err(TrainError::FeatureDimension {
                index,
                got: example.visual_feature.len(),
                expected: d_in,
            });
        }
    }

    let mut vocabulary: BTreeSet<String> = extra_vocabulary.into_iter().collect();
    for example in dataset {
        for prompt in std::iter::once(&example.positive).chain(&example.negatives) {
            for token in prompt.tokens() {
                vocabulary.insert(token.to_string());
            }
        }
    }

    let mut rng = crate::rng::stream(config.seed, "train-init");
    let mut params = EncoderParams::init_random(
        vocabulary,
        config.d,
        d_in,
        config.init_scale,
        &mut rng,
    );

    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grads) = loss_and_gradients(&params, dataset)?;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch, loss });
        }
        loss_trace.push(loss);

        let lr = config.learning_rate;
        for (token, grad) in &grads.token_table {
            let emb = params
                .token_table_mut()
                .get_mut(token)
                .expect("gradient tokens mirror parameter tokens");
            for (w, g) in emb.iter_mut().zip(grad) {
                *w -= lr * g;
            }
        }
        for (w, g) in params.visual_proj_mut().iter_mut().zip(&grads.visual_proj) {
            *w -= lr * g;
        }
        let rho = params.log_temperature() - lr * grads.log_temperature;
        params.set_log_temperature(rho);
    }

    Ok(TrainOutcome { params, loss_trace })
}
