//! Contrastive losses over embeddings.
//!
//! Two objectives share one temperature: an instance-wise loss that softmaxes
//! a positive prompt against that instance's own hard negatives, and the
//! standard batch objective that softmaxes each image against every text in
//! the batch. Both are computed through a max-subtracted log-sum-exp so they
//! stay finite for logit gaps far beyond anything the encoders produce.

use thiserror::Error;

use crate::encoder::{cosine_sim, EncoderError};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("at least one negative embedding is required")]
    NoNegatives,
    #[error("temperature must be strictly positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("got {images} image embeddings but {texts} text embeddings")]
    BatchMismatch { images: usize, texts: usize },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// log(sum(exp(x_i))) with max subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    max + sum.ln()
}

/// Instance-wise contrastive loss: softmax the positive similarity against
/// the instance's own negative similarities.
///
/// Returns `-log( exp(s+/tau) / (exp(s+/tau) + sum_j exp(s-_j/tau)) )`,
/// which equals `ln(k+1)` when all similarities coincide and tends to zero
/// as the positive pulls ahead.
pub fn instance_contrastive_loss(
    image_emb: &[f64],
    pos_emb: &[f64],
    neg_embs: &[Vec<f64>],
    temperature: f64,
) -> Result<f64, LossError> {
    if neg_embs.is_empty() {
        return Err(LossError::NoNegatives);
    }
    if temperature <= 0.0 {
        return Err(LossError::NonPositiveTemperature(temperature));
    }
    let mut logits = Vec::with_capacity(neg_embs.len() + 1);
    logits.push(cosine_sim(image_emb, pos_emb)? / temperature);
    for neg in neg_embs {
        logits.push(cosine_sim(image_emb, neg)? / temperature);
    }
    Ok(log_sum_exp(&logits) - logits[0])
}

/// Batch objective: mean over pairs of the negative log softmax of the
/// matching text among all texts in the batch.
pub fn batch_infonce_loss(
    image_embs: &[Vec<f64>],
    text_embs: &[Vec<f64>],
    temperature: f64,
) -> Result<f64, LossError> {
    if image_embs.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    if image_embs.len() != text_embs.len() {
        return Err(LossError::BatchMismatch {
            images: image_embs.len(),
            texts: text_embs.len(),
        });
    }
    if temperature <= 0.0 {
        return Err(LossError::NonPositiveTemperature(temperature));
    }
    let n = image_embs.len();
    let mut total = 0.0;
    for (i, image) in image_embs.iter().enumerate() {
        let mut logits = Vec::with_capacity(n);
        for text in text_embs {
            logits.push(cosine_sim(image, text)? / temperature);
        }
        total += log_sum_exp(&logits) - logits[i];
    }
    Ok(total / n as f64)
}
