//! Analytic gradients of the instance-wise contrastive loss.
//!
//! Differentiates the mean batch loss through cosine similarity, L2
//! normalization, mean pooling, the visual projection, and the
//! log-temperature. Accumulation runs in a fixed order (batch order, positive
//! before negatives, tokens sorted) so results are identical across runs and
//! platforms.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::encoder::{dot, l2_norm, EncoderError, EncoderParams};
use crate::loss::log_sum_exp;
use crate::prompts::Prompt;

#[derive(Debug, Error)]
pub enum GradError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("training example needs at least one negative")]
    NoNegatives,
    #[error("a negative prompt equals the positive: {0:?}")]
    NegativeEqualsPositive(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// One visual instance paired with its positive prompt and its own negative
/// set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub visual_feature: Vec<f64>,
    pub positive: Prompt,
    pub negatives: Vec<Prompt>,
}

impl TrainingExample {
    pub fn new(
        visual_feature: Vec<f64>,
        positive: Prompt,
        negatives: Vec<Prompt>,
    ) -> Result<Self, GradError> {
        if negatives.is_empty() {
            return Err(GradError::NoNegatives);
        }
        if let Some(dup) = negatives.iter().find(|n| **n == positive) {
            return Err(GradError::NegativeEqualsPositive(
                dup.serialized().to_string(),
            ));
        }
        Ok(TrainingExample {
            visual_feature,
            positive,
            negatives,
        })
    }
}

/// Gradients with the same shape as the parameters. Tokens that never appear
/// in the batch carry exactly zero gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGradients {
    pub token_table: BTreeMap<String, Vec<f64>>,
    pub visual_proj: Vec<f64>,
    pub log_temperature: f64,
}

impl EncoderGradients {
    fn zeros_like(params: &EncoderParams) -> Self {
        EncoderGradients {
            token_table: params
                .token_table()
                .keys()
                .map(|t| (t.clone(), vec![0.0; params.d()]))
                .collect(),
            visual_proj: vec![0.0; params.visual_proj().len()],
            log_temperature: 0.0,
        }
    }

    /// Flatten in the canonical parameter order (sorted tokens, projection
    /// row-major, log-temperature), matching `EncoderParams::param`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(
            self.token_table.values().map(Vec::len).sum::<usize>() + self.visual_proj.len() + 1,
        );
        for emb in self.token_table.values() {
            out.extend_from_slice(emb);
        }
        out.extend_from_slice(&self.visual_proj);
        out.push(self.log_temperature);
        out
    }

    fn scale(&mut self, factor: f64) {
        for emb in self.token_table.values_mut() {
            for g in emb {
                *g *= factor;
            }
        }
        for g in &mut self.visual_proj {
            *g *= factor;
        }
        self.log_temperature *= factor;
    }
}

/// Mean instance-wise loss over a batch: forward pass only. Shares no code
/// with the backward pass beyond the encoders themselves.
pub fn batch_mean_loss(
    params: &EncoderParams,
    batch: &[TrainingExample],
) -> Result<f64, GradError> {
    if batch.is_empty() {
        return Err(GradError::EmptyBatch);
    }
    let tau = params.temperature();
    let mut total = 0.0;
    for example in batch {
        let image = params.encode_visual(&example.visual_feature)?;
        let mut logits = Vec::with_capacity(example.negatives.len() + 1);
        let pos = params.encode_text(&example.positive)?;
        logits.push(dot(&image, &pos) / tau);
        for neg in &example.negatives {
            let emb = params.encode_text(neg)?;
            logits.push(dot(&image, &emb) / tau);
        }
        total += log_sum_exp(&logits) - logits[0];
    }
    Ok(total / batch.len() as f64)
}

/// Exact gradients of the mean instance-wise loss with respect to every
/// token embedding, the visual projection, and the log-temperature.
pub fn loss_gradients(
    params: &EncoderParams,
    batch: &[TrainingExample],
) -> Result<EncoderGradients, GradError> {
    loss_and_gradients(params, batch).map(|(_, grads)| grads)
}

/// Forward and backward in one pass; returns (mean loss, gradients).
pub fn loss_and_gradients(
    params: &EncoderParams,
    batch: &[TrainingExample],
) -> Result<(f64, EncoderGradients), GradError> {
    if batch.is_empty() {
        return Err(GradError::EmptyBatch);
    }
    let tau = params.temperature();
    let d = params.d();
    let mut grads = EncoderGradients::zeros_like(params);
    let mut total_loss = 0.0;

    for example in batch {
        // Forward pass with intermediates kept for the backward sweep.
        let raw_visual = params.project(&example.visual_feature);
        let raw_norm = l2_norm(&raw_visual);
        if raw_norm == 0.0 {
            return Err(EncoderError::ZeroNorm {
                what: "visual feature".to_string(),
            }
            .into());
        }
        let image: Vec<f64> = raw_visual.iter().map(|x| x / raw_norm).collect();

        struct PromptForward<'a> {
            tokens: Vec<&'a str>,
            mean_norm: f64,
            text_emb: Vec<f64>,
            logit: f64,
        }
        let mut forwards: Vec<PromptForward> = Vec::with_capacity(example.negatives.len() + 1);
        for prompt in std::iter::once(&example.positive).chain(&example.negatives) {
            let mut tokens = prompt.tokens();
            tokens.sort_unstable();
            let mut mean = vec![0.0; d];
            for token in &tokens {
                let emb = params
                    .token_embedding(token)
                    .ok_or_else(|| EncoderError::UnknownToken(token.to_string()))?;
                for (m, e) in mean.iter_mut().zip(emb) {
                    *m += e;
                }
            }
            let count = tokens.len() as f64;
            for m in &mut mean {
                *m /= count;
            }
            let mean_norm = l2_norm(&mean);
            if mean_norm == 0.0 {
                return Err(EncoderError::ZeroNorm {
                    what: format!("prompt {:?}", prompt.serialized()),
                }
                .into());
            }
            let text_emb: Vec<f64> = mean.iter().map(|x| x / mean_norm).collect();
            let logit = dot(&image, &text_emb) / tau;
            forwards.push(PromptForward {
                tokens,
                mean_norm,
                text_emb,
                logit,
            });
        }

        let logits: Vec<f64> = forwards.iter().map(|f| f.logit).collect();
        let lse = log_sum_exp(&logits);
        total_loss += lse - logits[0];

        // dL/dz_t = softmax(z)_t - [t == positive]
        let dl_dz: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(t, z)| (z - lse).exp() - if t == 0 { 1.0 } else { 0.0 })
            .collect();

        // z_t = s_t / tau with tau = exp(rho), so dz_t/drho = -z_t.
        grads.log_temperature += dl_dz
            .iter()
            .zip(&logits)
            .map(|(g, z)| -g * z)
            .sum::<f64>();

        // Backprop into the image embedding: s_t = image . text_t.
        let mut dl_dimage = vec![0.0; d];
        for (forward, gz) in forwards.iter().zip(&dl_dz) {
            let coeff = gz / tau;
            for (gi, t) in dl_dimage.iter_mut().zip(&forward.text_emb) {
                *gi += coeff * t;
            }

            // Backprop into this prompt's tokens: through the similarity,
            // the normalization, and the mean pool.
            let mut dl_dtext: Vec<f64> = image.iter().map(|x| coeff * x).collect();
            let radial = dot(&dl_dtext, &forward.text_emb);
            for (g, t) in dl_dtext.iter_mut().zip(&forward.text_emb) {
                *g = (*g - radial * t) / forward.mean_norm;
            }
            let share = 1.0 / forward.tokens.len() as f64;
            for token in &forward.tokens {
                let slot = grads
                    .token_table
                    .get_mut(*token)
                    .expect("token present in gradient table");
                for (g, dm) in slot.iter_mut().zip(&dl_dtext) {
                    *g += share * dm;
                }
            }
        }

        // Through the visual normalization into the projection.
        let radial = dot(&dl_dimage, &image);
        let dl_draw: Vec<f64> = dl_dimage
            .iter()
            .zip(&image)
            .map(|(g, u)| (g - radial * u) / raw_norm)
            .collect();
        let d_in = params.d_in();
        for (row, g_row) in dl_draw.iter().enumerate() {
            let offset = row * d_in;
            for (j, x) in example.visual_feature.iter().enumerate() {
                grads.visual_proj[offset + j] += g_row * x;
            }
        }
    }

    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    Ok((total_loss * scale, grads))
}
