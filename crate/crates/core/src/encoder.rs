//! Analytic desk-scale encoders.
//!
//! The text encoder mean-pools per-token embeddings over the prompt's tokens
//! (tag included) and L2-normalizes; pooling is performed in a canonical
//! token order so the output is bitwise invariant under primitive
//! permutation. The visual encoder is a linear projection of a precomputed
//! feature vector, also L2-normalized. Temperature is stored as a
//! log-parameter so it stays strictly positive.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::AttributeDictionary;
use crate::prompts::Prompt;

/// Temperature init used throughout: tau = 0.07.
pub const DEFAULT_TEMPERATURE: f64 = 0.07;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("token {token:?} has embedding dimension {got}, expected {expected}")]
    EmbeddingDimension {
        token: String,
        got: usize,
        expected: usize,
    },
    #[error("feature has dimension {got}, expected {expected}")]
    FeatureDimension { got: usize, expected: usize },
    #[error("vectors have mismatched dimensions {0} and {1}")]
    VectorDimensions(usize, usize),
    #[error("projection matrix has {got} entries, expected {expected}")]
    ProjectionShape { got: usize, expected: usize },
    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,
    #[error("encoding of {what} has zero norm (degenerate parameters)")]
    ZeroNorm { what: String },
    #[error("no candidate prompts to rank")]
    EmptyCandidates,
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("unknown dimension {key:?} in category {category:?}")]
    UnknownDimension { category: String, key: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint is malformed: {0}")]
    Checkpoint(String),
}

/// Learnable parameters: a token embedding table, a visual projection, and a
/// log-temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    d: usize,
    d_in: usize,
    token_table: BTreeMap<String, Vec<f64>>,
    /// Row-major d x d_in.
    visual_proj: Vec<f64>,
    log_temperature: f64,
}

impl EncoderParams {
    pub fn from_parts(
        d: usize,
        d_in: usize,
        token_table: BTreeMap<String, Vec<f64>>,
        visual_proj: Vec<f64>,
        log_temperature: f64,
    ) -> Result<Self, EncoderError> {
        for (token, emb) in &token_table {
            if emb.len() != d {
                return Err(EncoderError::EmbeddingDimension {
                    token: token.clone(),
                    got: emb.len(),
                    expected: d,
                });
            }
        }
        if visual_proj.len() != d * d_in {
            return Err(EncoderError::ProjectionShape {
                got: visual_proj.len(),
                expected: d * d_in,
            });
        }
        Ok(EncoderParams {
            d,
            d_in,
            token_table,
            visual_proj,
            log_temperature,
        })
    }

    /// Seeded Gaussian(0, init_scale^2) initialization over a vocabulary.
    /// Tokens are materialized in sorted order so the draw sequence is
    /// reproducible.
    pub fn init_random<R: rand::Rng + ?Sized>(
        vocabulary: impl IntoIterator<Item = String>,
        d: usize,
        d_in: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        let tokens: std::collections::BTreeSet<String> = vocabulary.into_iter().collect();
        let mut token_table = BTreeMap::new();
        for token in tokens {
            let emb: Vec<f64> = (0..d).map(|_| crate::rng::normal(rng, 0.0, init_scale)).collect();
            token_table.insert(token, emb);
        }
        let visual_proj: Vec<f64> = (0..d * d_in)
            .map(|_| crate::rng::normal(rng, 0.0, init_scale))
            .collect();
        EncoderParams {
            d,
            d_in,
            token_table,
            visual_proj,
            log_temperature: DEFAULT_TEMPERATURE.ln(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn log_temperature(&self) -> f64 {
        self.log_temperature
    }

    pub fn set_log_temperature(&mut self, value: f64) {
        self.log_temperature = value;
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.token_table.keys().map(String::as_str)
    }

    pub fn token_embedding(&self, token: &str) -> Option<&[f64]> {
        self.token_table.get(token).map(Vec::as_slice)
    }

    pub fn token_table(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.token_table
    }

    pub fn token_table_mut(&mut self) -> &mut BTreeMap<String, Vec<f64>> {
        &mut self.token_table
    }

    pub fn visual_proj(&self) -> &[f64] {
        &self.visual_proj
    }

    pub fn visual_proj_mut(&mut self) -> &mut [f64] {
        &mut self.visual_proj
    }

    /// Total number of scalar parameters: token embeddings, projection,
    /// log-temperature.
    pub fn param_len(&self) -> usize {
        self.token_table.len() * self.d + self.visual_proj.len() + 1
    }

    /// Read the scalar parameter at `index` in canonical order: token
    /// embeddings by sorted token, then the projection row-major, then the
    /// log-temperature.
    pub fn param(&self, index: usize) -> f64 {
        let token_span = self.token_table.len() * self.d;
        if index < token_span {
            let emb = self
                .token_table
                .values()
                .nth(index / self.d)
                .expect("index in token span");
            emb[index % self.d]
        } else if index < token_span + self.visual_proj.len() {
            self.visual_proj[index - token_span]
        } else {
            self.log_temperature
        }
    }

    /// Write the scalar parameter at `index` (canonical order as `param`).
    pub fn set_param(&mut self, index: usize, value: f64) {
        let token_span = self.token_table.len() * self.d;
        if index < token_span {
            let d = self.d;
            let emb = self
                .token_table
                .values_mut()
                .nth(index / d)
                .expect("index in token span");
            emb[index % d] = value;
        } else if index < token_span + self.visual_proj.len() {
            self.visual_proj[index - token_span] = value;
        } else {
            self.log_temperature = value;
        }
    }

    /// Mean-pool the prompt's token embeddings (tag first token included)
    /// and L2-normalize. Tokens are summed in sorted order, which makes the
    /// result bitwise identical under any permutation of the primitives.
    pub fn encode_text(&self, prompt: &Prompt) -> Result<Vec<f64>, EncoderError> {
        let mut tokens = prompt.tokens();
        tokens.sort_unstable();
        let mut sum = vec![0.0; self.d];
        for token in &tokens {
            let emb = self
                .token_table
                .get(*token)
                .ok_or_else(|| EncoderError::UnknownToken(token.to_string()))?;
            for (s, e) in sum.iter_mut().zip(emb) {
                *s += e;
            }
        }
        let count = tokens.len() as f64;
        for s in &mut sum {
            *s /= count;
        }
        normalize(sum).ok_or_else(|| EncoderError::ZeroNorm {
            what: format!("prompt {:?}", prompt.serialized()),
        })
    }

    /// Project a raw visual feature and L2-normalize.
    pub fn encode_visual(&self, feature: &[f64]) -> Result<Vec<f64>, EncoderError> {
        if feature.len() != self.d_in {
            return Err(EncoderError::FeatureDimension {
                got: feature.len(),
                expected: self.d_in,
            });
        }
        let projected = self.project(feature);
        normalize(projected).ok_or_else(|| EncoderError::ZeroNorm {
            what: "visual feature".to_string(),
        })
    }

    /// Raw (unnormalized) projection of a feature; row-major matvec.
    pub(crate) fn project(&self, feature: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (row, slot) in out.iter_mut().enumerate() {
            let offset = row * self.d_in;
            let mut acc = 0.0;
            for (j, x) in feature.iter().enumerate() {
                acc += self.visual_proj[offset + j] * x;
            }
            *slot = acc;
        }
        out
    }

    /// Cosine similarities between a visual feature and each candidate
    /// prompt, sorted descending; ties keep candidate input order.
    pub fn rank_prompts(
        &self,
        feature: &[f64],
        candidates: &[Prompt],
    ) -> Result<Vec<(Prompt, f64)>, EncoderError> {
        if candidates.is_empty() {
            return Err(EncoderError::EmptyCandidates);
        }
        let image = self.encode_visual(feature)?;
        let mut scored: Vec<(Prompt, f64)> = Vec::with_capacity(candidates.len());
        for candidate in candidates {
            let text = self.encode_text(candidate)?;
            scored.push((candidate.clone(), cosine_sim(&image, &text)?));
        }
        // Stable sort preserves input order among equal scores.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(scored)
    }

    /// Softmax over a dimension's primitives of sim(image, tag + primitive)
    /// divided by temperature. Output follows dictionary order and sums to
    /// one up to rounding.
    pub fn attribute_probabilities(
        &self,
        feature: &[f64],
        dict: &AttributeDictionary,
        category: &str,
        dimension_key: &str,
    ) -> Result<Vec<f64>, EncoderError> {
        let cat = dict
            .category(category)
            .ok_or_else(|| EncoderError::UnknownCategory(category.to_string()))?;
        let dim = cat
            .dimension(dimension_key)
            .ok_or_else(|| EncoderError::UnknownDimension {
                category: category.to_string(),
                key: dimension_key.to_string(),
            })?;
        let image = self.encode_visual(feature)?;
        let tau = self.temperature();
        let mut logits = Vec::with_capacity(dim.len());
        for primitive in dim.primitives() {
            let prompt = Prompt::from_parts(category.to_string(), vec![primitive.clone()]);
            let text = self.encode_text(&prompt)?;
            logits.push(cosine_sim(&image, &text)? / tau);
        }
        Ok(softmax(&logits))
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        let tokens: Vec<String> = self.token_table.keys().cloned().collect();
        let embeddings: Vec<Vec<f64>> = self.token_table.values().cloned().collect();
        Checkpoint {
            d: self.d,
            d_in: self.d_in,
            tokens,
            embeddings,
            projection: self.visual_proj.clone(),
            log_temperature: self.log_temperature,
            seed,
        }
    }

    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self, EncoderError> {
        if checkpoint.tokens.len() != checkpoint.embeddings.len() {
            return Err(EncoderError::Checkpoint(format!(
                "{} tokens but {} embeddings",
                checkpoint.tokens.len(),
                checkpoint.embeddings.len()
            )));
        }
        let table: BTreeMap<String, Vec<f64>> = checkpoint
            .tokens
            .into_iter()
            .zip(checkpoint.embeddings)
            .collect();
        EncoderParams::from_parts(
            checkpoint.d,
            checkpoint.d_in,
            table,
            checkpoint.projection,
            checkpoint.log_temperature,
        )
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>, seed: u64) -> Result<(), EncoderError> {
        let doc = serde_json::to_string_pretty(&self.to_checkpoint(seed))
            .expect("checkpoint serializes");
        crate::jsonl::write_atomic(path, doc.as_bytes())?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Self, u64), EncoderError> {
        let text = std::fs::read_to_string(path)?;
        let checkpoint: Checkpoint =
            serde_json::from_str(&text).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
        let seed = checkpoint.seed;
        Ok((EncoderParams::from_checkpoint(checkpoint)?, seed))
    }
}

/// Serialized parameter document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub d: usize,
    pub d_in: usize,
    pub tokens: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
    /// Row-major d x d_in.
    pub projection: Vec<f64>,
    pub log_temperature: f64,
    pub seed: u64,
}

/// Cosine similarity of two nonzero vectors, clamped into [-1, 1].
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64, EncoderError> {
    if u.len() != v.len() {
        return Err(EncoderError::VectorDimensions(u.len(), v.len()));
    }
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(EncoderError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = l2_norm(&v);
    if norm == 0.0 {
        return None;
    }
    for x in &mut v {
        *x /= norm;
    }
    Some(v)
}
