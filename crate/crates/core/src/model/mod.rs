//! A small decoder-only autoregressive transformer, trained from scratch.
//!
//! The architecture is the familiar pre-norm block with learned positional
//! embeddings and a weight-tied output head. Everything is written against a
//! [`math::Scalar`] trait so the same forward/backward code runs in `f32`
//! for training and in `f64` for the finite-difference gradient oracle.
//!
//! Determinism contract: given equal seeds, configs and corpus, two runs
//! produce bit-identical parameters, loss histories and samples — training
//! never branches on anything but those inputs, and each step's batch window
//! is derived from `(seed, step)` rather than from shared generator state,
//! which also makes checkpoint resume exact.

pub mod checkpoint;
pub mod math;
pub mod sample;
pub mod train;
pub mod transformer;

pub use checkpoint::ModelCheckpoint;
pub use sample::{sample, sample_from_checkpoint};
pub use train::{TokenStream, TrainObserver, Trainer};
pub use transformer::{
    backward, cross_entropy_loss, cross_entropy_loss_and_grad, forward, forward_with_cache,
    init_parameters, Parameters,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard ceiling on the context window.
pub const MAX_CONTEXT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: u32,
    pub context_length: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// MLP hidden width as a multiple of `embed_dim`.
    pub mlp_ratio: usize,
    /// Master seed: parameter init, training windows and checkpoint samples
    /// all derive their streams from it.
    pub seed: u64,
}

impl ModelConfig {
    /// The desk-scale default: 4 layers, 4 heads, embed 128, context 256,
    /// sized for the 19x19 move-level vocabulary.
    pub fn desk_default(vocab_size: u32, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_size,
            context_length: 256,
            embed_dim: 128,
            num_layers: 4,
            num_heads: 4,
            mlp_ratio: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.vocab_size < 4 {
            return fail(format!("vocab_size {} < 4", self.vocab_size));
        }
        if self.context_length < 2 || self.context_length > MAX_CONTEXT {
            return fail(format!(
                "context_length {} outside 2..={MAX_CONTEXT}",
                self.context_length
            ));
        }
        if self.embed_dim == 0 || self.num_layers == 0 || self.num_heads == 0 || self.mlp_ratio == 0
        {
            return fail("zero-sized dimension".to_string());
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return fail(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn mlp_dim(&self) -> usize {
        self.embed_dim * self.mlp_ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LrSchedule {
    Constant,
    /// Linear decay from the base rate to zero over `total_steps`.
    LinearDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub total_steps: u64,
    pub checkpoint_every: u64,
    /// Tokens per checkpoint-time sample; `None` means
    /// `min(context_length, 1024)`.
    pub sample_length_at_checkpoint: Option<usize>,
    /// Off unless explicitly requested; clips the global gradient L2 norm.
    pub grad_clip: Option<f64>,
    pub lr_schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            total_steps: 1000,
            checkpoint_every: 100,
            sample_length_at_checkpoint: None,
            grad_clip: None,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return fail(format!("learning_rate {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.total_steps == 0 || self.checkpoint_every == 0 {
            return fail("batch_size, total_steps and checkpoint_every must be positive".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail(format!("betas ({}, {})", self.beta1, self.beta2));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return fail(format!("eps {}", self.eps));
        }
        if self.sample_length_at_checkpoint == Some(0) {
            return fail("sample_length_at_checkpoint must be positive".into());
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return fail(format!("grad_clip {c}"));
            }
        }
        Ok(())
    }

    pub fn sample_length(&self, model: &ModelConfig) -> usize {
        self.sample_length_at_checkpoint
            .unwrap_or_else(|| model.context_length.min(MAX_CONTEXT))
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::LinearDecay => {
                let done = (step.saturating_sub(1)) as f64 / self.total_steps as f64;
                self.learning_rate * (1.0 - done.min(1.0))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("sequence length {len} exceeds context length {max}")]
    ContextOverflow { len: usize, max: usize },
    #[error("token id {0} outside the vocabulary")]
    TokenOutOfRange(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("corpus produced no tokens")]
    EmptyCorpus,
    #[error("corpus stream of {corpus} tokens is shorter than one {window}-token window")]
    ContextLongerThanCorpus { corpus: usize, window: usize },
    #[error("temperature {0} is not positive")]
    InvalidTemperature(f64),
    #[error("top_k must be at least 1")]
    InvalidTopK,
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
