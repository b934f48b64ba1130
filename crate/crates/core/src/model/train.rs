//! Adam training loop with checkpoint-and-sample cadence.

use super::checkpoint::ModelCheckpoint;
use super::math::Scalar;
use super::sample::sample;
use super::transformer::{
    backward, cross_entropy_loss_and_grad, forward_with_cache, init_parameters, Parameters,
};
use super::{ModelConfig, ModelError, TrainConfig};
use crate::rng::{stream, Rng};
use crate::sgf::{parse_game, GameRecord};
use crate::tokenizer::{TokenSequence, VocabDescriptor, VocabMode, Vocabulary};

/// The training stream: every encoded game concatenated in corpus order,
/// BOS/EOS markers included.
#[derive(Debug, Clone)]
pub struct TokenStream {
    ids: Vec<u32>,
    vocab: Vocabulary,
    /// Corpus lines that failed to parse or encode and were left out.
    pub skipped_games: usize,
}

impl TokenStream {
    /// Builds the stream from a preprocessed corpus (one game per line).
    pub fn from_corpus(corpus: &str, vocab: &Vocabulary) -> Result<TokenStream, ModelError> {
        let mut ids = Vec::new();
        let mut skipped = 0usize;
        for (i, line) in corpus.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let encoded = match vocab.mode() {
                VocabMode::MoveLevel => parse_game(line, &format!("line {}", i + 1))
                    .ok()
                    .and_then(|p| vocab.encode(&p.record).ok()),
                VocabMode::CharLevel => vocab.encode_line(line).ok(),
            };
            match encoded {
                Some(seq) => ids.extend_from_slice(&seq.ids),
                None => skipped += 1,
            }
        }
        if ids.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        Ok(TokenStream {
            ids,
            vocab: *vocab,
            skipped_games: skipped,
        })
    }

    /// Builds the stream straight from records (used by tests and fixtures).
    pub fn from_records(
        records: &[GameRecord],
        vocab: &Vocabulary,
    ) -> Result<TokenStream, ModelError> {
        let mut ids = Vec::new();
        let mut skipped = 0usize;
        for record in records {
            match vocab.encode(record) {
                Ok(seq) => ids.extend_from_slice(&seq.ids),
                Err(_) => skipped += 1,
            }
        }
        if ids.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        Ok(TokenStream {
            ids,
            vocab: *vocab,
            skipped_games: skipped,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }
}

/// Callbacks fired as training progresses. Checkpoint persistence is the
/// observer's business; the trainer only produces the artifacts.
pub trait TrainObserver {
    fn on_step(&mut self, _step: u64, _loss: f32) {}
    fn on_checkpoint(
        &mut self,
        _ckpt: &ModelCheckpoint,
        _sample: &TokenSequence,
    ) -> std::io::Result<()> {
        Ok(())
    }
}

/// No-op observer.
impl TrainObserver for () {}

/// Owns the parameters, optimizer moments and loss history of one training
/// run. Each step samples one context-length window per batch item,
/// uniformly at random from the stream, with the randomness derived from
/// `(model seed, step number)` so that resuming from a checkpoint replays
/// the exact same windows.
pub struct Trainer {
    model_config: ModelConfig,
    train_config: TrainConfig,
    vocab: VocabDescriptor,
    params: Parameters<f32>,
    opt_m: Parameters<f32>,
    opt_v: Parameters<f32>,
    step: u64,
    loss_history: Vec<f32>,
}

impl Trainer {
    pub fn new(
        model_config: ModelConfig,
        train_config: TrainConfig,
        vocab: &Vocabulary,
    ) -> Result<Trainer, ModelError> {
        model_config.validate()?;
        train_config.validate()?;
        if vocab.size() != model_config.vocab_size {
            return Err(ModelError::VocabularyMismatch(format!(
                "vocabulary of {} ids vs model vocab_size {}",
                vocab.size(),
                model_config.vocab_size
            )));
        }
        Ok(Trainer {
            params: init_parameters(&model_config)?,
            opt_m: Parameters::zeros(&model_config),
            opt_v: Parameters::zeros(&model_config),
            model_config,
            train_config,
            vocab: vocab.descriptor(),
            step: 0,
            loss_history: Vec::new(),
        })
    }

    /// Continues from a checkpoint: parameters, moments, step counter and
    /// loss history all resume exactly.
    pub fn from_checkpoint(
        ckpt: ModelCheckpoint,
        train_config: TrainConfig,
    ) -> Result<Trainer, ModelError> {
        ckpt.config.validate()?;
        train_config.validate()?;
        Ok(Trainer {
            model_config: ckpt.config,
            train_config,
            vocab: ckpt.vocab,
            params: ckpt.params,
            opt_m: ckpt.opt_m,
            opt_v: ckpt.opt_v,
            step: ckpt.step,
            loss_history: ckpt.loss_history,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn loss_history(&self) -> &[f32] {
        &self.loss_history
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.model_config
    }

    pub fn params(&self) -> &Parameters<f32> {
        &self.params
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            config: self.model_config,
            vocab: self.vocab,
            step: self.step,
            loss_history: self.loss_history.clone(),
            params: self.params.clone(),
            opt_m: self.opt_m.clone(),
            opt_v: self.opt_v.clone(),
        }
    }

    /// Runs `steps` more training steps. Every `checkpoint_every` steps the
    /// observer receives a checkpoint plus one unconditional sample.
    pub fn run(
        &mut self,
        stream: &TokenStream,
        steps: u64,
        observer: &mut impl TrainObserver,
    ) -> Result<(), ModelError> {
        if stream.vocab.descriptor() != self.vocab {
            return Err(ModelError::VocabularyMismatch(
                "stream vocabulary differs from the trainer's".into(),
            ));
        }
        let window = self.model_config.context_length;
        if stream.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        if stream.len() < window {
            return Err(ModelError::ContextLongerThanCorpus {
                corpus: stream.len(),
                window,
            });
        }

        let cfg = self.model_config;
        let tcfg = self.train_config;
        for _ in 0..steps {
            let t = self.step + 1;
            let mut rng = Rng::derive(cfg.seed, stream::WINDOW, t);
            let mut loss_sum = 0.0f64;
            let mut grads: Option<Parameters<f32>> = None;
            for _ in 0..tcfg.batch_size {
                let start = rng.next_below((stream.len() - window + 1) as u64) as usize;
                let slice = &stream.ids[start..start + window];
                let inputs = &slice[..window - 1];
                let targets = &slice[1..];
                let (logits, cache) = forward_with_cache(&self.params, &cfg, inputs)?;
                let (loss, d_logits) = cross_entropy_loss_and_grad(&logits, targets)?;
                loss_sum += loss.to_f64();
                let g = backward(&self.params, &cfg, &cache, &d_logits);
                match grads.as_mut() {
                    None => grads = Some(g),
                    Some(acc) => acc.add_assign(&g),
                }
            }
            let mut grads = grads.expect("batch_size >= 1");
            if tcfg.batch_size > 1 {
                grads.scale(1.0f32 / tcfg.batch_size as f32);
            }
            if let Some(clip) = tcfg.grad_clip {
                let norm = grads.sq_norm().sqrt();
                if norm > clip {
                    grads.scale((clip / norm) as f32);
                }
            }
            self.adam_update(&grads, t);
            self.step = t;
            let mean_loss = (loss_sum / tcfg.batch_size as f64) as f32;
            self.loss_history.push(mean_loss);
            observer.on_step(t, mean_loss);

            if t.is_multiple_of(tcfg.checkpoint_every) {
                let ckpt = self.to_checkpoint();
                let sample_seed = Rng::derive(cfg.seed, stream::SAMPLE, t).next_u64();
                let ids = sample(
                    &self.params,
                    &cfg,
                    tcfg.sample_length(&cfg),
                    1.0,
                    None,
                    sample_seed,
                )?;
                let seq = TokenSequence {
                    ids,
                    mode: stream.vocab.mode(),
                };
                observer
                    .on_checkpoint(&ckpt, &seq)
                    .map_err(ModelError::Io)?;
            }
        }
        Ok(())
    }

    fn adam_update(&mut self, grads: &Parameters<f32>, t: u64) {
        let tcfg = &self.train_config;
        let lr = tcfg.lr_at(t) as f32;
        let beta1 = tcfg.beta1 as f32;
        let beta2 = tcfg.beta2 as f32;
        let eps = tcfg.eps as f32;
        let bc1 = 1.0 - beta1.powi(t.min(i32::MAX as u64) as i32);
        let bc2 = 1.0 - beta2.powi(t.min(i32::MAX as u64) as i32);

        let p_tensors = self.params.named_mut();
        let g_tensors = grads.named();
        let m_tensors = self.opt_m.named_mut();
        let v_tensors = self.opt_v.named_mut();
        for (((np, gt), mt), vt) in p_tensors
            .into_iter()
            .zip(g_tensors)
            .zip(m_tensors)
            .zip(v_tensors)
        {
            let (_, p) = np;
            let (_, g) = gt;
            let (_, m) = mt;
            let (_, v) = vt;
            let p = p.as_mut_slice();
            let g = g.as_slice();
            let m = m.as_mut_slice();
            let v = v.as_mut_slice();
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
