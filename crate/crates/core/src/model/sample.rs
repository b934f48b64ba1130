//! Unconditional temperature / top-k sampling with a per-layer KV cache.
//!
//! Generation starts from BOS and stops at EOS or `max_length` tokens. When
//! the context window fills, the cache is rebuilt from the most recent
//! `context_length / 2` tokens at fresh positions and generation continues —
//! so `max_length` may exceed the context length, with conditioning limited
//! to that sliding window.

use super::checkpoint::ModelCheckpoint;
use super::math::{axpy, dot, softmax_row};
use super::transformer::{gelu, layernorm_row, linear_row, Parameters};
use super::{ModelConfig, ModelError};
use crate::rng::Rng;
use crate::tokenizer::{BOS, EOS};

/// Grown per position: keys and values for every layer, `[pos, embed]`.
struct LayerKv {
    k: Vec<f32>,
    v: Vec<f32>,
}

struct Sampler<'a> {
    params: &'a Parameters<f32>,
    cfg: &'a ModelConfig,
    kv: Vec<LayerKv>,
    len: usize,
}

impl<'a> Sampler<'a> {
    fn new(params: &'a Parameters<f32>, cfg: &'a ModelConfig) -> Sampler<'a> {
        let kv = (0..cfg.num_layers)
            .map(|_| LayerKv {
                k: Vec::new(),
                v: Vec::new(),
            })
            .collect();
        Sampler {
            params,
            cfg,
            kv,
            len: 0,
        }
    }

    fn reset(&mut self) {
        for layer in &mut self.kv {
            layer.k.clear();
            layer.v.clear();
        }
        self.len = 0;
    }

    /// Runs one token at the next position and returns its logits row.
    /// The arithmetic per row matches the batch forward exactly.
    fn step(&mut self, token: u32) -> Vec<f32> {
        let cfg = self.cfg;
        let d = cfg.embed_dim;
        let heads = cfg.num_heads;
        let hd = cfg.head_dim();
        let md = cfg.mlp_dim();
        // same rounding path as the batch forward's T::from_f64
        let scale = (1.0 / (hd as f64).sqrt()) as f32;
        let pos = self.len;
        debug_assert!(pos < cfg.context_length);

        let mut x = vec![0.0f32; d];
        let te = self.params.wte.row(token as usize);
        let pe = self.params.wpe.row(pos);
        for j in 0..d {
            x[j] = te[j] + pe[j];
        }

        let mut ln_out = vec![0.0f32; d];
        let mut q = vec![0.0f32; d];
        let mut ctx = vec![0.0f32; d];
        let mut fc1_out = vec![0.0f32; md];
        let mut gelu_out = vec![0.0f32; md];
        let mut proj_out = vec![0.0f32; d];
        for (block, kvl) in self.params.blocks.iter().zip(self.kv.iter_mut()) {
            layernorm_row(&x, &block.ln1, &mut ln_out);
            linear_row(&ln_out, &block.wq, &mut q);
            let start = kvl.k.len();
            kvl.k.resize(start + d, 0.0);
            kvl.v.resize(start + d, 0.0);
            linear_row(&ln_out, &block.wk, &mut kvl.k[start..start + d]);
            linear_row(&ln_out, &block.wv, &mut kvl.v[start..start + d]);

            ctx.fill(0.0);
            let t_len = pos + 1;
            let mut att_row = vec![0.0f32; t_len];
            for h in 0..heads {
                let off = h * hd;
                let q_row = &q[off..off + hd];
                for (j, att) in att_row.iter_mut().enumerate() {
                    let k_row = &kvl.k[j * d + off..j * d + off + hd];
                    *att = dot(q_row, k_row) * scale;
                }
                softmax_row(&mut att_row);
                let ctx_row = &mut ctx[off..off + hd];
                for (j, &att) in att_row.iter().enumerate() {
                    let v_row = &kvl.v[j * d + off..j * d + off + hd];
                    axpy(ctx_row, v_row, att);
                }
            }

            linear_row(&ctx, &block.proj, &mut proj_out);
            for (xv, &p) in x.iter_mut().zip(&proj_out) {
                *xv += p;
            }

            layernorm_row(&x, &block.ln2, &mut ln_out);
            linear_row(&ln_out, &block.fc1, &mut fc1_out);
            for (g, &u) in gelu_out.iter_mut().zip(&fc1_out) {
                *g = gelu(u);
            }
            linear_row(&gelu_out, &block.fc2, &mut proj_out);
            for (xv, &p) in x.iter_mut().zip(&proj_out) {
                *xv += p;
            }
        }

        layernorm_row(&x, &self.params.ln_f, &mut ln_out);
        let vocab = cfg.vocab_size as usize;
        let mut logits = vec![0.0f32; vocab];
        for (o, wrow) in logits
            .iter_mut()
            .zip(self.params.wte.as_slice().chunks_exact(d))
        {
            *o = dot(&ln_out, wrow);
        }

        self.len = pos + 1;
        logits
    }
}

/// Picks the next token from scaled logits. Candidates are ranked by
/// (probability, then lower id) and restricted to the top `k` before the
/// softmax draw, so `top_k = 1` is exactly greedy argmax.
fn draw_token(logits: &[f32], temperature: f64, top_k: Option<usize>, rng: &mut Rng) -> u32 {
    let scaled: Vec<f64> = logits.iter().map(|&l| l as f64 / temperature).collect();
    let mut order: Vec<u32> = (0..scaled.len() as u32).collect();
    order.sort_by(|&a, &b| {
        scaled[b as usize]
            .partial_cmp(&scaled[a as usize])
            .expect("finite logits")
            .then(a.cmp(&b))
    });
    let keep = top_k.unwrap_or(usize::MAX).min(order.len());
    let candidates = &order[..keep];

    let max = scaled[candidates[0] as usize];
    let weights: Vec<f64> = candidates
        .iter()
        .map(|&id| (scaled[id as usize] - max).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.next_f64() * total;
    for (&id, &w) in candidates.iter().zip(&weights) {
        u -= w;
        if u < 0.0 {
            return id;
        }
    }
    *candidates.last().expect("top_k >= 1")
}

/// Generates one unconditional sequence. The result always starts with BOS,
/// ends at the first EOS or at `max_length` tokens, and is a pure function
/// of `(params, cfg, max_length, temperature, top_k, seed)`.
pub fn sample(
    params: &Parameters<f32>,
    cfg: &ModelConfig,
    max_length: usize,
    temperature: f64,
    top_k: Option<usize>,
    seed: u64,
) -> Result<Vec<u32>, ModelError> {
    cfg.validate()?;
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(ModelError::InvalidTemperature(temperature));
    }
    if top_k == Some(0) {
        return Err(ModelError::InvalidTopK);
    }
    let mut rng = Rng::new(seed);
    let mut sampler = Sampler::new(params, cfg);
    let mut seq = vec![BOS];
    if max_length <= 1 {
        return Ok(seq);
    }
    let mut logits = sampler.step(BOS);
    loop {
        let next = draw_token(&logits, temperature, top_k, &mut rng);
        seq.push(next);
        if next == EOS || seq.len() >= max_length {
            return Ok(seq);
        }
        if sampler.len == cfg.context_length {
            // window full: rebuild from the most recent half
            let keep = (cfg.context_length / 2).max(1);
            let tail = seq[seq.len() - keep..].to_vec();
            sampler.reset();
            let mut last = Vec::new();
            for &tok in &tail {
                last = sampler.step(tok);
            }
            logits = last;
        } else {
            logits = sampler.step(next);
        }
    }
}

/// Samples from a loaded checkpoint.
pub fn sample_from_checkpoint(
    ckpt: &ModelCheckpoint,
    max_length: usize,
    temperature: f64,
    top_k: Option<usize>,
    seed: u64,
) -> Result<Vec<u32>, ModelError> {
    sample(
        &ckpt.params,
        &ckpt.config,
        max_length,
        temperature,
        top_k,
        seed,
    )
}
