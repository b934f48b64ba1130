//! Self-describing checkpoint container.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic            4 bytes  b"SGLM"
//! format_version   u32
//! header_len       u64
//! header           JSON: { config, vocab, step, loss_history }
//! tensor_count     u64
//! tensor record, repeated:
//!   name_len       u16
//!   name           UTF-8 bytes
//!   ndim           u8
//!   dims           ndim x u64
//!   data           prod(dims) x f32
//! ```
//!
//! Tensors appear in a fixed order: every parameter tensor, then the Adam
//! first moments under `opt.m.`, then the second moments under `opt.v.`.
//! Loading validates the magic, the version, the vocabulary descriptor, and
//! every tensor name and shape against the config.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::math::Tensor;
use super::transformer::Parameters;
use super::{ModelConfig, ModelError};
use crate::tokenizer::VocabDescriptor;

const MAGIC: &[u8; 4] = b"SGLM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    vocab: VocabDescriptor,
    step: u64,
    loss_history: Vec<f32>,
}

/// A sampleable, resumable training snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: ModelConfig,
    pub vocab: VocabDescriptor,
    pub step: u64,
    /// Mean training loss per step, from step 1.
    pub loss_history: Vec<f32>,
    pub params: Parameters<f32>,
    pub opt_m: Parameters<f32>,
    pub opt_v: Parameters<f32>,
}

impl ModelCheckpoint {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let header = serde_json::to_vec(&CheckpointHeader {
            config: self.config,
            vocab: self.vocab,
            step: self.step,
            loss_history: self.loss_history.clone(),
        })
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;

        let tensors = self.named_tensors();
        w.write_all(&(tensors.len() as u64).to_le_bytes())?;
        for (name, tensor) in tensors {
            let name_bytes = name.as_bytes();
            w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
            w.write_all(name_bytes)?;
            let shape = tensor.shape();
            w.write_all(&[shape.len() as u8])?;
            for &dim in shape {
                w.write_all(&(dim as u64).to_le_bytes())?;
            }
            for &v in tensor.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelCheckpoint, ModelError> {
        let mut r = BufReader::new(File::open(path)?);
        let bad = |msg: String| ModelError::Checkpoint(msg);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("wrong magic bytes".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(bad(format!(
                "format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let header_len = read_u64(&mut r)? as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)?;
        let header: CheckpointHeader =
            serde_json::from_slice(&header_bytes).map_err(|e| bad(format!("header: {e}")))?;
        header.config.validate()?;
        crate::tokenizer::Vocabulary::from_descriptor(&header.vocab)
            .map_err(ModelError::VocabularyMismatch)?;
        if header.vocab.size != header.config.vocab_size {
            return Err(ModelError::VocabularyMismatch(format!(
                "vocabulary of {} ids vs model vocab_size {}",
                header.vocab.size, header.config.vocab_size
            )));
        }

        let mut params = Parameters::<f32>::zeros(&header.config);
        let mut opt_m = Parameters::<f32>::zeros(&header.config);
        let mut opt_v = Parameters::<f32>::zeros(&header.config);
        let mut expected: Vec<(String, &mut Tensor<f32>)> = Vec::new();
        for (name, t) in params.named_mut() {
            expected.push((name, t));
        }
        for (name, t) in opt_m.named_mut() {
            expected.push((format!("opt.m.{name}"), t));
        }
        for (name, t) in opt_v.named_mut() {
            expected.push((format!("opt.v.{name}"), t));
        }

        let count = read_u64(&mut r)? as usize;
        if count != expected.len() {
            return Err(bad(format!("{count} tensors, expected {}", expected.len())));
        }
        for (name, tensor) in expected {
            let mut len_bytes = [0u8; 2];
            r.read_exact(&mut len_bytes)?;
            let mut name_bytes = vec![0u8; u16::from_le_bytes(len_bytes) as usize];
            r.read_exact(&mut name_bytes)?;
            let found =
                String::from_utf8(name_bytes).map_err(|_| bad("tensor name not UTF-8".into()))?;
            if found != name {
                return Err(bad(format!("tensor `{found}` where `{name}` was expected")));
            }
            let mut ndim = [0u8; 1];
            r.read_exact(&mut ndim)?;
            let mut dims = Vec::with_capacity(ndim[0] as usize);
            for _ in 0..ndim[0] {
                dims.push(read_u64(&mut r)? as usize);
            }
            if dims != tensor.shape() {
                return Err(bad(format!(
                    "tensor `{name}` has shape {dims:?}, expected {:?}",
                    tensor.shape()
                )));
            }
            let mut buf = vec![0u8; tensor.len() * 4];
            r.read_exact(&mut buf)?;
            for (v, chunk) in tensor.as_mut_slice().iter_mut().zip(buf.chunks_exact(4)) {
                *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            }
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(bad("trailing bytes after the last tensor".into()));
        }

        Ok(ModelCheckpoint {
            config: header.config,
            vocab: header.vocab,
            step: header.step,
            loss_history: header.loss_history,
            params,
            opt_m,
            opt_v,
        })
    }

    fn named_tensors(&self) -> Vec<(String, &Tensor<f32>)> {
        let mut out = self.params.named();
        for (name, t) in self.opt_m.named() {
            out.push((format!("opt.m.{name}"), t));
        }
        for (name, t) in self.opt_v.named() {
            out.push((format!("opt.v.{name}"), t));
        }
        out
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
