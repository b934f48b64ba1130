//! Flat `key = value` config files mirroring the model and train settings.
//!
//! ```text
//! # model
//! context_length = 256
//! embed_dim = 128
//! num_layers = 4
//! num_heads = 4
//! mlp_ratio = 4
//! # training
//! learning_rate = 1e-4
//! batch_size = 1
//! checkpoint_every = 100
//! sample_length = 256
//! grad_clip = 1.0
//! lr_schedule = constant | linear
//! ```
//!
//! Precedence: built-in defaults, then the config file, then explicit flags.

use std::collections::BTreeMap;
use std::path::Path;

use sgflm::model::{LrSchedule, ModelConfig, TrainConfig};

use crate::error::CliError;

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::new(
                "ConfigError",
                format!("{}:{}: expected `key = value`", path.display(), lineno + 1),
            ));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse::<T>()
        .map_err(|_| CliError::new("ConfigError", format!("bad value `{value}` for `{key}`")))
}

/// Applies config-file keys onto the default configs. Unknown keys fail
/// loudly; silently ignoring a typo in an experiment config wastes hours.
pub fn apply_config(
    map: &BTreeMap<String, String>,
    model: &mut ModelConfig,
    train: &mut TrainConfig,
) -> Result<(), CliError> {
    for (key, value) in map {
        match key.as_str() {
            "context_length" => model.context_length = parse(key, value)?,
            "embed_dim" => model.embed_dim = parse(key, value)?,
            "num_layers" => model.num_layers = parse(key, value)?,
            "num_heads" => model.num_heads = parse(key, value)?,
            "mlp_ratio" => model.mlp_ratio = parse(key, value)?,
            "learning_rate" => train.learning_rate = parse(key, value)?,
            "batch_size" => train.batch_size = parse(key, value)?,
            "beta1" => train.beta1 = parse(key, value)?,
            "beta2" => train.beta2 = parse(key, value)?,
            "eps" => train.eps = parse(key, value)?,
            "checkpoint_every" => train.checkpoint_every = parse(key, value)?,
            "sample_length" => train.sample_length_at_checkpoint = Some(parse(key, value)?),
            "grad_clip" => train.grad_clip = Some(parse(key, value)?),
            "lr_schedule" => {
                train.lr_schedule = match value.as_str() {
                    "constant" => LrSchedule::Constant,
                    "linear" => LrSchedule::LinearDecay,
                    other => {
                        return Err(CliError::new(
                            "ConfigError",
                            format!("bad lr_schedule `{other}` (constant|linear)"),
                        ))
                    }
                }
            }
            other => {
                return Err(CliError::new(
                    "ConfigError",
                    format!("unknown config key `{other}`"),
                ))
            }
        }
    }
    Ok(())
}
