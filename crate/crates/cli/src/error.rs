//! One-line, machine-parsable failures: `error[Class] message` on stderr,
//! non-zero exit.

use std::fmt;

use sgflm::eval::EvalError;
use sgflm::model::ModelError;
use sgflm::sgf::SgfError;

#[derive(Debug)]
pub struct CliError {
    pub class: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(class: &'static str, message: impl fmt::Display) -> CliError {
        CliError {
            class,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}] {}", self.class, self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::new("Io", e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::new("Json", e)
    }
}

impl From<SgfError> for CliError {
    fn from(e: SgfError) -> CliError {
        let class = match e {
            SgfError::MalformedMove { .. } => "MalformedMove",
            SgfError::NoGameTree => "NoGameTree",
        };
        CliError::new(class, e)
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        let class = match e {
            EvalError::EmptySet => "EmptySet",
            EvalError::MismatchedN(..) => "MismatchedN",
        };
        CliError::new(class, e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        let class = match e {
            ModelError::InvalidConfig(_) => "InvalidConfig",
            ModelError::ContextOverflow { .. } => "ContextOverflow",
            ModelError::TokenOutOfRange(_) => "TokenOutOfRange",
            ModelError::ShapeMismatch(_) => "ShapeMismatch",
            ModelError::EmptyCorpus => "EmptyCorpus",
            ModelError::ContextLongerThanCorpus { .. } => "ContextLongerThanCorpus",
            ModelError::InvalidTemperature(_) => "InvalidTemperature",
            ModelError::InvalidTopK => "InvalidTopK",
            ModelError::VocabularyMismatch(_) => "VocabularyMismatch",
            ModelError::Checkpoint(_) => "BadCheckpoint",
            ModelError::Io(_) => "Io",
        };
        CliError::new(class, e)
    }
}
