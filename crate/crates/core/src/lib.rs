//! Go game records as a language-modeling corpus.
//!
//! The crate is organized around the pipeline it implements:
//!
//! * [`sgf`] — lenient SGF parsing, serialization, corpus preprocessing and linting
//! * [`rules`] — board state, move legality (capture / suicide / superko), replay,
//!   Tromp-Taylor area and flood-fill territory scoring, board-region classification
//! * [`tokenizer`] — move-level and char-level vocabularies mapping records to token ids
//! * [`model`] — a small decoder-only transformer: forward/backward, Adam training
//!   loop with checkpoint-and-sample cadence, temperature/top-k sampling
//! * [`eval`] — syntactic, legality and opening-structure metrics over game sets,
//!   plus a uniform random-legal baseline and a comparison harness
//! * [`fixtures`] — deterministic sample-game generation for tests, benches and demos

pub mod eval;
pub mod fixtures;
pub mod model;
pub mod rng;
pub mod rules;
pub mod sgf;
pub mod tokenizer;

pub use eval::{ComparisonReport, EvalGame, EvalReport};
pub use model::{ModelCheckpoint, ModelConfig, TrainConfig, Trainer};
pub use rules::{BoardState, Region, ReplayResult, RuleError, Score};
pub use sgf::{Color, Coord, GameRecord, Move};
pub use tokenizer::{TokenSequence, VocabMode, Vocabulary};
