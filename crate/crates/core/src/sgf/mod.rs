//! Lenient SGF v4 reading and writing for Go game records.
//!
//! Only the subset needed for move-sequence modeling is interpreted: `B`/`W`
//! move properties become [`Move`]s, everything else is kept verbatim in the
//! header so that a parsed record serializes back to an equivalent record.
//! The format itself offers no strict error checking, so the default parse
//! mode is lenient: malformed move nodes are reported as diagnostics and
//! skipped, variations are dropped in favor of the main line, and unknown
//! bytes are stepped over.

mod lint;
mod parse;
mod preprocess;

pub use lint::{lint_corpus, LintDiagnostic, LintKind, LintReport};
pub use parse::{parse_game, parse_game_strict, Diagnostic, DiagnosticKind, ParsedGame};
pub use preprocess::{preprocess_corpus, preprocess_file, sgf_files_in_dir, PreprocessReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stone color. Black always moves first in a well-formed game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub fn opponent(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Color::Black => 'B',
            Color::White => 'W',
        }
    }
}

/// Board intersection. `col` is the first SGF letter, `row` the second;
/// origin is the top-left corner and `'a'` maps to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub col: u8,
    pub row: u8,
}

impl Coord {
    pub fn new(col: u8, row: u8) -> Coord {
        Coord { col, row }
    }

    /// Decodes a pair of SGF coordinate letters, each required to be in
    /// `'a'..='s'` (the 19x19 alphabet).
    pub fn from_letters(col: u8, row: u8) -> Option<Coord> {
        if (b'a'..=b's').contains(&col) && (b'a'..=b's').contains(&row) {
            Some(Coord::new(col - b'a', row - b'a'))
        } else {
            None
        }
    }

    pub fn to_letters(self) -> [u8; 2] {
        [b'a' + self.col, b'a' + self.row]
    }

    pub fn on_board(self, size: u8) -> bool {
        self.col < size && self.row < size
    }
}

/// One move of a game: a stone placement or a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub color: Color,
    /// `None` is a pass.
    pub point: Option<Coord>,
}

impl Move {
    pub fn stone(color: Color, col: u8, row: u8) -> Move {
        Move {
            color,
            point: Some(Coord::new(col, row)),
        }
    }

    pub fn pass(color: Color) -> Move {
        Move { color, point: None }
    }

    pub fn is_pass(self) -> bool {
        self.point.is_none()
    }
}

/// Header properties in order of appearance. Values are stored in SGF wire
/// form (bracket contents, escapes intact), so re-emitting them is lossless.
///
/// `B` and `W` are move properties, never header entries — the parser turns
/// them into [`Move`]s wherever they appear, so a hand-built header using
/// those ids would not survive a round trip.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header(Vec<(String, Vec<String>)>);

impl Header {
    pub fn new() -> Header {
        Header::default()
    }

    pub fn push(&mut self, id: impl Into<String>, value: impl Into<String>) {
        self.0.push((id.into(), vec![value.into()]));
    }

    pub fn push_values(&mut self, id: impl Into<String>, values: Vec<String>) {
        self.0.push((id.into(), values));
    }

    /// First value of the first property with this id, if any.
    pub fn get(&self, id: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == id)
            .and_then(|(_, vs)| vs.first().map(String::as_str))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.0.iter().map(|(k, vs)| (k.as_str(), vs.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

/// A parsed game: header properties plus the main-line move sequence.
///
/// `source` is provenance only (file path / line number); it is deliberately
/// excluded from equality so that round-trip comparisons are about game
/// content, not about where the bytes came from.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GameRecord {
    pub header: Header,
    pub moves: Vec<Move>,
    pub source: String,
}

impl PartialEq for GameRecord {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.moves == other.moves
    }
}

impl Eq for GameRecord {}

impl GameRecord {
    /// Board size from the SZ header, defaulting to 19. Values outside
    /// 2..=19 fall back to 19 (the parser keeps them verbatim either way).
    pub fn board_size(&self) -> u8 {
        self.header
            .get("SZ")
            .and_then(|v| v.trim().parse::<u8>().ok())
            .filter(|&s| (2..=19).contains(&s))
            .unwrap_or(19)
    }
}

/// Errors from strict-mode parsing and other fatal SGF conditions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SgfError {
    /// A `;B[..]`/`;W[..]` node whose payload is neither empty, `tt`, nor two
    /// letters in `a..s`. Carries the byte offset of the offending node.
    #[error("malformed move at byte {offset}: `{payload}`")]
    MalformedMove { offset: usize, payload: String },
    /// The input contains no `(` opening a game tree.
    #[error("no game tree found")]
    NoGameTree,
}

/// Serializes a record as a single-line SGF game tree.
///
/// Emission rule: `(;` + header properties + one `;B[xy]`/`;W[xy]` node per
/// move + `)`. A pass is emitted as an empty payload (`B[]`). An empty record
/// therefore serializes to `(;)` and a headerless two-move game to
/// `(;;B[qd];W[pp])` — the root node stays even when it carries no
/// properties, so the output always re-parses to an equal record.
pub fn serialize_game(record: &GameRecord) -> String {
    let mut out = String::with_capacity(16 + record.moves.len() * 6);
    out.push_str("(;");
    for (id, values) in record.header.iter() {
        out.push_str(id);
        for v in values {
            out.push('[');
            out.push_str(v);
            out.push(']');
        }
    }
    for mv in &record.moves {
        out.push(';');
        out.push(mv.color.letter());
        out.push('[');
        if let Some(c) = mv.point {
            let [a, b] = c.to_letters();
            out.push(a as char);
            out.push(b as char);
        }
        out.push(']');
    }
    out.push(')');
    out
}
