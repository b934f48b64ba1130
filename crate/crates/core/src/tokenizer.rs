//! Token vocabularies over game records.
//!
//! Two modes exist. Move-level assigns one id per move and is the default
//! training vocabulary; char-level assigns one id per printable-ASCII byte of
//! the single-line game text, mirroring raw-text modeling. Both share the
//! specials PAD=0, BOS=1, EOS=2.
//!
//! The move-level id formula is part of the checkpoint contract and must not
//! change without bumping [`FORMULA_VERSION`]:
//!
//! ```text
//! PAD = 0, BOS = 1, EOS = 2, black pass = 3, white pass = 4
//! stone move id = 5 + (white ? size*size : 0) + row * size + col
//! vocabulary size = 5 + 2 * size * size          (727 on 19x19)
//! ```
//!
//! Char-level covers bytes 0x20..=0x7E: id = 3 + (byte - 0x20), size 98.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sgf::{serialize_game, Color, Coord, GameRecord, Header, Move};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
const BLACK_PASS: u32 = 3;
const WHITE_PASS: u32 = 4;
const STONE_BASE: u32 = 5;

const CHAR_LO: u8 = 0x20;
const CHAR_HI: u8 = 0x7e;

/// Version of the id formulas above; recorded in checkpoints.
pub const FORMULA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VocabMode {
    MoveLevel,
    CharLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TokenizerError {
    #[error("byte 0x{0:02x} outside the char-level alphabet")]
    OutOfAlphabet(u8),
    #[error("move at ({0}, {1}) outside the vocabulary board size")]
    OutOfBoard(u8, u8),
}

/// An immutable vocabulary: mode, board size (move-level only) and id count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    mode: VocabMode,
    board_size: u8,
    size: u32,
}

impl Vocabulary {
    pub fn move_level(board_size: u8) -> Vocabulary {
        assert!(
            (2..=19).contains(&board_size),
            "unsupported board size {board_size}"
        );
        let cells = board_size as u32 * board_size as u32;
        Vocabulary {
            mode: VocabMode::MoveLevel,
            board_size,
            size: STONE_BASE + 2 * cells,
        }
    }

    pub fn char_level() -> Vocabulary {
        Vocabulary {
            mode: VocabMode::CharLevel,
            board_size: 19,
            size: 3 + (CHAR_HI - CHAR_LO) as u32 + 1,
        }
    }

    pub fn mode(&self) -> VocabMode {
        self.mode
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn board_size(&self) -> u8 {
        self.board_size
    }

    /// Id of one move under the move-level formula.
    pub fn move_id(&self, mv: Move) -> Result<u32, TokenizerError> {
        debug_assert_eq!(self.mode, VocabMode::MoveLevel);
        match mv.point {
            None => Ok(match mv.color {
                Color::Black => BLACK_PASS,
                Color::White => WHITE_PASS,
            }),
            Some(c) => {
                if !c.on_board(self.board_size) {
                    return Err(TokenizerError::OutOfBoard(c.col, c.row));
                }
                let size = self.board_size as u32;
                let offset = match mv.color {
                    Color::Black => 0,
                    Color::White => size * size,
                };
                Ok(STONE_BASE + offset + c.row as u32 * size + c.col as u32)
            }
        }
    }

    /// Inverse of [`Vocabulary::move_id`]; `None` for specials or ids beyond
    /// the vocabulary.
    pub fn id_to_move(&self, id: u32) -> Option<Move> {
        debug_assert_eq!(self.mode, VocabMode::MoveLevel);
        match id {
            BLACK_PASS => Some(Move::pass(Color::Black)),
            WHITE_PASS => Some(Move::pass(Color::White)),
            _ if id >= STONE_BASE && id < self.size => {
                let cells = self.board_size as u32 * self.board_size as u32;
                let rel = id - STONE_BASE;
                let (color, cell) = if rel < cells {
                    (Color::Black, rel)
                } else {
                    (Color::White, rel - cells)
                };
                let size = self.board_size as u32;
                Some(Move::stone(color, (cell % size) as u8, (cell / size) as u8))
            }
            _ => None,
        }
    }

    /// Encodes a record: `BOS`, one id per unit, `EOS`. Move-level drops the
    /// header; char-level runs over the serialized single-line game text,
    /// header included.
    pub fn encode(&self, record: &GameRecord) -> Result<TokenSequence, TokenizerError> {
        match self.mode {
            VocabMode::MoveLevel => {
                let mut ids = Vec::with_capacity(record.moves.len() + 2);
                ids.push(BOS);
                for &mv in &record.moves {
                    ids.push(self.move_id(mv)?);
                }
                ids.push(EOS);
                Ok(TokenSequence {
                    ids,
                    mode: self.mode,
                })
            }
            VocabMode::CharLevel => self.encode_line(&serialize_game(record)),
        }
    }

    /// Char-level encoding of one corpus line.
    pub fn encode_line(&self, line: &str) -> Result<TokenSequence, TokenizerError> {
        debug_assert_eq!(self.mode, VocabMode::CharLevel);
        let mut ids = Vec::with_capacity(line.len() + 2);
        ids.push(BOS);
        for &b in line.as_bytes() {
            if !(CHAR_LO..=CHAR_HI).contains(&b) {
                return Err(TokenizerError::OutOfAlphabet(b));
            }
            ids.push(3 + (b - CHAR_LO) as u32);
        }
        ids.push(EOS);
        Ok(TokenSequence {
            ids,
            mode: self.mode,
        })
    }

    /// Reconstructs char-level text: byte tokens up to the first EOS after
    /// the leading BOS; anything unknown is skipped.
    pub fn decode_text(&self, ids: &[u32]) -> String {
        debug_assert_eq!(self.mode, VocabMode::CharLevel);
        let mut out = String::new();
        for &id in ids {
            if id == EOS {
                break;
            }
            if let Some(b) = self.id_to_byte(id) {
                out.push(b as char);
            }
        }
        out
    }

    fn id_to_byte(&self, id: u32) -> Option<u8> {
        if id >= 3 && id < self.size {
            Some(CHAR_LO + (id - 3) as u8)
        } else {
            None
        }
    }

    /// Decodes token ids back into a record, leniently.
    ///
    /// Move-level inverts the id formula directly: specials are skipped,
    /// decoding stops at the first EOS, unknown ids count as discarded.
    /// Char-level reconstructs the text and then extracts every occurrence
    /// of `;B[xy]` / `;W[xy]` (x, y in `a..s`) or `;B[]` / `;W[]`, ignoring
    /// all other bytes; the report carries the number of ignored bytes and
    /// whether the text ends in a truncated move token.
    pub fn decode(&self, ids: &[u32]) -> Decoded {
        match self.mode {
            VocabMode::MoveLevel => {
                let mut moves = Vec::new();
                let mut discarded = 0usize;
                for (i, &id) in ids.iter().enumerate() {
                    if id == EOS {
                        discarded += ids.len() - i - 1;
                        break;
                    }
                    if id == BOS || id == PAD {
                        continue;
                    }
                    match self.id_to_move(id) {
                        Some(mv) => moves.push(mv),
                        None => discarded += 1,
                    }
                }
                let recovered = moves.len();
                Decoded {
                    record: GameRecord {
                        header: Header::new(),
                        moves,
                        source: "<decoded>".to_string(),
                    },
                    report: DecodeReport {
                        recovered_moves: recovered,
                        discarded_bytes: discarded,
                        truncated: false,
                    },
                }
            }
            VocabMode::CharLevel => {
                let text = self.decode_text(ids);
                let (moves, report) = extract_moves(&text);
                Decoded {
                    record: GameRecord {
                        header: Header::new(),
                        moves,
                        source: "<decoded>".to_string(),
                    },
                    report,
                }
            }
        }
    }
}

/// Vocabulary identity as recorded in checkpoints: a checkpoint trained
/// under one id mapping must never be sampled or resumed under another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabDescriptor {
    pub mode: VocabMode,
    pub board_size: u8,
    pub size: u32,
    pub formula_version: u32,
}

impl Vocabulary {
    pub fn descriptor(&self) -> VocabDescriptor {
        VocabDescriptor {
            mode: self.mode,
            board_size: self.board_size,
            size: self.size,
            formula_version: FORMULA_VERSION,
        }
    }

    /// Reconstructs the vocabulary a checkpoint was trained with, verifying
    /// that the descriptor is internally consistent and current.
    pub fn from_descriptor(desc: &VocabDescriptor) -> Result<Vocabulary, String> {
        if desc.formula_version != FORMULA_VERSION {
            return Err(format!(
                "id formula version {} (this build implements {FORMULA_VERSION})",
                desc.formula_version
            ));
        }
        let vocab = match desc.mode {
            VocabMode::MoveLevel => Vocabulary::move_level(desc.board_size),
            VocabMode::CharLevel => Vocabulary::char_level(),
        };
        if vocab.size() != desc.size {
            return Err(format!(
                "descriptor size {} but mode implies {}",
                desc.size,
                vocab.size()
            ));
        }
        Ok(vocab)
    }
}

/// Token ids plus the mode that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub mode: VocabMode,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// What lenient decoding salvaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub recovered_moves: usize,
    /// Bytes (char-level) or tokens (move-level) that matched nothing.
    pub discarded_bytes: usize,
    /// The text ended half-way through a move token, e.g. `;W[p`.
    pub truncated: bool,
}

/// Decoded record plus its salvage report.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub record: GameRecord,
    pub report: DecodeReport,
}

/// Left-to-right non-overlapping scan for move tokens in noisy text.
fn extract_moves(text: &str) -> (Vec<Move>, DecodeReport) {
    let bytes = text.as_bytes();
    let mut moves = Vec::new();
    let mut discarded = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        match match_move(&bytes[i..]) {
            MoveMatch::Full(mv, len) => {
                moves.push(mv);
                i += len;
            }
            MoveMatch::None => {
                discarded += 1;
                i += 1;
            }
        }
    }
    // A trailing proper prefix of a move token means the text was cut off.
    // Complete matches always end in `]`, which no proper prefix admits, so
    // this can only ever fire on discarded tail bytes.
    let truncated = (1..=5usize)
        .filter(|&k| k <= bytes.len())
        .any(|k| is_move_prefix(&bytes[bytes.len() - k..]));
    let recovered = moves.len();
    (
        moves,
        DecodeReport {
            recovered_moves: recovered,
            discarded_bytes: discarded,
            truncated,
        },
    )
}

enum MoveMatch {
    Full(Move, usize),
    None,
}

fn match_move(s: &[u8]) -> MoveMatch {
    if s.first() != Some(&b';') {
        return MoveMatch::None;
    }
    let color = match s.get(1) {
        Some(b'B') => Color::Black,
        Some(b'W') => Color::White,
        _ => return MoveMatch::None,
    };
    if s.get(2) != Some(&b'[') {
        return MoveMatch::None;
    }
    match (s.get(3), s.get(4), s.get(5)) {
        (Some(b']'), _, _) => MoveMatch::Full(Move::pass(color), 4),
        (Some(&a), Some(&b), Some(b']')) => match Coord::from_letters(a, b) {
            Some(c) => MoveMatch::Full(
                Move {
                    color,
                    point: Some(c),
                },
                6,
            ),
            None => MoveMatch::None,
        },
        _ => MoveMatch::None,
    }
}

/// Is `s` a proper prefix of `;B[xy]` / `;W[xy]` / `;B[]`? (Shorter than a
/// complete token — a complete token would have matched.)
fn is_move_prefix(s: &[u8]) -> bool {
    if s.len() > 5 || s.is_empty() || s[0] != b';' {
        return false;
    }
    if s.len() >= 2 && s[1] != b'B' && s[1] != b'W' {
        return false;
    }
    if s.len() >= 3 && s[2] != b'[' {
        return false;
    }
    if s.len() >= 4 && !(b'a'..=b's').contains(&s[3]) {
        return false;
    }
    if s.len() == 5 && !(b'a'..=b's').contains(&s[4]) {
        return false;
    }
    true
}
