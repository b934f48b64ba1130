//! Byte-level lenient SGF scanner.

use super::{Color, Coord, GameRecord, Header, Move, SgfError};

/// Non-fatal findings from a lenient parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Byte offset into the input where the finding starts.
    pub offset: usize,
    pub kind: DiagnosticKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    /// A `B`/`W` payload that is neither empty, `tt`, nor two letters in `a..s`.
    MalformedMove,
    /// A variation subtree was dropped; only the main line is kept.
    VariationSkipped,
    /// Anything else that had to be stepped over (stray bytes, extra move
    /// values, an unterminated bracket value).
    StrayText,
}

/// Result of a lenient parse: the recovered record plus diagnostics.
#[derive(Debug, Clone)]
pub struct ParsedGame {
    pub record: GameRecord,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedGame {
    pub fn malformed_moves(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.kind == DiagnosticKind::MalformedMove)
            .count()
    }
}

/// Parses the first game tree in `text`, leniently.
///
/// Header properties are captured in order of appearance (properties found in
/// move nodes included), moves in order of appearance, unknown property ids
/// preserved verbatim. Malformed move nodes are skipped with a diagnostic.
/// Variations after the main line are dropped with a diagnostic; parsing
/// stops at the end of the first game tree.
pub fn parse_game(text: &str, source: &str) -> Result<ParsedGame, SgfError> {
    Parser::new(text, source, false).run()
}

/// Like [`parse_game`], but the first malformed move aborts the parse.
pub fn parse_game_strict(text: &str, source: &str) -> Result<ParsedGame, SgfError> {
    Parser::new(text, source, true).run()
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    strict: bool,
    record: GameRecord,
    diagnostics: Vec<Diagnostic>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, source: &str, strict: bool) -> Parser<'a> {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
            strict,
            record: GameRecord {
                header: Header::new(),
                moves: Vec::new(),
                source: source.to_string(),
            },
            diagnostics: Vec::new(),
        }
    }

    fn run(mut self) -> Result<ParsedGame, SgfError> {
        // Skip anything before the first game tree.
        while self.peek().is_some_and(|b| b != b'(') {
            self.pos += 1;
        }
        if self.peek().is_none() {
            return Err(SgfError::NoGameTree);
        }
        self.pos += 1; // consume '('

        // One entry per open tree: has this tree already descended into a
        // child subtree? The first child continues the main line; later
        // siblings are variations and get skipped.
        let mut took_child = vec![false];

        while let Some(b) = self.skip_filler() {
            match b {
                b';' => {
                    self.pos += 1;
                    self.parse_node()?;
                }
                b'(' => {
                    if let Some(flag) = took_child.last_mut() {
                        if !*flag {
                            *flag = true;
                            self.pos += 1;
                            took_child.push(false);
                        } else {
                            let at = self.pos;
                            self.skip_subtree();
                            self.diagnostics.push(Diagnostic {
                                offset: at,
                                kind: DiagnosticKind::VariationSkipped,
                                detail: "variation subtree dropped".into(),
                            });
                        }
                    }
                }
                b')' => {
                    self.pos += 1;
                    took_child.pop();
                    if took_child.is_empty() {
                        break; // end of the first game tree
                    }
                }
                _ => {
                    // Properties are only legal after ';', but lenient input
                    // sometimes omits it; try to read properties in place.
                    if b.is_ascii_alphabetic() {
                        self.parse_node()?;
                    } else {
                        self.stray(self.pos, format!("unexpected byte 0x{b:02x}"));
                        self.pos += 1;
                    }
                }
            }
        }
        Ok(ParsedGame {
            record: self.record,
            diagnostics: self.diagnostics,
        })
    }

    /// All properties of one node.
    fn parse_node(&mut self) -> Result<(), SgfError> {
        while let Some(b) = self.skip_filler() {
            if !b.is_ascii_alphanumeric() {
                break;
            }
            let id_start = self.pos;
            while self.peek().is_some_and(|b| b.is_ascii_alphanumeric()) {
                self.pos += 1;
            }
            let id = String::from_utf8_lossy(&self.bytes[id_start..self.pos]).into_owned();

            let mut values = Vec::new();
            while let Some(b'[') = self.skip_filler() {
                values.push(self.parse_value());
            }
            if values.is_empty() {
                self.stray(id_start, format!("property `{id}` has no value"));
                continue;
            }
            if id == "B" || id == "W" {
                let color = if id == "B" {
                    Color::Black
                } else {
                    Color::White
                };
                self.handle_move(color, &values, id_start)?;
            } else {
                self.record.header.push_values(id, values);
            }
        }
        Ok(())
    }

    fn handle_move(
        &mut self,
        color: Color,
        values: &[String],
        offset: usize,
    ) -> Result<(), SgfError> {
        let payload = values[0].as_str();
        if values.len() > 1 {
            self.stray(
                offset,
                format!("move has {} extra values", values.len() - 1),
            );
        }
        let point = match payload.as_bytes() {
            // Both the empty payload and the old `tt` convention are a pass.
            [] | [b't', b't'] => None,
            [a, b] => match Coord::from_letters(*a, *b) {
                Some(c) => Some(c),
                None => return self.malformed(offset, payload),
            },
            _ => return self.malformed(offset, payload),
        };
        self.record.moves.push(Move { color, point });
        Ok(())
    }

    fn malformed(&mut self, offset: usize, payload: &str) -> Result<(), SgfError> {
        if self.strict {
            return Err(SgfError::MalformedMove {
                offset,
                payload: payload.to_string(),
            });
        }
        self.diagnostics.push(Diagnostic {
            offset,
            kind: DiagnosticKind::MalformedMove,
            detail: format!("move payload `{payload}`"),
        });
        Ok(())
    }

    /// Bracketed value with backslash escapes; the raw contents (escapes
    /// intact) are returned so serialization can re-emit them unchanged.
    fn parse_value(&mut self) -> String {
        debug_assert_eq!(self.peek(), Some(b'['));
        self.pos += 1;
        let start = self.pos;
        let mut escaped = false;
        while let Some(b) = self.peek() {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b']' {
                let raw = &self.bytes[start..self.pos];
                self.pos += 1;
                return String::from_utf8_lossy(raw).into_owned();
            }
            self.pos += 1;
        }
        self.stray(start, "unterminated bracket value".to_string());
        String::from_utf8_lossy(&self.bytes[start..]).into_owned()
    }

    /// Skips a balanced `( ... )` subtree, honoring value escapes so that
    /// parentheses inside bracket values do not confuse the balance count.
    fn skip_subtree(&mut self) {
        debug_assert_eq!(self.peek(), Some(b'('));
        let mut depth = 0usize;
        while let Some(b) = self.peek() {
            match b {
                b'[' => {
                    self.parse_value();
                    continue;
                }
                b'(' => depth += 1,
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        return;
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    /// Skips whitespace and the `|` line-join bytes introduced by corpus
    /// preprocessing, then returns the byte at the new position.
    fn skip_filler(&mut self) -> Option<u8> {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() || b == b'|' {
                self.pos += 1;
            } else {
                return Some(b);
            }
        }
        None
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn stray(&mut self, offset: usize, detail: String) {
        self.diagnostics.push(Diagnostic {
            offset,
            kind: DiagnosticKind::StrayText,
            detail,
        });
    }
}
