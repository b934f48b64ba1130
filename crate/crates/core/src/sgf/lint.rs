//! Corpus linting: per-game diagnostics plus aggregate counts.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{parse_game, Color};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LintKind {
    /// Lenient parse reported a problem (malformed move, dropped variation,
    /// stray text) or the line held no game tree at all.
    ParseError,
    /// Two consecutive moves by the same color.
    NonAlternating,
    /// A move coordinate outside the record's board size.
    OutOfRange,
    /// No RE property in the header.
    MissingResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintDiagnostic {
    /// 1-based corpus line number.
    pub line: usize,
    pub kind: LintKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LintReport {
    pub games: usize,
    pub total_moves: usize,
    pub mean_moves: f64,
    pub diagnostics: Vec<LintDiagnostic>,
}

impl LintReport {
    pub fn count(&self, kind: LintKind) -> usize {
        self.diagnostics.iter().filter(|d| d.kind == kind).count()
    }
}

impl fmt::Display for LintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "games: {}", self.games)?;
        writeln!(f, "moves: {}", self.total_moves)?;
        writeln!(f, "mean_moves: {:.2}", self.mean_moves)?;
        writeln!(f, "diagnostics: {}", self.diagnostics.len())?;
        for d in &self.diagnostics {
            writeln!(f, "  line {}: {:?}: {}", d.line, d.kind, d.message)?;
        }
        Ok(())
    }
}

/// Lints a preprocessed corpus (one game per line). Diagnostics never fail
/// the run; they are data.
pub fn lint_corpus(corpus: &str) -> LintReport {
    let mut report = LintReport::default();
    for (idx, line) in corpus.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        report.games += 1;
        let parsed = match parse_game(line, &format!("line {line_no}")) {
            Ok(p) => p,
            Err(e) => {
                report.diagnostics.push(LintDiagnostic {
                    line: line_no,
                    kind: LintKind::ParseError,
                    message: e.to_string(),
                });
                continue;
            }
        };
        for d in &parsed.diagnostics {
            report.diagnostics.push(LintDiagnostic {
                line: line_no,
                kind: LintKind::ParseError,
                message: format!("byte {}: {}", d.offset, d.detail),
            });
        }

        let record = &parsed.record;
        report.total_moves += record.moves.len();

        let size = record.board_size();
        let mut expected = Color::Black;
        for (i, mv) in record.moves.iter().enumerate() {
            let move_no = i + 1;
            if mv.color != expected {
                report.diagnostics.push(LintDiagnostic {
                    line: line_no,
                    kind: LintKind::NonAlternating,
                    message: format!("non-alternating at move {move_no}"),
                });
                // resynchronize on the observed color
                expected = mv.color;
            }
            expected = expected.opponent();
            if let Some(c) = mv.point {
                if !c.on_board(size) {
                    report.diagnostics.push(LintDiagnostic {
                        line: line_no,
                        kind: LintKind::OutOfRange,
                        message: format!(
                            "move {move_no} at ({}, {}) outside {size}x{size}",
                            c.col, c.row
                        ),
                    });
                }
            }
        }
        if record.header.get("RE").is_none() {
            report.diagnostics.push(LintDiagnostic {
                line: line_no,
                kind: LintKind::MissingResult,
                message: "missing result tag".into(),
            });
        }
    }
    if report.games > 0 {
        report.mean_moves = report.total_moves as f64 / report.games as f64;
    }
    report
}
