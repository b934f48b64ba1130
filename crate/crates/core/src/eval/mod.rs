//! Metrics over sets of games: syntax, legality, opening structure, scores,
//! and comparison against a random-legal baseline.

mod baseline;

pub use baseline::random_baseline;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{classify_region, replay, score, Region, RuleError};
use crate::sgf::{Color, GameRecord};
use crate::tokenizer::{DecodeReport, Decoded};

/// One game as the evaluator sees it: the record plus whatever salvage
/// metadata its origin provides.
#[derive(Debug, Clone)]
pub struct EvalGame {
    pub record: GameRecord,
    pub decode_report: Option<DecodeReport>,
    /// Malformed move atoms reported by a lenient SGF parse.
    pub malformed_moves: usize,
}

impl EvalGame {
    pub fn from_record(record: GameRecord) -> EvalGame {
        EvalGame {
            record,
            decode_report: None,
            malformed_moves: 0,
        }
    }

    pub fn from_parsed(parsed: crate::sgf::ParsedGame) -> EvalGame {
        let malformed = parsed.malformed_moves();
        EvalGame {
            record: parsed.record,
            decode_report: None,
            malformed_moves: malformed,
        }
    }

    pub fn from_decoded(decoded: Decoded) -> EvalGame {
        EvalGame {
            record: decoded.record,
            decode_report: Some(decoded.report),
            malformed_moves: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no games to evaluate")]
    EmptySet,
    #[error("opening windows differ: {0} vs {1}")]
    MismatchedN(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntacticMetrics {
    /// Fraction of games whose first move is Black. Empty games fail.
    pub black_first_rate: f64,
    /// Fraction of games whose first min(30, length) moves strictly
    /// alternate starting with Black. Empty games fail.
    pub alternation_rate: f64,
    /// Pooled: on-board non-pass moves / (non-pass moves + malformed atoms).
    pub coord_in_range_rate: f64,
    pub mean_recovered_moves: f64,
    /// Mean discarded bytes per game where decode reports are attached.
    pub mean_discarded_bytes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegalityMetrics {
    pub mean_legal_prefix_length: f64,
    pub fraction_fully_legal: f64,
    pub violation_histogram: BTreeMap<RuleError, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeningMetrics {
    /// Moves considered per game (non-pass, from the front).
    pub n_opening: usize,
    /// Pooled count of classified (non-pass, on-board) opening moves.
    pub classified_moves: u64,
    pub corner_fraction: f64,
    pub side_fraction: f64,
    pub center_fraction: f64,
    /// Fraction of classified opening moves on the first or second line.
    pub line_1_2_fraction: f64,
}

impl OpeningMetrics {
    /// Binomial standard error of the corner fraction.
    pub fn corner_sigma(&self) -> f64 {
        if self.classified_moves == 0 {
            return f64::INFINITY;
        }
        let p = self.corner_fraction;
        (p * (1.0 - p) / self.classified_moves as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub komi: f64,
    pub mean_black_area: f64,
    pub mean_white_area: f64,
    pub mean_black_territory: f64,
    pub mean_white_territory: f64,
    pub black_area_wins: usize,
    pub white_area_wins: usize,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDelta {
    pub corner: f64,
    pub side: f64,
    pub center: f64,
    pub line_1_2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_games: usize,
    pub syntactic: SyntacticMetrics,
    pub legality: LegalityMetrics,
    pub opening: OpeningMetrics,
    pub scores: Option<ScoreSummary>,
    pub baseline_delta: Option<BaselineDelta>,
}

impl EvalReport {
    /// Attaches opening-fraction deltas against a baseline report.
    pub fn with_baseline(mut self, baseline: &EvalReport) -> EvalReport {
        self.baseline_delta = Some(BaselineDelta {
            corner: self.opening.corner_fraction - baseline.opening.corner_fraction,
            side: self.opening.side_fraction - baseline.opening.side_fraction,
            center: self.opening.center_fraction - baseline.opening.center_fraction,
            line_1_2: self.opening.line_1_2_fraction - baseline.opening.line_1_2_fraction,
        });
        self
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "games:                   {}", self.n_games)?;
        writeln!(
            f,
            "black_first_rate:        {:.4}",
            self.syntactic.black_first_rate
        )?;
        writeln!(
            f,
            "alternation_rate:        {:.4}",
            self.syntactic.alternation_rate
        )?;
        writeln!(
            f,
            "coord_in_range_rate:     {:.4}",
            self.syntactic.coord_in_range_rate
        )?;
        writeln!(
            f,
            "mean_recovered_moves:    {:.2}",
            self.syntactic.mean_recovered_moves
        )?;
        writeln!(
            f,
            "mean_discarded_bytes:    {:.2}",
            self.syntactic.mean_discarded_bytes
        )?;
        writeln!(
            f,
            "mean_legal_prefix:       {:.2}",
            self.legality.mean_legal_prefix_length
        )?;
        writeln!(
            f,
            "fraction_fully_legal:    {:.4}",
            self.legality.fraction_fully_legal
        )?;
        for (kind, count) in &self.legality.violation_histogram {
            writeln!(f, "  violation {kind:?}: {count}")?;
        }
        writeln!(
            f,
            "opening window:          first {} moves",
            self.opening.n_opening
        )?;
        writeln!(
            f,
            "corner_fraction:         {:.4}",
            self.opening.corner_fraction
        )?;
        writeln!(
            f,
            "side_fraction:           {:.4}",
            self.opening.side_fraction
        )?;
        writeln!(
            f,
            "center_fraction:         {:.4}",
            self.opening.center_fraction
        )?;
        writeln!(
            f,
            "line_1_2_fraction:       {:.4}",
            self.opening.line_1_2_fraction
        )?;
        if let Some(s) = &self.scores {
            writeln!(
                f,
                "area means (B/W):        {:.1} / {:.1} (komi {})",
                s.mean_black_area, s.mean_white_area, s.komi
            )?;
            writeln!(
                f,
                "territory means (B/W):   {:.1} / {:.1}",
                s.mean_black_territory, s.mean_white_territory
            )?;
            writeln!(
                f,
                "area results (B/W/draw): {} / {} / {}",
                s.black_area_wins, s.white_area_wins, s.draws
            )?;
        }
        if let Some(d) = &self.baseline_delta {
            writeln!(
                f,
                "delta vs baseline:       corner {:+.4}, side {:+.4}, center {:+.4}, line12 {:+.4}",
                d.corner, d.side, d.center, d.line_1_2
            )?;
        }
        Ok(())
    }
}

/// Computes all metrics over a set of games.
///
/// Aggregation is integer-count based, so the result is exactly invariant
/// under permutation of the input set.
pub fn evaluate(games: &[EvalGame], n_opening: usize, komi: f64) -> Result<EvalReport, EvalError> {
    if games.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let n_games = games.len();

    let mut black_first = 0usize;
    let mut alternating = 0usize;
    let mut non_pass_moves = 0u64;
    let mut in_range_moves = 0u64;
    let mut malformed = 0u64;
    let mut total_moves = 0u64;
    let mut discarded = 0u64;

    let mut prefix_sum = 0u64;
    let mut fully_legal = 0usize;
    let mut histogram: BTreeMap<RuleError, usize> = BTreeMap::new();

    let mut corner = 0u64;
    let mut side = 0u64;
    let mut center = 0u64;
    let mut low_line = 0u64;
    let mut classified = 0u64;

    let mut area_black = 0u64;
    let mut area_white = 0u64;
    let mut terr_black = 0u64;
    let mut terr_white = 0u64;
    let mut wins_black = 0usize;
    let mut wins_white = 0usize;
    let mut draws = 0usize;

    for game in games {
        let record = &game.record;
        let size = record.board_size();
        total_moves += record.moves.len() as u64;
        malformed += game.malformed_moves as u64;
        discarded += game.decode_report.map_or(0, |r| r.discarded_bytes) as u64;

        if record.moves.first().map(|m| m.color) == Some(Color::Black) {
            black_first += 1;
        }
        if !record.moves.is_empty() {
            let window = record.moves.len().min(30);
            let ok = record.moves[..window].iter().enumerate().all(|(i, m)| {
                let expect = if i % 2 == 0 {
                    Color::Black
                } else {
                    Color::White
                };
                m.color == expect
            });
            if ok {
                alternating += 1;
            }
        }

        for mv in &record.moves {
            if let Some(c) = mv.point {
                non_pass_moves += 1;
                if c.on_board(size) {
                    in_range_moves += 1;
                }
            }
        }

        for mv in record.moves.iter().filter(|m| !m.is_pass()).take(n_opening) {
            let c = mv.point.unwrap();
            if !c.on_board(size) {
                continue;
            }
            classified += 1;
            match classify_region(c, size) {
                Region::Corner => corner += 1,
                Region::Side => side += 1,
                Region::Center => center += 1,
            }
            let line = 1 + c.col.min(size - 1 - c.col).min(c.row.min(size - 1 - c.row)) as u64;
            if line <= 2 {
                low_line += 1;
            }
        }

        let result = replay(record);
        prefix_sum += result.legal_prefix_len(record.moves.len()) as u64;
        if result.fully_legal() {
            fully_legal += 1;
        } else if let Some(kind) = result.first_illegal {
            *histogram.entry(kind).or_insert(0) += 1;
        }

        let s = score(&result.final_board, komi);
        area_black += s.black_area as u64;
        area_white += s.white_area as u64;
        terr_black += s.black_territory as u64;
        terr_white += s.white_territory as u64;
        let margin = s.area_margin();
        if margin > 0.0 {
            wins_black += 1;
        } else if margin < 0.0 {
            wins_white += 1;
        } else {
            draws += 1;
        }
    }

    let n = n_games as f64;
    let rate = |num: u64, den: u64| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok(EvalReport {
        n_games,
        syntactic: SyntacticMetrics {
            black_first_rate: black_first as f64 / n,
            alternation_rate: alternating as f64 / n,
            coord_in_range_rate: rate(in_range_moves, non_pass_moves + malformed),
            mean_recovered_moves: total_moves as f64 / n,
            mean_discarded_bytes: discarded as f64 / n,
        },
        legality: LegalityMetrics {
            mean_legal_prefix_length: prefix_sum as f64 / n,
            fraction_fully_legal: fully_legal as f64 / n,
            violation_histogram: histogram,
        },
        opening: OpeningMetrics {
            n_opening,
            classified_moves: classified,
            corner_fraction: rate(corner, classified),
            side_fraction: rate(side, classified),
            center_fraction: rate(center, classified),
            line_1_2_fraction: rate(low_line, classified),
        },
        scores: Some(ScoreSummary {
            komi,
            mean_black_area: area_black as f64 / n,
            mean_white_area: area_white as f64 / n,
            mean_black_territory: terr_black as f64 / n,
            mean_white_territory: terr_white as f64 / n,
            black_area_wins: wins_black,
            white_area_wins: wins_white,
            draws,
        }),
        baseline_delta: None,
    })
}

/// Per-metric deltas plus the directional corner verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_opening: usize,
    pub corner_delta: f64,
    pub side_delta: f64,
    pub center_delta: f64,
    pub line_1_2_delta: f64,
    pub alternation_delta: f64,
    pub fully_legal_delta: f64,
    /// Pooled binomial standard error of the corner fraction difference.
    pub corner_sigma_pooled: f64,
    /// True when the model's corner fraction exceeds the baseline's by more
    /// than two pooled sigma.
    pub corner_preference_confirmed: bool,
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "opening window:        first {} moves", self.n_opening)?;
        writeln!(f, "corner_delta:          {:+.4}", self.corner_delta)?;
        writeln!(f, "side_delta:            {:+.4}", self.side_delta)?;
        writeln!(f, "center_delta:          {:+.4}", self.center_delta)?;
        writeln!(f, "line_1_2_delta:        {:+.4}", self.line_1_2_delta)?;
        writeln!(f, "alternation_delta:     {:+.4}", self.alternation_delta)?;
        writeln!(f, "fully_legal_delta:     {:+.4}", self.fully_legal_delta)?;
        writeln!(f, "corner_sigma_pooled:   {:.4}", self.corner_sigma_pooled)?;
        writeln!(
            f,
            "corner_preference:     {}",
            if self.corner_preference_confirmed {
                "confirmed"
            } else {
                "not confirmed"
            }
        )?;
        Ok(())
    }
}

/// Compares a model report against a baseline report computed with the same
/// opening window.
pub fn compare(model: &EvalReport, baseline: &EvalReport) -> Result<ComparisonReport, EvalError> {
    if model.opening.n_opening != baseline.opening.n_opening {
        return Err(EvalError::MismatchedN(
            model.opening.n_opening,
            baseline.opening.n_opening,
        ));
    }
    let delta = model.opening.corner_fraction - baseline.opening.corner_fraction;
    let sigma = {
        let (a, b) = (
            model.opening.corner_sigma(),
            baseline.opening.corner_sigma(),
        );
        (a * a + b * b).sqrt()
    };
    let confirmed = sigma.is_finite() && delta > 2.0 * sigma;
    Ok(ComparisonReport {
        n_opening: model.opening.n_opening,
        corner_delta: delta,
        side_delta: model.opening.side_fraction - baseline.opening.side_fraction,
        center_delta: model.opening.center_fraction - baseline.opening.center_fraction,
        line_1_2_delta: model.opening.line_1_2_fraction - baseline.opening.line_1_2_fraction,
        alternation_delta: model.syntactic.alternation_rate - baseline.syntactic.alternation_rate,
        fully_legal_delta: model.legality.fraction_fully_legal
            - baseline.legality.fraction_fully_legal,
        corner_sigma_pooled: sigma,
        corner_preference_confirmed: confirmed,
    })
}
