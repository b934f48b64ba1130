//! Position scoring and board-region classification.
//!
//! Scores are computed on the raw position, Tromp-Taylor style, with no
//! life-and-death judgment: a player's area is their stones plus the empty
//! regions that reach only their stones; the empty-only part of that is the
//! territory view. Empty regions touching both colors (or no stones at all)
//! are neutral.

use serde::{Deserialize, Serialize};

use super::BoardState;
use crate::sgf::{Color, Coord};

/// Opening-theory board regions. With line numbers counted from the nearest
/// edges (1-based), a point is a corner point when both of its line numbers
/// are at most 5, a center point when both exceed 5, and a side point
/// otherwise. On 19x19 that makes four 5x5 corner boxes: 100 points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Corner,
    Side,
    Center,
}

/// Classifies a point; `coord` must be on the board.
pub fn classify_region(coord: Coord, size: u8) -> Region {
    let line = |v: u8| u32::from(v.min(size - 1 - v)) + 1;
    let (lr, lc) = (line(coord.row), line(coord.col));
    if lr <= 5 && lc <= 5 {
        Region::Corner
    } else if lr > 5 && lc > 5 {
        Region::Center
    } else {
        Region::Side
    }
}

/// Both scoring views of one position plus the area-based result line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub black_area: u32,
    pub white_area: u32,
    pub black_territory: u32,
    pub white_territory: u32,
    pub neutral_points: u32,
    pub komi: f64,
    /// `B+n` / `W+n` / `Draw` from the area margin `black_area - (white_area + komi)`.
    pub result_text: String,
}

impl Score {
    pub fn area_margin(&self) -> f64 {
        self.black_area as f64 - (self.white_area as f64 + self.komi)
    }
}

/// Scores a position. Any position is scorable; generated games rarely end
/// cleanly, so no dead-stone removal is attempted.
pub fn score(board: &BoardState, komi: f64) -> Score {
    let size = board.size() as usize;
    let cells = board.cells();
    let mut black_stones = 0u32;
    let mut white_stones = 0u32;
    for cell in cells {
        match cell {
            Some(Color::Black) => black_stones += 1,
            Some(Color::White) => white_stones += 1,
            None => {}
        }
    }

    let mut black_territory = 0u32;
    let mut white_territory = 0u32;
    let mut neutral = 0u32;
    let mut seen = vec![false; cells.len()];
    let mut stack = Vec::new();
    for start in 0..cells.len() {
        if cells[start].is_some() || seen[start] {
            continue;
        }
        // flood-fill one empty region, noting which colors it touches
        let mut count = 0u32;
        let mut touches_black = false;
        let mut touches_white = false;
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            count += 1;
            let (col, row) = (idx % size, idx / size);
            let mut visit = |nb: usize| match cells[nb] {
                Some(Color::Black) => touches_black = true,
                Some(Color::White) => touches_white = true,
                None => {
                    if !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            };
            if row > 0 {
                visit(idx - size);
            }
            if col > 0 {
                visit(idx - 1);
            }
            if col + 1 < size {
                visit(idx + 1);
            }
            if row + 1 < size {
                visit(idx + size);
            }
        }
        match (touches_black, touches_white) {
            (true, false) => black_territory += count,
            (false, true) => white_territory += count,
            _ => neutral += count,
        }
    }

    let black_area = black_stones + black_territory;
    let white_area = white_stones + white_territory;
    let margin = black_area as f64 - (white_area as f64 + komi);
    let result_text = if margin > 0.0 {
        format!("B+{}", format_points(margin))
    } else if margin < 0.0 {
        format!("W+{}", format_points(-margin))
    } else {
        "Draw".to_string()
    };

    Score {
        black_area,
        white_area,
        black_territory,
        white_territory,
        neutral_points: neutral,
        komi,
        result_text,
    }
}

fn format_points(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}
