//! Go rules engine: legality, replay, scoring, and board regions.
//!
//! Legality follows the usual championship conventions: captures are removed
//! before the mover's own liberties are checked, suicide is forbidden, and ko
//! is enforced as positional superko — a move may not recreate any earlier
//! whole-board position. Positions are fingerprinted with Zobrist hashing;
//! a pass is always legal and never changes the position.

mod score;

pub use score::{classify_region, score, Region, Score};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::mix64;
use crate::sgf::{Color, Coord, GameRecord, Move};

/// Why a move was rejected. `replay` uses the same kinds as violation data.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Error, Serialize, Deserialize,
)]
pub enum RuleError {
    #[error("move played out of turn")]
    WrongTurn,
    #[error("point outside the board")]
    OffBoard,
    #[error("point already occupied")]
    Occupied,
    #[error("suicide")]
    Suicide,
    #[error("position repeats an earlier position (superko)")]
    Superko,
}

const ZOBRIST_SEED: u64 = 0x60b0a2d5_1f3c9e47;

/// Zobrist key for a stone of `color` at cell index `idx`. Derived on the
/// fly from the SplitMix64 finalizer instead of a table; the finalizer's
/// avalanche makes the keys effectively independent.
#[inline]
fn zobrist_key(idx: usize, color: Color) -> u64 {
    let bit = match color {
        Color::Black => 0u64,
        Color::White => 1u64,
    };
    mix64(ZOBRIST_SEED ^ ((idx as u64) << 1 | bit))
}

/// Full board state, a value: [`BoardState::apply`] returns a new state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardState {
    size: u8,
    grid: Vec<Option<Color>>,
    to_move: Color,
    captures_by_black: u32,
    captures_by_white: u32,
    /// Fingerprints of every position seen so far, the initial empty board
    /// included.
    position_history: HashSet<u64>,
    fingerprint: u64,
}

impl BoardState {
    /// Empty board with Black to move. Sizes 2..=19 are supported; 19 is the
    /// game of record, 9 keeps randomized oracle tests fast, tiny boards
    /// exist for hand-built fixtures.
    pub fn new(size: u8) -> BoardState {
        assert!((2..=19).contains(&size), "unsupported board size {size}");
        let cells = size as usize * size as usize;
        let mut history = HashSet::new();
        history.insert(0);
        BoardState {
            size,
            grid: vec![None; cells],
            to_move: Color::Black,
            captures_by_black: 0,
            captures_by_white: 0,
            position_history: history,
            fingerprint: 0,
        }
    }

    /// Builds a position from rows of `X` (black), `O` (white) and `.`
    /// (empty); whitespace is ignored. Rows run top to bottom. Capture
    /// counts start at zero and the history contains only this position.
    pub fn from_diagram(size: u8, diagram: &str, to_move: Color) -> BoardState {
        let mut board = BoardState::new(size);
        let cells: Vec<char> = diagram.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(
            cells.len(),
            board.grid.len(),
            "diagram does not cover the board"
        );
        for (idx, ch) in cells.into_iter().enumerate() {
            let stone = match ch {
                'X' => Some(Color::Black),
                'O' => Some(Color::White),
                '.' => None,
                other => panic!("unexpected diagram char {other:?}"),
            };
            if let Some(color) = stone {
                board.grid[idx] = Some(color);
                board.fingerprint ^= zobrist_key(idx, color);
            }
        }
        board.to_move = to_move;
        board.position_history = HashSet::from([board.fingerprint]);
        board
    }

    pub fn size(&self) -> u8 {
        self.size
    }

    pub fn to_move(&self) -> Color {
        self.to_move
    }

    pub fn captures_by(&self, color: Color) -> u32 {
        match color {
            Color::Black => self.captures_by_black,
            Color::White => self.captures_by_white,
        }
    }

    pub fn stone_at(&self, coord: Coord) -> Option<Color> {
        self.grid[self.index(coord)]
    }

    pub fn stones(&self) -> impl Iterator<Item = (Coord, Color)> + '_ {
        self.grid
            .iter()
            .enumerate()
            .filter_map(|(idx, cell)| cell.map(|color| (self.coord(idx), color)))
    }

    pub fn stone_count(&self) -> usize {
        self.grid.iter().filter(|c| c.is_some()).count()
    }

    /// Current whole-board position fingerprint.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn position_history(&self) -> &HashSet<u64> {
        &self.position_history
    }

    pub(crate) fn cells(&self) -> &[Option<Color>] {
        &self.grid
    }

    #[inline]
    fn index(&self, coord: Coord) -> usize {
        coord.row as usize * self.size as usize + coord.col as usize
    }

    #[inline]
    fn coord(&self, idx: usize) -> Coord {
        Coord::new(
            (idx % self.size as usize) as u8,
            (idx / self.size as usize) as u8,
        )
    }

    fn neighbors(&self, idx: usize, out: &mut [usize; 4]) -> usize {
        let size = self.size as usize;
        let (col, row) = (idx % size, idx / size);
        let mut n = 0;
        if row > 0 {
            out[n] = idx - size;
            n += 1;
        }
        if col > 0 {
            out[n] = idx - 1;
            n += 1;
        }
        if col + 1 < size {
            out[n] = idx + 1;
            n += 1;
        }
        if row + 1 < size {
            out[n] = idx + size;
            n += 1;
        }
        n
    }

    /// Flood-fills the group containing `start` and reports whether it has
    /// at least one liberty. Stone indices are appended to `group`.
    fn group_has_liberty(&self, start: usize, group: &mut Vec<usize>, seen: &mut [bool]) -> bool {
        let color = self.grid[start].expect("group start must be a stone");
        let mut has_liberty = false;
        let mut stack = vec![start];
        seen[start] = true;
        let mut nbuf = [0usize; 4];
        while let Some(idx) = stack.pop() {
            group.push(idx);
            let n = self.neighbors(idx, &mut nbuf);
            for &nb in &nbuf[..n] {
                match self.grid[nb] {
                    None => has_liberty = true,
                    Some(c) if c == color && !seen[nb] => {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                    _ => {}
                }
            }
        }
        has_liberty
    }

    /// Applies one move, returning the successor state or the violated rule.
    ///
    /// Checks run in a fixed order: turn, board bounds, occupancy, then the
    /// stone is placed, dead opponent groups are removed and credited to the
    /// mover, suicide is checked, and finally the resulting position is
    /// checked against the whole history (positional superko). A pass only
    /// flips the turn.
    pub fn apply(&self, mv: Move) -> Result<BoardState, RuleError> {
        if mv.color != self.to_move {
            return Err(RuleError::WrongTurn);
        }
        let coord = match mv.point {
            None => {
                let mut next = self.clone();
                next.to_move = next.to_move.opponent();
                // same position; inserting the fingerprint again is a no-op
                next.position_history.insert(next.fingerprint);
                return Ok(next);
            }
            Some(c) => c,
        };
        if !coord.on_board(self.size) {
            return Err(RuleError::OffBoard);
        }
        if self.grid[self.index(coord)].is_some() {
            return Err(RuleError::Occupied);
        }

        let mut next = self.clone();
        let idx = next.index(coord);
        let mover = mv.color;
        next.grid[idx] = Some(mover);
        next.fingerprint ^= zobrist_key(idx, mover);

        // remove opponent groups left without liberties
        let opponent = mover.opponent();
        let mut seen = vec![false; next.grid.len()];
        let mut group = Vec::new();
        let mut captured = 0u32;
        let mut nbuf = [0usize; 4];
        let n = next.neighbors(idx, &mut nbuf);
        for &nb in &nbuf[..n] {
            if next.grid[nb] == Some(opponent) && !seen[nb] {
                group.clear();
                if !next.group_has_liberty(nb, &mut group, &mut seen) {
                    for &g in &group {
                        next.grid[g] = None;
                        next.fingerprint ^= zobrist_key(g, opponent);
                        captured += 1;
                    }
                }
            }
        }
        match mover {
            Color::Black => next.captures_by_black += captured,
            Color::White => next.captures_by_white += captured,
        }

        // now the mover's own group must breathe
        let mut own_seen = vec![false; next.grid.len()];
        group.clear();
        if !next.group_has_liberty(idx, &mut group, &mut own_seen) {
            return Err(RuleError::Suicide);
        }

        if self.position_history.contains(&next.fingerprint) {
            return Err(RuleError::Superko);
        }

        next.position_history.insert(next.fingerprint);
        next.to_move = mover.opponent();
        Ok(next)
    }

    /// Every point where a stone of the player to move may legally be
    /// placed. A pass is always legal in addition to these.
    pub fn legal_points(&self) -> Vec<Coord> {
        let mut points = Vec::new();
        for idx in 0..self.grid.len() {
            if self.grid[idx].is_some() {
                continue;
            }
            let coord = self.coord(idx);
            if self
                .apply(Move {
                    color: self.to_move,
                    point: Some(coord),
                })
                .is_ok()
            {
                points.push(coord);
            }
        }
        points
    }
}

/// Outcome of replaying a record through the rules engine. Violations are
/// data, not failures: the replay stops at the first one and reports it.
#[derive(Debug, Clone)]
pub struct ReplayResult {
    pub final_board: BoardState,
    /// Index (0-based) of the first illegal move, if any.
    pub first_illegal_index: Option<usize>,
    pub first_illegal: Option<RuleError>,
    /// Region of every applied non-pass move, in order.
    pub per_move_regions: Vec<Region>,
}

impl ReplayResult {
    /// Number of moves accepted before the first violation (the whole game
    /// when there is none).
    pub fn legal_prefix_len(&self, total_moves: usize) -> usize {
        self.first_illegal_index.unwrap_or(total_moves)
    }

    pub fn fully_legal(&self) -> bool {
        self.first_illegal_index.is_none()
    }
}

/// Replays `record` from the empty board of its declared size.
pub fn replay(record: &GameRecord) -> ReplayResult {
    let size = record.board_size();
    let mut board = BoardState::new(size);
    let mut regions = Vec::new();
    let mut first_illegal_index = None;
    let mut first_illegal = None;
    for (i, mv) in record.moves.iter().enumerate() {
        match board.apply(*mv) {
            Ok(next) => {
                if let Some(c) = mv.point {
                    regions.push(classify_region(c, size));
                }
                board = next;
            }
            Err(e) => {
                first_illegal_index = Some(i);
                first_illegal = Some(e);
                break;
            }
        }
    }
    ReplayResult {
        final_board: board,
        first_illegal_index,
        first_illegal,
        per_move_regions: regions,
    }
}
