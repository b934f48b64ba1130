//! Shared test support: an independent brute-force rules oracle and corpus
//! helpers. Nothing here reuses the engine's internals — the oracle keeps
//! full grids for its history and recomputes liberties from scratch with a
//! fixpoint sweep, so an agreement failure always means a real bug on one
//! side.

#![allow(dead_code)]

use sgflm::sgf::{serialize_game, GameRecord};

pub const EMPTY: u8 = 0;
pub const BLACK: u8 = 1;
pub const WHITE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    WrongTurn,
    OffBoard,
    Occupied,
    Suicide,
    Superko,
}

/// Reference game state: plain grids, history as a list of full grids.
#[derive(Debug, Clone)]
pub struct NaiveGame {
    pub size: usize,
    pub grid: Vec<u8>,
    pub to_move: u8,
    pub history: Vec<Vec<u8>>,
    pub captures_black: u32,
    pub captures_white: u32,
}

impl NaiveGame {
    pub fn new(size: usize) -> NaiveGame {
        let grid = vec![EMPTY; size * size];
        NaiveGame {
            size,
            history: vec![grid.clone()],
            grid,
            to_move: BLACK,
            captures_black: 0,
            captures_white: 0,
        }
    }

    fn other(color: u8) -> u8 {
        if color == BLACK {
            WHITE
        } else {
            BLACK
        }
    }

    /// Connected component of `start` by repeated sweeps until nothing
    /// changes (deliberately not the engine's BFS).
    fn component(grid: &[u8], size: usize, start: usize) -> Vec<bool> {
        let color = grid[start];
        let mut member = vec![false; grid.len()];
        member[start] = true;
        loop {
            let mut changed = false;
            for idx in 0..grid.len() {
                if member[idx] || grid[idx] != color {
                    continue;
                }
                let (c, r) = (idx % size, idx / size);
                let adjacent_member = (r > 0 && member[idx - size])
                    || (c > 0 && member[idx - 1])
                    || (c + 1 < size && member[idx + 1])
                    || (r + 1 < size && member[idx + size]);
                if adjacent_member {
                    member[idx] = true;
                    changed = true;
                }
            }
            if !changed {
                return member;
            }
        }
    }

    fn component_has_liberty(grid: &[u8], size: usize, member: &[bool]) -> bool {
        for idx in 0..grid.len() {
            if !member[idx] {
                continue;
            }
            let (c, r) = (idx % size, idx / size);
            if (r > 0 && grid[idx - size] == EMPTY)
                || (c > 0 && grid[idx - 1] == EMPTY)
                || (c + 1 < size && grid[idx + 1] == EMPTY)
                || (r + 1 < size && grid[idx + size] == EMPTY)
            {
                return true;
            }
        }
        false
    }

    /// Attempts a stone placement; the state advances only on `Verdict::Ok`.
    pub fn try_stone(&mut self, color: u8, col: i32, row: i32) -> Verdict {
        if color != self.to_move {
            return Verdict::WrongTurn;
        }
        if col < 0 || row < 0 || col as usize >= self.size || row as usize >= self.size {
            return Verdict::OffBoard;
        }
        let idx = row as usize * self.size + col as usize;
        if self.grid[idx] != EMPTY {
            return Verdict::Occupied;
        }

        let mut next = self.grid.clone();
        next[idx] = color;

        // sweep every opponent group on the board; breathless ones come off
        let opponent = Self::other(color);
        let mut removed = 0u32;
        let mut scanned = vec![false; next.len()];
        for start in 0..next.len() {
            if next[start] != opponent || scanned[start] {
                continue;
            }
            let member = Self::component(&next, self.size, start);
            for (i, &m) in member.iter().enumerate() {
                if m {
                    scanned[i] = true;
                }
            }
            if !Self::component_has_liberty(&next, self.size, &member) {
                for (i, &m) in member.iter().enumerate() {
                    if m {
                        next[i] = EMPTY;
                        removed += 1;
                    }
                }
            }
        }

        let own = Self::component(&next, self.size, idx);
        if !Self::component_has_liberty(&next, self.size, &own) {
            return Verdict::Suicide;
        }

        if self.history.contains(&next) {
            return Verdict::Superko;
        }

        if color == BLACK {
            self.captures_black += removed;
        } else {
            self.captures_white += removed;
        }
        self.grid = next;
        self.history.push(self.grid.clone());
        self.to_move = opponent;
        Verdict::Ok
    }

    pub fn pass(&mut self) {
        self.to_move = Self::other(self.to_move);
    }

    /// Every point the side to move could legally occupy, by exhaustive
    /// trial on a scratch copy.
    pub fn accepted_points(&self) -> Vec<(u8, u8)> {
        let mut out = Vec::new();
        for row in 0..self.size {
            for col in 0..self.size {
                let mut probe = self.clone();
                if probe.try_stone(self.to_move, col as i32, row as i32) == Verdict::Ok {
                    out.push((col as u8, row as u8));
                }
            }
        }
        out
    }
}

/// Serializes records the way archive files look: header first, then moves
/// wrapped onto a new line every ten moves.
pub fn archive_style_text(record: &GameRecord) -> String {
    let flat = serialize_game(record);
    // split the single line after every 10th move node
    let mut out = String::with_capacity(flat.len() + 64);
    let mut moves_seen = 0usize;
    let bytes = flat.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b';'
            && i + 1 < bytes.len()
            && (bytes[i + 1] == b'B' || bytes[i + 1] == b'W')
            && moves_seen > 0
            && moves_seen.is_multiple_of(10)
        {
            out.push('\n');
        }
        if b == b';' && i + 1 < bytes.len() && (bytes[i + 1] == b'B' || bytes[i + 1] == b'W') {
            moves_seen += 1;
        }
        out.push(b as char);
        i += 1;
    }
    out.push('\n');
    out
}
