//! Deterministic sample-game generation.
//!
//! Tests, benchmarks and demos need realistic, fully legal game records
//! without shipping an archive in the repository. The generator plays both
//! sides with a light opening-theory policy — corner points first, then
//! mostly local responses — against the real rules engine, so every game is
//! legal by construction, alternates colors, and carries a coherent header
//! (including an RE tag computed from the final area score).

use crate::rng::{stream, Rng};
use crate::rules::{score, BoardState};
use crate::sgf::{Coord, GameRecord, Header, Move};

/// Shape of a generated corpus.
#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub games: usize,
    pub size: u8,
    pub seed: u64,
    pub min_moves: usize,
    pub max_moves: usize,
    pub komi: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            games: 200,
            size: 19,
            seed: 0,
            min_moves: 150,
            max_moves: 260,
            komi: 6.5,
        }
    }
}

/// Generates `spec.games` legal records, deterministically from `spec.seed`.
pub fn sample_games(spec: &FixtureSpec) -> Vec<GameRecord> {
    (0..spec.games).map(|g| sample_game(spec, g)).collect()
}

/// Convenience wrapper: `n` default-shaped 19x19 games.
pub fn sample_corpus(n: usize, seed: u64) -> Vec<GameRecord> {
    sample_games(&FixtureSpec {
        games: n,
        seed,
        ..FixtureSpec::default()
    })
}

fn sample_game(spec: &FixtureSpec, index: usize) -> GameRecord {
    let mut rng = Rng::derive(spec.seed, stream::FIXTURE, index as u64);
    let target =
        spec.min_moves + rng.next_below((spec.max_moves - spec.min_moves + 1) as u64) as usize;
    let opening_len = 10 + rng.next_below(5) as usize;

    let mut board = BoardState::new(spec.size);
    let mut moves: Vec<Move> = Vec::with_capacity(target);
    let mut last_stone: Option<Coord> = None;

    for move_no in 0..target {
        let color = board.to_move();
        let pick = if move_no < opening_len {
            pick_opening(&board, &mut rng).or_else(|| pick_local(&board, last_stone, 2, &mut rng))
        } else {
            pick_midgame(&board, last_stone, &mut rng)
        };
        let Some(coord) = pick else { break };
        board = board
            .apply(Move {
                color,
                point: Some(coord),
            })
            .expect("policy candidates are pre-validated");
        moves.push(Move {
            color,
            point: Some(coord),
        });
        last_stone = Some(coord);
    }

    let result = score(&board, spec.komi).result_text;
    let mut header = Header::new();
    header.push("GM", "1");
    header.push("FF", "4");
    header.push("SZ", spec.size.to_string());
    header.push("EV", "Sample League");
    header.push("RO", (index + 1).to_string());
    header.push("PB", format!("Black {:03}", index + 1));
    header.push("BR", rank(&mut rng));
    header.push("PW", format!("White {:03}", index + 1));
    header.push("WR", rank(&mut rng));
    header.push("KM", format!("{}", spec.komi));
    header.push("TM", "3600");
    header.push("DT", date(index));
    header.push("RE", result);

    GameRecord {
        header,
        moves,
        source: format!("fixture:{index}"),
    }
}

fn rank(rng: &mut Rng) -> String {
    format!("{}p", 1 + rng.next_below(9))
}

fn date(index: usize) -> String {
    format!("2023-{:02}-{:02}", 1 + index % 12, 1 + index % 28)
}

/// Corner-opening menu: 3-3, 3-4, 4-3, 4-4, 5-3 and 3-5 points of each
/// corner. Offsets are from the near edges.
fn opening_points(size: u8) -> Vec<Coord> {
    let offsets = [(2u8, 2u8), (2, 3), (3, 2), (3, 3), (4, 2), (2, 4)];
    let far = |v: u8| size - 1 - v;
    let mut points = Vec::with_capacity(offsets.len() * 4);
    for (a, b) in offsets {
        points.push(Coord::new(a, b));
        points.push(Coord::new(far(a), b));
        points.push(Coord::new(a, far(b)));
        points.push(Coord::new(far(a), far(b)));
    }
    points
}

fn pick_opening(board: &BoardState, rng: &mut Rng) -> Option<Coord> {
    let mut candidates: Vec<Coord> = opening_points(board.size())
        .into_iter()
        .filter(|&c| board.stone_at(c).is_none())
        .filter(|&c| {
            board
                .apply(Move {
                    color: board.to_move(),
                    point: Some(c),
                })
                .is_ok()
        })
        .collect();
    if candidates.is_empty() {
        return None;
    }
    candidates.sort();
    Some(*rng.choose(&candidates))
}

/// After the opening: mostly answer right next to the previous stone, less
/// often within two lines of it, occasionally near any stone or anywhere
/// sensible. Tight locality gives the games the strongly predictable local
/// texture of real exchanges.
fn pick_midgame(board: &BoardState, last: Option<Coord>, rng: &mut Rng) -> Option<Coord> {
    let roll = rng.next_f64();
    if roll < 0.65 {
        if let Some(c) = pick_local(board, last, 1, rng) {
            return Some(c);
        }
    }
    if roll < 0.93 {
        if let Some(c) = pick_local(board, last, 2, rng) {
            return Some(c);
        }
    } else if roll < 0.97 {
        let stones: Vec<Coord> = board.stones().map(|(c, _)| c).collect();
        if !stones.is_empty() {
            let anchor = *rng.choose(&stones);
            if let Some(c) = pick_local(board, Some(anchor), 2, rng) {
                return Some(c);
            }
        }
    }
    pick_global(board, rng)
}

/// Legal point within Chebyshev distance `radius` of `anchor`.
fn pick_local(
    board: &BoardState,
    anchor: Option<Coord>,
    radius: i16,
    rng: &mut Rng,
) -> Option<Coord> {
    let anchor = anchor?;
    let size = board.size() as i16;
    let mut candidates = Vec::with_capacity(24);
    for dr in -radius..=radius {
        for dc in -radius..=radius {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (col, row) = (anchor.col as i16 + dc, anchor.row as i16 + dr);
            if col < 0 || row < 0 || col >= size || row >= size {
                continue;
            }
            let c = Coord::new(col as u8, row as u8);
            if board.stone_at(c).is_none()
                && board
                    .apply(Move {
                        color: board.to_move(),
                        point: Some(c),
                    })
                    .is_ok()
            {
                candidates.push(c);
            }
        }
    }
    if candidates.is_empty() {
        None
    } else {
        Some(*rng.choose(&candidates))
    }
}

/// Any legal point, preferring ones off the first line.
fn pick_global(board: &BoardState, rng: &mut Rng) -> Option<Coord> {
    let legal = board.legal_points();
    if legal.is_empty() {
        return None;
    }
    let size = board.size();
    let inner: Vec<Coord> = legal
        .iter()
        .copied()
        .filter(|c| c.col > 0 && c.row > 0 && c.col < size - 1 && c.row < size - 1)
        .collect();
    let pool = if inner.is_empty() { &legal } else { &inner };
    Some(*rng.choose(pool))
}
