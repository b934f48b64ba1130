//! Uniform random-legal baseline games.

use crate::rng::{stream, Rng};
use crate::rules::{score, BoardState};
use crate::sgf::{GameRecord, Header, Move};

/// Plays `n_games` games of `moves_per_game` moves each, where every move is
/// drawn uniformly from the legal points of the position. A pass is played
/// only when no legal point exists. Deterministic given `seed`.
pub fn random_baseline(
    n_games: usize,
    moves_per_game: usize,
    size: u8,
    seed: u64,
) -> Vec<GameRecord> {
    (0..n_games)
        .map(|i| {
            let mut rng = Rng::derive(seed, stream::BASELINE, i as u64);
            let mut board = BoardState::new(size);
            let mut moves = Vec::with_capacity(moves_per_game);
            for _ in 0..moves_per_game {
                let color = board.to_move();
                let points = board.legal_points();
                let mv = if points.is_empty() {
                    Move::pass(color)
                } else {
                    Move {
                        color,
                        point: Some(*rng.choose(&points)),
                    }
                };
                board = board.apply(mv).expect("legal by construction");
                moves.push(mv);
            }

            let mut header = Header::new();
            header.push("GM", "1");
            header.push("FF", "4");
            header.push("SZ", size.to_string());
            header.push("EV", "random-legal baseline");
            header.push("KM", "6.5");
            header.push("RE", score(&board, 6.5).result_text);
            GameRecord {
                header,
                moves,
                source: format!("baseline:{i}"),
            }
        })
        .collect()
}
