//! Corpus preprocessing: one pipe-joined ASCII line per game.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Per-run summary of [`preprocess_corpus`].
#[derive(Debug, Clone, Default)]
pub struct PreprocessReport {
    pub files_read: usize,
    pub games_written: usize,
    /// Unreadable inputs, skipped with their error text.
    pub skipped: Vec<(PathBuf, String)>,
}

/// The byte-exact single-game transform:
///
/// 1. every byte >= 0x80 is deleted;
/// 2. each maximal run of CR/LF bytes is replaced by a single `|` (0x7C),
///    except a run at end of input, which is deleted — that keeps the
///    transform idempotent once the output line gets its own terminator;
/// 3. the result is one line with no CR/LF and no bytes >= 0x80.
///
/// The returned line does not include the trailing LF; the corpus writer
/// appends exactly one.
pub fn preprocess_file(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut in_break = false;
    for &b in bytes {
        if b >= 0x80 {
            continue;
        }
        if b == b'\r' || b == b'\n' {
            in_break = true;
            continue;
        }
        if in_break {
            out.push(b'|');
            in_break = false;
        }
        out.push(b);
    }
    // a trailing CR/LF run emits nothing
    out
}

/// Preprocesses `files` in the given order into `out`, one LF-terminated
/// line per input file. Unreadable files are skipped and reported.
pub fn preprocess_corpus<W: Write>(files: &[PathBuf], out: &mut W) -> io::Result<PreprocessReport> {
    let mut report = PreprocessReport::default();
    for path in files {
        match fs::read(path) {
            Ok(bytes) => {
                out.write_all(&preprocess_file(&bytes))?;
                out.write_all(b"\n")?;
                report.files_read += 1;
                report.games_written += 1;
            }
            Err(e) => report.skipped.push((path.clone(), e.to_string())),
        }
    }
    Ok(report)
}

/// Lists `*.sgf` files under `dir` (non-recursive), sorted by file name so
/// corpus order is stable across platforms.
pub fn sgf_files_in_dir(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("sgf"))
        })
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_line_break_becomes_pipe() {
        assert_eq!(
            preprocess_file(b"(;GM[1]\nPB[x];B[qd])"),
            b"(;GM[1]|PB[x];B[qd])"
        );
    }

    #[test]
    fn crlf_run_becomes_single_pipe() {
        assert_eq!(preprocess_file(b"a\r\n\r\nb"), b"a|b");
        assert_eq!(preprocess_file(b"a\n\n\n\nb"), b"a|b");
    }

    #[test]
    fn single_ascii_line_is_a_fixed_point() {
        let corpus = b"(;EV[x];B[qd];W[pp])\n".to_vec();
        let mut once = preprocess_file(&corpus);
        once.push(b'\n');
        assert_eq!(once, corpus);
    }

    #[test]
    fn non_ascii_bytes_deleted() {
        let input = "(;PB[棋士]PW[x];B[qd])".as_bytes();
        let out = preprocess_file(input);
        assert_eq!(out, b"(;PB[]PW[x];B[qd])");
        assert!(out.iter().all(|&b| b < 0x80));
    }

    #[test]
    fn trailing_break_run_is_dropped() {
        assert_eq!(preprocess_file(b"(;)\r\n"), b"(;)");
        assert_eq!(preprocess_file(b"(;)\n\n\n"), b"(;)");
    }

    #[test]
    fn unreadable_files_are_skipped_with_a_diagnostic() {
        let missing = PathBuf::from("/nonexistent/sgflm-test/game.sgf");
        let mut out = Vec::new();
        let report = preprocess_corpus(std::slice::from_ref(&missing), &mut out).unwrap();
        assert_eq!(report.games_written, 0);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].0, missing);
        assert!(out.is_empty());
    }

    #[test]
    fn idempotent_at_byte_level() {
        let inputs: &[&[u8]] = &[
            b"(;GM[1]\nPB[x];B[qd])\n",
            b"\r\nleading",
            b"a\rb\nc\r\nd",
            "(;PB[\u{68cb}\u{58eb}]\nPW[x])\r\n".as_bytes(),
        ];
        for input in inputs {
            let mut once = preprocess_file(input);
            once.push(b'\n');
            let mut twice = preprocess_file(&once);
            twice.push(b'\n');
            assert_eq!(twice, once);
        }
    }
}
