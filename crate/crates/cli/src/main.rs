//! Pipeline driver: preprocess -> train -> generate -> eval / compare, plus
//! the standalone lint / replay / score utilities.

mod config;
mod error;
mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sgflm::eval::{compare, evaluate, random_baseline, EvalGame, EvalReport};
use sgflm::fixtures::{sample_games, FixtureSpec};
use sgflm::model::{
    sample_from_checkpoint, ModelCheckpoint, ModelConfig, TokenStream, TrainConfig, TrainObserver,
    Trainer,
};
use sgflm::rules::{classify_region, replay, score};
use sgflm::sgf::{
    lint_corpus, parse_game, preprocess_corpus, serialize_game, sgf_files_in_dir, GameRecord,
    Header,
};
use sgflm::tokenizer::{TokenSequence, VocabMode, Vocabulary};

use error::CliError;
use manifest::ManifestBuilder;

#[derive(Parser)]
#[command(
    name = "sgflm",
    version,
    about = "Go game records as a language-modeling corpus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Move,
    Char,
}

impl Mode {
    fn vocabulary(self, board_size: u8) -> Vocabulary {
        match self {
            Mode::Move => Vocabulary::move_level(board_size),
            Mode::Char => Vocabulary::char_level(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Turn a directory of SGF files into a one-game-per-line corpus
    Preprocess(PreprocessArgs),
    /// Check a corpus and report per-game diagnostics
    Lint(LintArgs),
    /// Train a model on a corpus, checkpointing and sampling as it goes
    Train(TrainArgs),
    /// Sample games from a checkpoint and write them as SGF
    Generate(GenerateArgs),
    /// Replay an SGF file through the rules engine
    Replay(ReplayArgs),
    /// Score the final position of an SGF file, area and territory
    Score(ScoreArgs),
    /// Play uniformly random legal games as a comparison arm
    Baseline(BaselineArgs),
    /// Generate a deterministic sample corpus of plausible games
    Fixtures(FixturesArgs),
    /// Compute metrics over a directory of games
    Eval(EvalArgs),
    /// Compare a model report against a baseline report
    Compare(CompareArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Directory of .sgf files
    #[arg(long = "in")]
    input: PathBuf,
    /// Corpus file to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LintArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Emit the report as JSON instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Tokenization mode
    #[arg(long, value_enum, default_value = "move")]
    mode: Mode,
    /// Flat key = value config file (see README)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training steps to run
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = 100)]
    checkpoint_every: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Learning rate (default 1e-4)
    #[arg(long)]
    lr: Option<f64>,
    /// Batch size (default 1)
    #[arg(long)]
    batch_size: Option<usize>,
    /// Board size for the move-level vocabulary
    #[arg(long, default_value_t = 19)]
    board_size: u8,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    n_games: usize,
    /// Maximum tokens per game (BOS/EOS included)
    #[arg(long, default_value_t = 1024)]
    max_len: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    sgf: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    sgf: PathBuf,
    #[arg(long, default_value_t = 6.5)]
    komi: f64,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, default_value_t = 100)]
    n_games: usize,
    /// Moves per game
    #[arg(long, default_value_t = 10)]
    moves: usize,
    #[arg(long, default_value_t = 19)]
    size: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long, default_value_t = 200)]
    n_games: usize,
    #[arg(long, default_value_t = 19)]
    size: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of .sgf files
    #[arg(long)]
    games: PathBuf,
    #[arg(long, default_value_t = 10)]
    opening_n: usize,
    #[arg(long, default_value_t = 6.5)]
    komi: f64,
    /// Write the report as JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Model eval report (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Baseline eval report (JSON)
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Die quietly instead of panicking when the consumer of our stdout goes
/// away, e.g. `sgflm replay ... | head`.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Lint(args) => cmd_lint(args),
        Command::Train(args) => cmd_train(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Score(args) => cmd_score(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Fixtures(args) => cmd_fixtures(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<(), CliError> {
    let files = sgf_files_in_dir(&args.input)?;
    if files.is_empty() {
        return Err(CliError::new(
            "EmptySet",
            format!("no .sgf files in {}", args.input.display()),
        ));
    }
    let mut manifest = ManifestBuilder::new(
        "preprocess",
        json!({ "in": args.input.display().to_string(), "out": args.out.display().to_string() }),
    );
    manifest.input(&args.input).output(&args.out);

    // write to a scratch file first so a failed run leaves no partial corpus
    let tmp = args.out.with_extension("tmp");
    let report = {
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
        let report = preprocess_corpus(&files, &mut w)?;
        w.flush()?;
        report
    };
    fs::rename(&tmp, &args.out)?;
    manifest.write_beside(&args.out)?;

    println!("files: {}", report.files_read);
    println!("games: {}", report.games_written);
    for (path, err) in &report.skipped {
        eprintln!("skipped {}: {err}", path.display());
    }
    Ok(())
}

fn cmd_lint(args: LintArgs) -> Result<(), CliError> {
    let corpus = fs::read_to_string(&args.corpus)?;
    let report = lint_corpus(&corpus);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{report}");
    }
    Ok(())
}

/// Writes checkpoints, per-checkpoint sample logs and loss.csv under the
/// output directory as training progresses.
struct TrainSink {
    out: PathBuf,
    vocab: Vocabulary,
    board_size: u8,
}

impl TrainSink {
    fn sample_line(&self, sample: &TokenSequence) -> String {
        match self.vocab.mode() {
            VocabMode::MoveLevel => {
                let decoded = self.vocab.decode(&sample.ids);
                let mut record = decoded.record;
                record.header = standard_header(self.board_size);
                serialize_game(&record)
            }
            VocabMode::CharLevel => self.vocab.decode_text(&sample.ids),
        }
    }
}

impl TrainObserver for TrainSink {
    fn on_checkpoint(
        &mut self,
        ckpt: &ModelCheckpoint,
        sample: &TokenSequence,
    ) -> std::io::Result<()> {
        let step = ckpt.step;
        ckpt.save(
            &self
                .out
                .join("checkpoints")
                .join(format!("step-{step}.ckpt")),
        )
        .map_err(|e| std::io::Error::other(e.to_string()))?;
        fs::write(
            self.out.join("samples").join(format!("step-{step}.txt")),
            format!("{}\n", self.sample_line(sample)),
        )?;
        println!("checkpoint step {step}");
        Ok(())
    }
}

fn standard_header(board_size: u8) -> Header {
    let mut header = Header::new();
    header.push("GM", "1");
    header.push("FF", "4");
    header.push("SZ", board_size.to_string());
    header
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let vocab = args.mode.vocabulary(args.board_size);
    let mut model = ModelConfig::desk_default(vocab.size(), args.seed);
    let mut train = TrainConfig::default();
    if let Some(path) = &args.config {
        let map = config::parse_config_file(path)?;
        config::apply_config(&map, &mut model, &mut train)?;
    }
    model.vocab_size = vocab.size();
    model.seed = args.seed;
    train.total_steps = args.steps;
    train.checkpoint_every = args.checkpoint_every;
    if let Some(lr) = args.lr {
        train.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        train.batch_size = b;
    }

    let corpus = fs::read_to_string(&args.corpus)?;
    let stream = TokenStream::from_corpus(&corpus, &vocab)?;
    if stream.skipped_games > 0 {
        eprintln!("skipped {} unusable corpus lines", stream.skipped_games);
    }

    fs::create_dir_all(args.out.join("checkpoints"))?;
    fs::create_dir_all(args.out.join("samples"))?;
    let mut manifest = ManifestBuilder::new(
        "train",
        json!({
            "corpus": args.corpus.display().to_string(),
            "mode": match args.mode { Mode::Move => "move", Mode::Char => "char" },
            "config": args.config.as_ref().map(|p| p.display().to_string()),
            "steps": args.steps,
            "model": model,
            "train": train,
        }),
    );
    manifest
        .input(&args.corpus)
        .output(&args.out)
        .seed(args.seed);

    let mut sink = TrainSink {
        out: args.out.clone(),
        vocab,
        board_size: args.board_size,
    };
    let mut trainer = Trainer::new(model, train, &vocab)?;
    println!("training {} steps on {} tokens", args.steps, stream.len());
    let result = trainer.run(&stream, args.steps, &mut sink);
    if let Err(e) = result {
        // leave a clear marker so partial outputs are never mistaken for a run
        let _ = fs::write(args.out.join("FAILED"), format!("{e}\n"));
        return Err(e.into());
    }

    let mut loss_csv = String::new();
    for (i, loss) in trainer.loss_history().iter().enumerate() {
        loss_csv.push_str(&format!("{},{}\n", i + 1, loss));
    }
    fs::write(args.out.join("loss.csv"), loss_csv)?;

    let final_step = trainer.step();
    let final_path = args
        .out
        .join("checkpoints")
        .join(format!("step-{final_step}.ckpt"));
    if !final_path.exists() {
        trainer.to_checkpoint().save(&final_path)?;
    }
    manifest.write_into_dir(&args.out)?;
    let history = trainer.loss_history();
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!("loss: {first:.4} -> {last:.4} over {final_step} steps");
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let ckpt = ModelCheckpoint::load(&args.checkpoint)?;
    let vocab = Vocabulary::from_descriptor(&ckpt.vocab)
        .map_err(|e| CliError::new("VocabularyMismatch", e))?;
    fs::create_dir_all(&args.out)?;
    let mut manifest = ManifestBuilder::new(
        "generate",
        json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "n_games": args.n_games,
            "max_len": args.max_len,
            "temperature": args.temperature,
            "top_k": args.top_k,
        }),
    );
    manifest
        .input(&args.checkpoint)
        .output(&args.out)
        .seed(args.seed);

    for i in 0..args.n_games {
        let ids = sample_from_checkpoint(
            &ckpt,
            args.max_len,
            args.temperature,
            args.top_k,
            args.seed.wrapping_add(i as u64),
        )?;
        let decoded = vocab.decode(&ids);
        let mut record = decoded.record;
        record.header = standard_header(vocab.board_size());
        let text = serialize_game(&record);
        fs::write(
            args.out.join(format!("game-{i:04}.sgf")),
            format!("{text}\n"),
        )?;
    }
    manifest.write_into_dir(&args.out)?;
    println!("wrote {} games to {}", args.n_games, args.out.display());
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.sgf)?;
    let parsed = parse_game(&text, &args.sgf.display().to_string())?;
    for d in &parsed.diagnostics {
        eprintln!("parse: byte {}: {}", d.offset, d.detail);
    }
    let record = parsed.record;
    let size = record.board_size();
    let result = replay(&record);
    let legal = result.legal_prefix_len(record.moves.len());
    for (i, mv) in record.moves.iter().take(legal).enumerate() {
        match mv.point {
            Some(c) => println!(
                "{:3} {} ({}, {}) {:?}",
                i + 1,
                mv.color.letter(),
                c.col,
                c.row,
                classify_region(c, size)
            ),
            None => println!("{:3} {} pass", i + 1, mv.color.letter()),
        }
    }
    match (result.first_illegal_index, result.first_illegal) {
        (Some(idx), Some(kind)) => {
            println!("illegal at move {}: {kind}", idx + 1);
            println!("legal prefix: {legal} of {} moves", record.moves.len());
        }
        _ => println!("fully legal: {} moves", record.moves.len()),
    }
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.sgf)?;
    let parsed = parse_game(&text, &args.sgf.display().to_string())?;
    let result = replay(&parsed.record);
    if let Some(idx) = result.first_illegal_index {
        eprintln!("note: scoring the position before illegal move {}", idx + 1);
    }
    let s = score(&result.final_board, args.komi);
    println!("area:      B {} / W {}", s.black_area, s.white_area);
    println!(
        "territory: B {} / W {}",
        s.black_territory, s.white_territory
    );
    println!("result:    {} (komi {})", s.result_text, s.komi);
    Ok(())
}

fn write_sgf_dir(out: &Path, games: &[GameRecord]) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    for (i, record) in games.iter().enumerate() {
        fs::write(
            out.join(format!("game-{i:04}.sgf")),
            format!("{}\n", serialize_game(record)),
        )?;
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new(
        "baseline",
        json!({ "n_games": args.n_games, "moves": args.moves, "size": args.size }),
    );
    manifest.output(&args.out).seed(args.seed);
    let games = random_baseline(args.n_games, args.moves, args.size, args.seed);
    write_sgf_dir(&args.out, &games)?;
    manifest.write_into_dir(&args.out)?;
    println!(
        "wrote {} baseline games to {}",
        games.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_fixtures(args: FixturesArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new(
        "fixtures",
        json!({ "n_games": args.n_games, "size": args.size }),
    );
    manifest.output(&args.out).seed(args.seed);
    let games = sample_games(&FixtureSpec {
        games: args.n_games,
        size: args.size,
        seed: args.seed,
        ..FixtureSpec::default()
    });
    write_sgf_dir(&args.out, &games)?;
    manifest.write_into_dir(&args.out)?;
    println!(
        "wrote {} sample games to {}",
        games.len(),
        args.out.display()
    );
    Ok(())
}

fn load_games_dir(dir: &Path) -> Result<Vec<EvalGame>, CliError> {
    let files = sgf_files_in_dir(dir)?;
    let mut games = Vec::with_capacity(files.len());
    for path in files {
        let text = fs::read_to_string(&path)?;
        match parse_game(&text, &path.display().to_string()) {
            Ok(parsed) => games.push(EvalGame::from_parsed(parsed)),
            Err(e) => eprintln!("skipping {}: {e}", path.display()),
        }
    }
    Ok(games)
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let games = load_games_dir(&args.games)?;
    let report = evaluate(&games, args.opening_n, args.komi)?;
    print!("{report}");
    if let Some(out) = &args.out {
        let mut manifest = ManifestBuilder::new(
            "eval",
            json!({
                "games": args.games.display().to_string(),
                "opening_n": args.opening_n,
                "komi": args.komi,
            }),
        );
        manifest.input(&args.games).output(out);
        fs::write(out, serde_json::to_string_pretty(&report)?)?;
        manifest.write_beside(out)?;
    }
    Ok(())
}

fn load_report(path: &Path) -> Result<EvalReport, CliError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let model = load_report(&args.model)?;
    let baseline = load_report(&args.baseline)?;
    let report = compare(&model, &baseline)?;
    print!("{report}");
    if let Some(out) = &args.out {
        let mut manifest = ManifestBuilder::new(
            "compare",
            json!({
                "model": args.model.display().to_string(),
                "baseline": args.baseline.display().to_string(),
            }),
        );
        manifest
            .input(&args.model)
            .input(&args.baseline)
            .output(out);
        fs::write(out, serde_json::to_string_pretty(&report)?)?;
        manifest.write_beside(out)?;
    }
    Ok(())
}
