mod commands;
mod config;
mod io;
mod oracles;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use expanse_core::construct::AnchorSide;
use expanse_core::{Error, Language};

#[derive(Parser, Debug)]
#[command(name = "expanse", version, about = "Build and evaluate text expansion corpora")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Pipeline configuration (JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_lang)]
    lang: Option<Language>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "EXPANSE_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Manifest path; defaults to `<out>.manifest.json` for file outputs.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Io {
    /// Input file, `-` for standard input.
    #[arg(long, short, default_value = "-")]
    input: PathBuf,
    /// Output file, `-` for standard output.
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prune constituency trees into (skeleton, sentence) pairs.
    Prune {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        max_prunable_leaves: Option<usize>,
    },
    /// Extract pairs by deleting hypernym phrases found with lexico-syntactic patterns.
    Hearst {
        #[command(flatten)]
        io: Io,
        /// Pattern file (JSONL); the built-in patterns otherwise.
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Canonicalize pairs, or emit joint / pipelined training templates.
    Align {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value_t = AlignFormat::Pairs)]
        format: AlignFormat,
        #[arg(long)]
        mask_format: Option<String>,
        #[arg(long)]
        null_token: Option<String>,
    },
    /// Apply the pair filters; kept pairs go to --out, verdicts of the rest to --rejects.
    Filter {
        #[command(flatten)]
        io: Io,
        /// Defaults to `<out>.rejects.jsonl` for file outputs.
        #[arg(long)]
        rejects: Option<PathBuf>,
        #[arg(long)]
        lm_oracle: Option<String>,
        #[arg(long)]
        nli_oracle: Option<String>,
    },
    /// Sample masked-modifier-prediction templates from tagged text.
    MmpPrep {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        repeats: Option<usize>,
        /// Mask count range, `LO..HI`.
        #[arg(long, value_parser = parse_range)]
        k: Option<[usize; 2]>,
        #[arg(long, value_enum)]
        anchor_side: Option<Side>,
        #[arg(long)]
        mask_format: Option<String>,
    },
    /// Build span-masked pretraining templates.
    PretrainMask {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        rate: Option<f64>,
        /// Random span length range, `LO..HI`.
        #[arg(long, value_parser = parse_range)]
        span_len: Option<[usize; 2]>,
        #[arg(long)]
        mask_format: Option<String>,
    },
    /// Train or apply the n-gram language model.
    Lm {
        #[command(subcommand)]
        action: LmAction,
    },
    /// Score a system corpus against references.
    Metrics {
        #[arg(long)]
        sys: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        lm_oracle: Option<String>,
        #[arg(long)]
        nli_oracle: Option<String>,
        #[arg(long)]
        infill_oracle: Option<String>,
        #[arg(long)]
        mask_format: Option<String>,
        /// Report file (JSON), `-` for standard output.
        #[arg(long, default_value = "-")]
        report: PathBuf,
    },
    /// Render a metrics report as a table.
    Report {
        #[command(flatten)]
        io: Io,
    },
}

#[derive(Subcommand, Debug)]
enum LmAction {
    /// Train on whitespace-tokenized lines.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.01)]
        add_k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score whitespace-tokenized lines.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        io: Io,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum AlignFormat {
    Pairs,
    Joint,
    Pipelined,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Side {
    Before,
    After,
    Both,
}

impl From<Side> for AnchorSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Before => AnchorSide::Before,
            Side::After => AnchorSide::After,
            Side::Both => AnchorSide::Both,
        }
    }
}

fn parse_lang(s: &str) -> Result<Language, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> Result<[usize; 2], String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
    let lo = lo.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let hi = hi.trim().parse::<usize>().map_err(|e| e.to_string())?;
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok([lo, hi])
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("expanse: {e}");
            ExitCode::from(match e {
                Error::Oracle(_) => 2,
                _ => 1,
            })
        }
    }
}
