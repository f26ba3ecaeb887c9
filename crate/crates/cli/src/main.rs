//! `depool`: decomposition, reconstruction, fusion, inference, metrics and
//! benchmarks from the command line.
//!
//! Exit codes: 0 success, 1 failed check, 2 I/O, 3 shape or parameter,
//! 4 weight file.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use depool_core::depool::BankKind;
use depool_core::Execution;

#[derive(Debug, Parser)]
#[command(name = "depool", version, about = "Decomposition pooling and infrared/visible image fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write per-level subbands of a grayscale image.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(long, default_value = "4x4", value_parser = parse_bank)]
        bank: BankKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild an image from a `decompose` directory.
    Reconstruct {
        #[arg(long)]
        subbands: PathBuf,
        #[arg(long, default_value = "4x4", value_parser = parse_bank)]
        bank: BankKind,
        #[arg(long)]
        out: PathBuf,
        /// Report the max-abs difference against this image.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Training-free pyramid fusion of a registered pair.
    Fuse {
        #[arg(long)]
        ir: PathBuf,
        #[arg(long)]
        vi: PathBuf,
        /// `key = value` fusion settings; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Fuse on the luma of a PPM visible image and keep its chroma.
        #[arg(long)]
        color: bool,
    },
    /// Network fusion with a DEPF weight file.
    Infer {
        #[arg(long)]
        ir: PathBuf,
        #[arg(long)]
        vi: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
    /// Write a seeded random DEPF weight file.
    InitWeights {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics CSV for every manifest row with a fused image.
    Metrics {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the de-pooling gradient.
    Gradcheck {
        #[arg(long, default_value = "8x8")]
        size: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mean metrics and round-trip PSNR per config over a manifest.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of `.cfg` files, run in name order.
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the bundled synthetic pairs and a manifest.
    Corpus {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_bank(s: &str) -> Result<BankKind, String> {
    s.parse().map_err(|e: depool_core::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), commands::Failure> {
    match cli.command {
        Command::Decompose { input, levels, bank, out } => commands::decompose(&input, levels, bank, &out),
        Command::Reconstruct { subbands, bank, out, reference } => commands::reconstruct(&subbands, bank, &out, reference.as_deref()),
        Command::Fuse { ir, vi, config, out, color } => commands::fuse(&ir, &vi, config.as_deref(), &out, color),
        Command::Infer { ir, vi, weights, out, sequential } => {
            let execution = if sequential { Execution::Sequential } else { Execution::Parallel };
            commands::infer(&ir, &vi, &weights, &out, execution)
        }
        Command::InitWeights { seed, out } => commands::init_weights(seed, &out),
        Command::Metrics { manifest, out } => commands::metrics(&manifest, &out),
        Command::Gradcheck { size, seed } => commands::gradcheck(&size, seed),
        Command::Bench { manifest, configs, out } => commands::bench(&manifest, &configs, &out),
        Command::Corpus { out } => commands::corpus(&out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
