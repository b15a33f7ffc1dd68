use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use compreg_cli::commands::{evaluate, fit, simulate};
use compreg_cli::error::CliError;
use compreg_cli::format::write_json;

#[derive(Parser)]
#[command(name = "compreg", version, about = "Spatially clustered compositional regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate replicated datasets from a simulation setting.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one chain per dataset and smoothing value, then select by LPML.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Score fits against simulated truth.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Output directory of `simulate`.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Output directory of `fit`.
        #[arg(long)]
        fits: Option<PathBuf>,
    },
}

fn write_diagnostics(out: &Path, err: &CliError) {
    if let CliError::Numerical { message, context } = err {
        let mut record = serde_json::Map::new();
        record.insert("error".into(), message.clone().into());
        for (k, v) in context {
            record.insert(k.clone(), v.clone().into());
        }
        let _ = std::fs::create_dir_all(out);
        if let Err(e) = write_json(&out.join("diagnostics.json"), &record) {
            eprintln!("error: could not write diagnostics: {e}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (out, result) = match cli.command {
        Command::Simulate { config, out, seed } => {
            let r = simulate::run(config.as_deref(), &out, seed);
            (out, r)
        }
        Command::Fit {
            config,
            out,
            seed,
            threads,
        } => {
            let r = fit::run(&config, &out, seed, threads);
            (out, r)
        }
        Command::Evaluate {
            config,
            out,
            truth,
            fits,
        } => {
            let r = evaluate::run(config.as_deref(), &out, truth, fits);
            (out, r)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            write_diagnostics(&out, &err);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
