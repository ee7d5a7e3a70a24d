//! `peacelex` command line: config handling, the artifact store and one
//! command per pipeline stage.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::artifacts::Store;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, EXIT_CODE_HELP};

#[derive(Debug, Parser)]
#[command(name = "peacelex", version, about = "Peace-speech lexical analysis pipeline", after_help = EXIT_CODE_HELP)]
pub struct Cli {
    /// TOML pipeline config. Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed (and the synthetic corpus seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides output_dir; for `synth`, the directory the corpus is written to.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Count words per country from the corpus directory.
    Ingest,
    /// Filter, normalize, aggregate groups and build the feature matrix.
    Preprocess,
    /// Random search per model, then a final fit on every labeled country.
    Train,
    /// Leave-one-out evaluation of the trained models.
    Evaluate,
    /// Rank words by model attribution.
    Features,
    /// Lay out word clouds as JSON and SVG.
    Cloud,
    /// PCA and k-means over the ranked words' embeddings.
    Cluster,
    /// Agreement between k-means clusters and imported theme files.
    Compare,
    /// Write a synthetic corpus with planted marker words.
    Synth,
    /// Score intermediate countries on a trained model's axis (extension).
    Score,
    /// Every stage from ingest to score.
    Run,
}

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => {
            let cwd = std::env::current_dir().map_err(|e| CliError::io(".", e))?;
            PipelineConfig {
                base_dir: cwd,
                ..PipelineConfig::default()
            }
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.synth.seed = s;
    }
    if let Some(o) = &cli.out {
        if cli.command == Command::Synth {
            cfg.corpus_root = o.clone();
        } else {
            cfg.output_dir = o.clone();
        }
    }
    Ok(cfg)
}

/// Runs one parsed invocation and returns what it prints.
pub fn execute(cli: &Cli) -> CliResult<String> {
    use commands::*;
    let cfg = load_config(cli)?;
    if cli.command == Command::Synth {
        return cmd_synth(&cfg, &cfg.corpus_root());
    }
    let mut store = Store::open(&cfg.output_dir())?;
    let s = &mut store;
    match cli.command {
        Command::Ingest => cmd_ingest(&cfg, s),
        Command::Preprocess => cmd_preprocess(&cfg, s),
        Command::Train => cmd_train(&cfg, s),
        Command::Evaluate => cmd_evaluate(&cfg, s),
        Command::Features => cmd_features(&cfg, s),
        Command::Cloud => cmd_cloud(&cfg, s),
        Command::Cluster => cmd_cluster(&cfg, s),
        Command::Compare => cmd_compare(&cfg, s),
        Command::Score => cmd_score(&cfg, s),
        Command::Run => cmd_run(&cfg, s),
        Command::Synth => unreachable!(),
    }
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            let _ = std::io::stdout().flush();
            0
        }
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}
