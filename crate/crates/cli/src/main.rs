use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relrank::synth::SynthConfig;
use relrank::Result;
use relrank_cli::pipeline::{self, Split};
use relrank_cli::PipelineConfig;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "relrank", version, about = "BM25 retrieval and neural re-ranking pipelines")]
struct Cli {
    /// JSON pipeline configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set model.architecture="drmm"`.
    /// Values are parsed as JSON, falling back to a plain string.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and save the inverted index; prints corpus statistics.
    Index,
    /// Write the BM25 top-N run.
    Retrieve {
        #[arg(long, default_value = "all")]
        split: String,
    },
    /// Train the configured model on the train split, selecting on dev.
    Train,
    /// Re-rank BM25 candidates with the trained checkpoint.
    Rerank {
        #[arg(long, default_value = "test")]
        split: String,
        /// Move judged-relevant candidates to the top instead.
        #[arg(long)]
        oracle: bool,
    },
    /// Score a run, and test it against a second run when given.
    Eval {
        run_a: PathBuf,
        run_b: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        split: String,
        /// Print the full report as JSON instead of tables.
        #[arg(long)]
        json: bool,
    },
    /// Dump the similarity views and encodings for one pair.
    Inspect { query_id: String, doc_id: String },
    /// Write per-fold split files and configs.
    Xval,
    /// Train and test once per seed in `repeat_seeds`.
    Repeat,
    /// Generate a synthetic collection with a ready-made config.
    Synth {
        dir: PathBuf,
        /// JSON `SynthConfig`; defaults otherwise.
        #[arg(long)]
        synth_config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    match &cli.config {
        Some(p) => PipelineConfig::load(p, &cli.overrides),
        None => PipelineConfig::from_json("{}", &cli.overrides, Some(Path::new("."))),
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Synth { dir, synth_config, seed } = &cli.command {
        let mut synth = match synth_config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| relrank::Error::file(p, e))?)?,
            None => SynthConfig::default(),
        };
        if let Some(s) = seed {
            synth.seed = *s;
        }
        let base = PipelineConfig::from_json("{}", &cli.overrides, None)?;
        let path = pipeline::cmd_synth(&synth, dir, &base)?;
        println!("{}", path.display());
        return Ok(());
    }
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Index => print_json(&pipeline::cmd_index(&cfg)?),
        Command::Retrieve { split } => {
            println!("{}", pipeline::cmd_retrieve(&cfg, Split::parse(split)?)?.display());
            Ok(())
        }
        Command::Train => print_json(&pipeline::cmd_train(&cfg)?),
        Command::Rerank { split, oracle } => {
            println!("{}", pipeline::cmd_rerank(&cfg, Split::parse(split)?, *oracle)?.display());
            Ok(())
        }
        Command::Eval { run_a, run_b, split, json } => {
            let summary = pipeline::cmd_eval(&cfg, run_a, run_b.as_deref(), Split::parse(split)?)?;
            if *json {
                return print_json(&summary);
            }
            for r in std::iter::once(&summary.a).chain(&summary.b) {
                println!("{}\n{}", r.run_id, r.to_table());
            }
            for s in &summary.significance {
                println!("{:<7} diff {:+.4}  p {:.4}  ({} permutations)", s.metric, s.observed_diff, s.p_value, s.permutations);
            }
            Ok(())
        }
        Command::Inspect { query_id, doc_id } => print_json(&pipeline::cmd_inspect(&cfg, query_id, doc_id)?),
        Command::Xval => {
            for p in pipeline::cmd_xval(&cfg)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Repeat => print_json(&pipeline::cmd_repeat(&cfg)?),
        Command::Synth { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
