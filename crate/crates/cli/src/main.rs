use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ssagcn_cli::artifacts::EmbeddingKind;
use ssagcn_cli::commands;
use ssagcn_cli::variant::VariantSelection;
use ssagcn_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "ssagcn", version, about = "Citation-graph node classification pipeline")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "configs/cora.toml")]
    config: PathBuf,
    /// Base seed; run r uses seed + r.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of seeded runs per variant.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Single-threaded everywhere, for bit-identical reruns.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the raw dataset into the graph cache and draw the splits.
    Prepare,
    /// Train one embedding table.
    Embed {
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Train a variant (or the `ablation` / `privacy` groups).
    Train {
        #[arg(long)]
        variant: String,
    },
    /// Write labeled embedding tables for inspection.
    Export,
    /// Aggregate result records into a table.
    Report {
        /// Result files to read instead of the experiment's own.
        #[arg(long = "results")]
        results: Vec<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Which {
    Structure,
    Semantic,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    cfg.apply_overrides(cli.seed, cli.runs, cli.deterministic);
    cfg.validate()?;
    match cli.command {
        Command::Prepare => {
            let s = commands::prepare(&cfg)?;
            println!(
                "{}: {} nodes, {} edges, {} classes, {} features{}",
                cfg.dataset.name,
                s.num_nodes,
                s.num_edges,
                s.num_classes,
                s.feature_dim,
                if s.cache_hit { " (cached)" } else { "" }
            );
        }
        Command::Embed { which } => {
            let kind = match which {
                Which::Structure => EmbeddingKind::Structure,
                Which::Semantic => EmbeddingKind::Semantic,
            };
            let s = commands::embed(&cfg, kind)?;
            println!(
                "{} embeddings: {}x{}{}",
                kind.name(),
                s.rows,
                s.dim,
                if s.cache_hit { " (cached)" } else { "" }
            );
        }
        Command::Train { variant } => {
            let selection: VariantSelection = variant.parse()?;
            for r in commands::train(&cfg, selection)? {
                println!(
                    "{} {}: test {:.2} ± {:.2} (dev {:.2} ± {:.2}) over {} runs",
                    r.dataset,
                    r.variant,
                    100.0 * r.test_mean,
                    100.0 * r.test_std,
                    100.0 * r.dev_mean,
                    100.0 * r.dev_std,
                    r.runs.len()
                );
            }
        }
        Command::Export => {
            for f in commands::export(&cfg)?.files {
                println!("{}", f.display());
            }
        }
        Command::Report { results } => print!("{}", commands::report(&cfg, &results)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> ExitCode {
    eprintln!("error [{}]: {e}", e.category());
    ExitCode::from(e.exit_code() as u8)
}
