use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use schematch_cli::CliError;
use schematch_cli::commands::{self, Baseline};
use schematch_cli::config::{ProviderKind, RunConfig};
use schematch_core::pipeline::AblationFlags;

/// Schema matcher: LLM metadata enrichment plus hybrid BM25/vector
/// retrieval, with a built-in evaluation harness.
#[derive(Parser)]
#[command(name = "schematch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AblationAxis {
    QueryEnrichment,
    DocumentEnrichment,
    NameExpansionPrompt,
    EmbeddingSearch,
    FulltextSearch,
    TableSelection,
}

impl AblationAxis {
    fn apply(self, flags: &mut AblationFlags) {
        match self {
            AblationAxis::QueryEnrichment => flags.query_enrichment = false,
            AblationAxis::DocumentEnrichment => flags.document_enrichment = false,
            AblationAxis::NameExpansionPrompt => flags.name_expansion_prompt = false,
            AblationAxis::EmbeddingSearch => flags.embedding_search = false,
            AblationAxis::FulltextSearch => flags.fulltext_search = false,
            AblationAxis::TableSelection => flags.table_selection = false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    Needle,
}

#[derive(Subcommand)]
enum Command {
    /// Enrich the target schema and build the lexical and vector indexes.
    Index {
        #[arg(long)]
        config: PathBuf,
        /// Use the deterministic offline mock providers.
        #[arg(long)]
        mock_providers: bool,
        /// Rebuild artifacts even if they are up to date.
        #[arg(long)]
        rebuild: bool,
        /// Disable a pipeline component (repeatable).
        #[arg(long, value_enum)]
        ablate: Vec<AblationAxis>,
    },
    /// Match every source column and write the run manifest.
    Match {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mock_providers: bool,
        /// Rebuild index artifacts before matching.
        #[arg(long)]
        rebuild: bool,
        /// Run a retrieval-free baseline instead of the pipeline.
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
        #[arg(long, value_enum)]
        ablate: Vec<AblationAxis>,
    },
    /// Score a run manifest against the ground truth.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Manifest to score (default: <artifact_dir>/manifest.json).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Cutoffs to evaluate, e.g. --k 1,3,5 (default from config).
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        /// Print hit rate even when the ground truth is m:n.
        #[arg(long)]
        force: bool,
    },
    /// Run the full pipeline plus every single-component ablation and
    /// print a comparative table.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mock_providers: bool,
        #[arg(long)]
        rebuild: bool,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
}

fn load_config(path: &Path, mock_providers: bool) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(path)?;
    if mock_providers {
        config.provider.kind = ProviderKind::Mock;
    }
    Ok(config)
}

fn ablation(axes: &[AblationAxis]) -> AblationFlags {
    let mut flags = AblationFlags::default();
    for axis in axes {
        axis.apply(&mut flags);
    }
    flags
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Index {
            config,
            mock_providers,
            rebuild,
            ablate,
        } => {
            let config = load_config(&config, mock_providers)?;
            let paths = commands::cmd_index(&config, &ablation(&ablate), rebuild)?;
            println!("enrichment: {}", paths.enrichment.display());
            println!("lexical index: {}", paths.lexical.display());
            println!("vector index: {}", paths.vector.display());
        }
        Command::Match {
            config,
            mock_providers,
            rebuild,
            baseline,
            ablate,
        } => {
            let config = load_config(&config, mock_providers)?;
            let baseline = baseline.map(|BaselineArg::Needle| Baseline::Needle);
            let path = commands::cmd_match(&config, &ablation(&ablate), baseline, rebuild)?;
            println!("manifest: {}", path.display());
        }
        Command::Evaluate {
            config,
            manifest,
            k,
            force,
        } => {
            let config = load_config(&config, false)?;
            let (_, table) =
                commands::cmd_evaluate(&config, manifest.as_deref(), k.as_deref(), force)?;
            print!("{table}");
        }
        Command::Ablate {
            config,
            mock_providers,
            rebuild,
            k,
        } => {
            let config = load_config(&config, mock_providers)?;
            let table = commands::cmd_ablate(&config, k.as_deref(), rebuild)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
