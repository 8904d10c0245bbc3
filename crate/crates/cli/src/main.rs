use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;
use shield_core::parallel::Execution;
use shield_core::pipeline::{run, LabelerMode, RunConfig};
use shield_core::report::SummaryKind;
use shield_core::ShieldError;

#[derive(Debug, Parser)]
#[command(
    name = "shield",
    version,
    about = "Adverse-event signal detection and clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline and write the report directory.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelerArg {
    Offline,
    Llm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SummaryArg {
    Median,
    Mean,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Incidence table (CSV).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Term embeddings (binary or CSV).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Arm columns to analyse, in order (comma separated).
    #[arg(long, value_delimiter = ',')]
    arms: Option<Vec<String>>,
    /// Similarity threshold tau.
    #[arg(long)]
    sim_min: Option<f64>,
    /// Credible interval level.
    #[arg(long)]
    gamma: Option<f64>,
    /// Posterior draws per term.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    labeler: Option<LabelerArg>,
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    /// Concurrent label requests.
    #[arg(long)]
    llm_max_in_flight: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop terms without an embedding instead of failing.
    #[arg(long)]
    skip_missing: bool,
    /// Omit the interactive viewer from report.html.
    #[arg(long)]
    no_viewer: bool,
    /// Compiled viewer script to inline instead of the built-in one.
    #[arg(long)]
    viewer_assets: Option<PathBuf>,
    /// Weight terms by the lower bound of |IC| (two-arm runs).
    #[arg(long)]
    two_sided: bool,
    /// Also label internal dendrogram nodes.
    #[arg(long)]
    label_hierarchy: bool,
    #[arg(long, value_enum)]
    summary: Option<SummaryArg>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    /// Run every stage on one thread.
    #[arg(long)]
    sequential: bool,
    /// key = value settings file; flags given here win.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config_file(path: &PathBuf) -> Result<RunConfig, ShieldError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ShieldError::Config(format!("reading {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ShieldError::Config(format!("{}: {e}", path.display())))
}

fn build_config(args: AnalyzeArgs) -> Result<RunConfig, ShieldError> {
    let mut c = match &args.config {
        Some(path) => load_config_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.input {
        c.input = v;
    }
    if let Some(v) = args.embeddings {
        c.embeddings = v;
    }
    if let Some(v) = args.arms {
        c.arms = v.into_iter().map(|a| a.trim().to_string()).collect();
    }
    if let Some(v) = args.sim_min {
        c.sim_min = v;
    }
    if let Some(v) = args.gamma {
        c.gamma = v;
    }
    if let Some(v) = args.draws {
        c.draws = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.labeler {
        c.labeler = match v {
            LabelerArg::Offline => LabelerMode::Offline,
            LabelerArg::Llm => LabelerMode::Llm,
        };
    }
    if args.llm_endpoint.is_some() {
        c.llm_endpoint = args.llm_endpoint;
    }
    if args.llm_model.is_some() {
        c.llm_model = args.llm_model;
    }
    if let Some(v) = args.llm_max_in_flight {
        c.llm_max_in_flight = v;
    }
    if let Some(v) = args.out {
        c.out = v;
    }
    if args.viewer_assets.is_some() {
        c.viewer_assets = args.viewer_assets;
    }
    if let Some(v) = args.summary {
        c.summary = match v {
            SummaryArg::Median => SummaryKind::Median,
            SummaryArg::Mean => SummaryKind::Mean,
        };
    }
    if let Some(v) = args.min_cluster_size {
        c.min_cluster_size = v;
    }
    c.skip_missing |= args.skip_missing;
    c.no_viewer |= args.no_viewer;
    c.two_sided |= args.two_sided;
    c.label_hierarchy |= args.label_hierarchy;
    if args.sequential {
        c.execution = Execution::Sequential;
    }
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Analyze(args) = cli.command;
    let result = build_config(args).and_then(|config| {
        run(&config)?;
        Ok(config)
    });
    match result {
        Ok(config) => {
            println!("report written to {}", config.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
