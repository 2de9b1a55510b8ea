use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rcourt_cli::config::RunConfig;
use rcourt_cli::reports::{cmd_analyze, cmd_cache_clear, cmd_cache_inspect, cmd_report, cmd_score};
use rcourt_cli::runner::cmd_run;
use rcourt_cli::CliError;

#[derive(Parser)]
#[command(
    name = "rcourt",
    version,
    about = "Multi-agent research-and-judge runs over multi-hop QA and fact-verification benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured run (resumable; flush one record per question).
    Run {
        /// Path to the run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override [run].output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override [run].seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override [run].n_questions.
        #[arg(long)]
        n: Option<usize>,
        /// Override [run].strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// Override [run].parallelism.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Recompute metrics for a finished run directory.
    Score { run_dir: PathBuf },
    /// Judge-subset and scenario-bucket analysis for a run directory.
    Analyze { run_dir: PathBuf },
    /// Compare several run directories side by side.
    Report {
        run_dirs: Vec<PathBuf>,
        /// Output directory for report files.
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Inspect or clear a completion/response cache directory.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    Inspect { dir: PathBuf },
    Clear { dir: PathBuf },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            n,
            strategy,
            parallelism,
        } => {
            let mut raw = RunConfig::load(&config)?;
            if let Some(out) = out {
                raw.run.output_dir = out;
            }
            if let Some(seed) = seed {
                raw.run.seed = seed;
                raw.run.seeds = None;
            }
            if let Some(n) = n {
                raw.run.n_questions = n;
            }
            if let Some(strategy) = strategy {
                raw.run.strategy = strategy;
            }
            if let Some(parallelism) = parallelism {
                raw.run.parallelism = parallelism;
            }
            let resolved = raw.resolve()?;
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| CliError::Runtime(format!("starting runtime: {e}")))?;
            let dirs = runtime.block_on(cmd_run(&resolved))?;
            for dir in dirs {
                println!("run complete: {}", dir.display());
            }
            Ok(())
        }
        Command::Score { run_dir } => cmd_score(&run_dir).map(|_| ()),
        Command::Analyze { run_dir } => cmd_analyze(&run_dir).map(|_| ()),
        Command::Report { run_dirs, out } => cmd_report(&run_dirs, &out),
        Command::Cache { action } => match action {
            CacheAction::Inspect { dir } => cmd_cache_inspect(&dir).map(|_| ()),
            CacheAction::Clear { dir } => cmd_cache_clear(&dir),
        },
    }
}
