use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use perclab::harness::{self, ExperimentConfig, ExperimentKind, HarnessError, WORKERS_ENV};

/// Run a percolation-lab experiment from a JSON config.
#[derive(Debug, Parser)]
#[command(name = "perclab", version)]
struct Cli {
    /// perc, uniq, rc, rigid, entangle, labyrinth or pc-scan.
    kind: String,
    /// JSON config, or a manifest from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Output directory; defaults to the config's `out`, then `perclab-out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main_inner(cli: Cli) -> Result<(), HarnessError> {
    let kind: ExperimentKind = cli.kind.parse()?;
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| HarnessError::Config(format!("reading {}: {e}", cli.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text, Some(kind))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let workers = match cli.workers {
        Some(0) => return Err(HarnessError::Config("workers must be at least 1".into())),
        Some(k) => k,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let base = cli.config.parent().unwrap_or(Path::new("."));
    let out = harness::output_dir(cli.out, &config);
    let manifest = harness::run(&config, workers, &out, base)?;
    eprintln!(
        "{}: {} tasks on {} workers in {:.2}s, wrote {}",
        manifest.kind,
        manifest.tasks.len(),
        manifest.workers,
        manifest.wall_time_seconds,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("perclab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
