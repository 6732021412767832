use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixact::cli::{report, run_study, CliError, Overrides};
use mixact::config::StudyKind;

/// Adaptive designs for computer experiments with mixed inputs.
#[derive(Parser)]
#[command(name = "mixact", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated minimization study (best minimum vs budget).
    Optimize(StudyArgs),
    /// Replicated contour estimation study (contour accuracy vs budget).
    Contour(StudyArgs),
    /// Replicated prediction study (log RMSE and timings).
    Predict(StudyArgs),
    /// Render every summary.csv under a results directory as tables.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct StudyArgs {
    /// Study file (TOML, flat dotted keys).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to $MIXACT_OUT/<name> or results/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent replication cells.
    #[arg(long)]
    jobs: Option<usize>,
}

fn study(kind: StudyKind, args: StudyArgs) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        jobs: args.jobs,
    };
    let report = run_study(&args.config, kind, &overrides)?;
    eprintln!(
        "{}: {} cells over {} runs",
        report.study,
        report.cells.len(),
        report.runs.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize(a) => study(StudyKind::Optimize, a),
        Command::Contour(a) => study(StudyKind::Contour, a),
        Command::Predict(a) => study(StudyKind::Predict, a),
        Command::Report { dir } => report(&dir).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
