use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use roelcke::experiment::{export_csv, run_suite, ExperimentConfig, Mode, Suite};
use roelcke::{rational, Error};

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Run a seeded experiment suite and emit a JSON or CSV report.
///
/// Exit status: 0 when every trial passes, 1 on violations, 2 on bad
/// arguments, 3 when the requested net is too large to certify, 4 on I/O
/// failure, 5 on internal errors.
#[derive(Debug, Parser)]
#[command(name = "roelcke", version)]
struct Cli {
    #[arg(long, value_enum, env = "ROELCKE_SUITE")]
    suite: Suite,
    /// Number of atoms N.
    #[arg(long, default_value_t = 16, env = "ROELCKE_ATOMS")]
    atoms: usize,
    /// Number of cells n (matrix size for the birkhoff suite).
    #[arg(long, default_value_t = 2, env = "ROELCKE_CELLS")]
    cells: usize,
    /// Positive rational, e.g. 1/8.
    #[arg(long, default_value = "1/8", env = "ROELCKE_EPSILON")]
    epsilon: String,
    #[arg(long, default_value_t = 100, env = "ROELCKE_TRIALS")]
    trials: usize,
    #[arg(long, default_value_t = 0, env = "ROELCKE_SEED")]
    seed: u64,
    #[arg(long, value_enum, default_value = "rational", env = "ROELCKE_MODE")]
    mode: Mode,
    #[arg(long, default_value_t = 1e-8, env = "ROELCKE_TOL")]
    tol: f64,
    /// Output file; stdout when absent.
    #[arg(long, env = "ROELCKE_OUT")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json", env = "ROELCKE_FORMAT")]
    format: Format,
    /// Leave out the `generated_at` field.
    #[arg(long, env = "ROELCKE_NO_TIMESTAMP")]
    no_timestamp: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ParseRational(_) | Error::NonPositiveEpsilon(_) => EXIT_USAGE,
        Error::InfeasibleNet(_) => EXIT_INFEASIBLE,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_INTERNAL,
    }
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}")
}

fn run(cli: Cli) -> Result<bool, Error> {
    let config = ExperimentConfig {
        suite: cli.suite,
        atoms: cli.atoms,
        cells: cli.cells,
        epsilon: rational::parse(&cli.epsilon)?,
        trials: cli.trials,
        seed: cli.seed,
        mode: cli.mode,
        tol: cli.tol,
    };
    let mut report = run_suite(&config)?;
    if !cli.no_timestamp {
        report.generated_at = Some(timestamp());
    }

    let path = cli
        .out
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<stdout>".into());
    let io_err = |e: io::Error| Error::Io {
        path: path.clone(),
        message: e.to_string(),
    };
    let sink: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(File::create(p).map_err(io_err)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match cli.format {
        Format::Json => writeln!(sink, "{}", report.to_json()).map_err(io_err)?,
        Format::Csv => export_csv(&report, &mut sink).map_err(|e| match e {
            Error::Io { message, .. } => Error::Io {
                path: path.clone(),
                message,
            },
            other => other,
        })?,
    }
    sink.flush().map_err(io_err)?;
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VIOLATIONS),
        Err(e) => {
            eprintln!("roelcke: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
