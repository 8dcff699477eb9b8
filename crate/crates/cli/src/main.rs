use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use restoration::load_case;
use restoration::report::{default_omega_grid, run_plan, run_sweep, Overrides, PlanReport, RunError};

/// Plans the restoration of a blacked-out grid from its black-start units.
#[derive(Debug, Parser)]
#[command(name = "restore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute one restoration plan.
    Plan {
        case: PathBuf,
        /// Weight of load importance against proximity, in [0, 1].
        #[arg(long, value_parser = parse_unit_interval)]
        omega: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compute one plan per control value and tabulate the sequences.
    Sweep {
        case: PathBuf,
        /// Comma-separated control values; defaults to 0.0, 0.1, ..., 1.0.
        #[arg(long, value_delimiter = ',', value_parser = parse_unit_interval)]
        omegas: Vec<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Parse and check a case file without planning.
    Validate { case: PathBuf },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Seed for generated load frequency coefficients.
    #[arg(long)]
    seed: Option<u64>,
    /// Minutes per switching operation.
    #[arg(long)]
    switch_minutes: Option<f64>,
    /// Load fluctuation fraction applied at its worst case.
    #[arg(long, value_parser = parse_unit_interval)]
    fluctuation: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Machine,
}

fn parse_unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn emit(report: &PlanReport, common: &CommonArgs) -> Result<(), String> {
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let text = match common.format {
        Format::Table => report.to_table(),
        Format::Machine => report.to_machine(),
    };
    match &common.output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| format!("cannot write output: {e}")),
    }
}

fn overrides(omega: Option<f64>, common: &CommonArgs) -> Overrides {
    Overrides {
        omega,
        seed: common.seed,
        switch_minutes: common.switch_minutes,
        fluctuation: common.fluctuation,
    }
}

fn read(case: &Path) -> Result<restoration::CaseFile, String> {
    load_case(case).map_err(|e| format!("{}: {e}", case.display()))
}

fn run(cli: Cli) -> Result<bool, String> {
    let err = |e: RunError| e.to_string();
    match cli.command {
        Command::Plan { case, omega, common } => {
            let report = run_plan(&read(&case)?, &overrides(omega, &common)).map_err(err)?;
            emit(&report, &common)?;
            Ok(report.all_served())
        }
        Command::Sweep { case, omegas, common } => {
            let grid = if omegas.is_empty() { default_omega_grid() } else { omegas };
            let report = run_sweep(&read(&case)?, &grid, &overrides(None, &common)).map_err(err)?;
            emit(&report, &common)?;
            Ok(report.all_served())
        }
        Command::Validate { case } => {
            let parsed = read(&case)?;
            let grid = parsed.to_grid().map_err(|e| e.to_string())?;
            println!(
                "{}: {} buses, {} lines, {} units, {} loads",
                case.display(),
                grid.buses().count(),
                grid.lines().len(),
                grid.generators().count(),
                grid.loads().count()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
