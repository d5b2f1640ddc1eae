use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use susy_forge::cli::{self, Overrides, Settings, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "susy-forge", version, about = "Higher-order intertwining operators for 1D Schrödinger Hamiltonians")]
struct Args {
    /// Grid points (overrides the config).
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Grid half-width L (overrides the config).
    #[arg(long, global = true)]
    grid_l: Option<f64>,
    /// Fraction of the window excluded from residuals at each end.
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Multiplies every pass/fail threshold.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Output root; each scenario writes into a subdirectory named after it.
    #[arg(long, global = true, env = "SUSY_FORGE_OUT", default_value = "susy-forge-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and check the scenario described by a config file.
    Run { config: PathBuf },
    /// Assemble plot tables and a gnuplot script in a run directory.
    Plot { dir: PathBuf },
    /// Scan the [scan] parameters of a config for nodeless Wronskians.
    Scan { config: PathBuf },
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: String) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let args = Args::parse();
    if !(args.tol_scale > 0.0 && args.tol_scale.is_finite()) {
        eprintln!("error: --tol-scale must be positive");
        return ExitCode::from(EXIT_ERROR);
    }
    let settings = Settings {
        overrides: Overrides { grid_n: args.grid_n, grid_l: args.grid_l, margin: args.margin },
        tol_scale: args.tol_scale,
    };
    let outcome = match &args.command {
        Command::Run { config } => cli::run_file(config, &settings, &args.out).map(|(dir, report)| {
            emit(format!("{}output = {}\n", report.render(), dir.display()));
            report.passed()
        }),
        Command::Plot { dir } => cli::plot::plot_directory(dir).map(|out| {
            let mut text = String::new();
            for (file, cols) in &out.tables {
                text += &format!("wrote {file} ({})\n", cols.join(", "));
            }
            for m in &out.missing {
                text += &format!("skipped {m} (not present)\n");
            }
            emit(text + "wrote plot.gp\n");
            true
        }),
        Command::Scan { config } => cli::scan_file(config, &settings, &args.out).map(|(dir, out)| {
            emit(format!("{}output = {}\n", out.render(), dir.display()));
            out.feasible_count() > 0
        }),
    };
    match outcome {
        Ok(true) => ExitCode::from(EXIT_PASS),
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
