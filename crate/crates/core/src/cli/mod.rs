//! Command-line front end: scenario configs, the `run` pipeline, plotting
//! tables and parameter scans.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod scan;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::Result;

pub use config::{Action, Overrides, RawConfig, Scenario};
pub use report::Report;
pub use run::{run_scenario, Settings};

/// Process exit code for a run whose checks all passed.
pub const EXIT_PASS: u8 = 0;
/// Exit code for errors: unreadable config, invalid input, failed construction.
pub const EXIT_ERROR: u8 = 1;
/// Exit code when the run completed but a check failed.
pub const EXIT_FAIL: u8 = 2;

/// Parses the config at `path` and runs it into `out_root/<name>`.
pub fn run_file(path: &Path, settings: &Settings, out_root: &Path) -> Result<(PathBuf, Report)> {
    let sc = RawConfig::read(path)?.scenario(&BTreeMap::new())?;
    let dir = out_root.join(&sc.name);
    let report = run_scenario(&sc, settings, &dir)?;
    Ok((dir, report))
}

/// Scans the config at `path` into `out_root/<name>`.
pub fn scan_file(path: &Path, settings: &Settings, out_root: &Path) -> Result<(PathBuf, scan::ScanOutcome)> {
    let raw = RawConfig::read(path)?;
    let outcome = scan::scan_config(&raw, settings)?;
    let dir = out_root.join(&outcome.name);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("scan.csv"), outcome.csv())?;
    std::fs::write(dir.join("scan.txt"), outcome.render())?;
    Ok((dir, outcome))
}
