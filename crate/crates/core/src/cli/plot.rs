//! Collects the CSV artifacts of a run directory into plot-ready tables and
//! writes a gnuplot script for them.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gridfn::GridFunction;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotOutcome {
    /// Tables written, with their column names.
    pub tables: Vec<(String, Vec<String>)>,
    /// Expected inputs that were absent.
    pub missing: Vec<String>,
}

struct Table {
    file: &'static str,
    title: &'static str,
    columns: Vec<(String, String)>,
}

fn numbered(dir: &Path, prefix: &str, label: &str) -> Vec<(String, String)> {
    (1..=6)
        .map(|k| (format!("{prefix}{k}.csv"), format!("{label}{k}")))
        .take_while(|(f, _)| dir.join(f).exists())
        .collect()
}

fn tables(dir: &Path) -> Vec<Table> {
    let mut potentials = vec![("v1.csv".to_string(), "V1".to_string()), ("v2.csv".to_string(), "V2".to_string())];
    potentials.extend(numbered(dir, "intermediate", "V_mid"));
    potentials.push(("h1.csv".into(), "h1".into()));
    potentials.push(("h2.csv".into(), "h2".into()));
    let mut supers = vec![("w1.csv".to_string(), "w1".to_string())];
    supers.extend(numbered(dir, "w", "w").into_iter().skip(1));
    vec![
        Table { file: "potentials.csv", title: "potentials", columns: potentials },
        Table { file: "superpotentials.csv", title: "superpotentials", columns: supers },
        Table {
            file: "gfunction.csv",
            title: "G profile",
            columns: vec![
                ("g.csv".into(), "G".into()),
                ("discriminant.csv".into(), "discriminant".into()),
                ("sqrt_branch.csv".into(), "sqrt_branch".into()),
            ],
        },
    ]
}

/// Writes `potentials.csv`, `superpotentials.csv`, `gfunction.csv` (real
/// parts, shared abscissa) and `plot.gp` into `dir`. Intermediate and cubic
/// artifacts are optional; absent ones are listed in the outcome.
pub fn plot_directory(dir: &Path) -> Result<PlotOutcome> {
    if !dir.join("v1.csv").exists() {
        return Err(Error::Precondition(format!("{} holds no run output (v1.csv missing)", dir.display())));
    }
    let mut outcome = PlotOutcome::default();
    let mut script = String::from("set datafile separator ','\nset key autotitle columnhead\nset xlabel 'x'\nset terminal pngcairo size 900,600\n");
    for table in tables(dir) {
        let mut names = Vec::new();
        let mut columns: Vec<GridFunction> = Vec::new();
        for (file, label) in &table.columns {
            let path = dir.join(file);
            if !path.exists() {
                outcome.missing.push(file.clone());
                continue;
            }
            let f = GridFunction::read_csv(&path)?;
            if let Some(first) = columns.first() {
                first.same_grid(&f)?;
            }
            columns.push(f);
            names.push(label.clone());
        }
        if columns.is_empty() {
            continue;
        }
        let grid = *columns[0].grid();
        let mut out = String::from("x");
        for n in &names {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
        for i in 0..grid.n_points() {
            let _ = write!(out, "{:.16e}", grid.x(i));
            for c in &columns {
                let _ = write!(out, ",{:.16e}", c.at(i).re);
            }
            out.push('\n');
        }
        std::fs::write(dir.join(table.file), out)?;
        let stem = table.file.trim_end_matches(".csv");
        let _ = writeln!(script, "set output '{stem}.png'\nset title '{}'", table.title);
        let plots: Vec<String> = (0..names.len()).map(|k| format!("'{}' using 1:{} with lines", table.file, k + 2)).collect();
        let _ = writeln!(script, "plot {}", plots.join(", "));
        outcome.tables.push((table.file.to_string(), names));
    }
    std::fs::write(dir.join("plot.gp"), script)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::Grid;

    #[test]
    fn assembles_available_columns() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(4.0, 65).unwrap();
        GridFunction::from_real_fn(g, |_| 0.0).write_csv(&dir.path().join("v1.csv")).unwrap();
        GridFunction::from_real_fn(g, |x| -2.0 / x.cosh().powi(2)).write_csv(&dir.path().join("v2.csv")).unwrap();
        GridFunction::from_real_fn(g, f64::tanh).write_csv(&dir.path().join("w1.csv")).unwrap();
        let out = plot_directory(dir.path()).unwrap();
        assert_eq!(out.tables.len(), 2);
        assert_eq!(out.tables[0].1, vec!["V1", "V2"]);
        assert!(out.missing.contains(&"g.csv".to_string()) && out.missing.contains(&"h1.csv".to_string()));
        let text = std::fs::read_to_string(dir.path().join("potentials.csv")).unwrap();
        assert!(text.starts_with("x,V1,V2\n"));
        assert_eq!(text.lines().count(), 66);
        assert!(std::fs::read_to_string(dir.path().join("plot.gp")).unwrap().contains("superpotentials.csv"));
    }

    #[test]
    fn refuses_empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(plot_directory(dir.path()).is_err());
    }
}
