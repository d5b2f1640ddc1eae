//! Parameter scans: evaluates a scenario on a grid of parameter values and
//! records where the requested partial Wronskians have no zeros.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::config::{RawConfig, ScanParam};
use super::run::Settings;
use crate::error::{Error, Result};
use crate::gridfn::zero_locations;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub values: Vec<f64>,
    pub feasible: bool,
    /// Zero count of each requested `W_j`; empty when the basis failed.
    pub zeros: Vec<usize>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub name: String,
    pub params: Vec<ScanParam>,
    pub nodeless: Vec<usize>,
    pub points: Vec<ScanPoint>,
}

impl ScanOutcome {
    pub fn feasible_count(&self) -> usize {
        self.points.iter().filter(|p| p.feasible).count()
    }

    /// Smallest and largest feasible value of parameter `k`.
    pub fn bounding_range(&self, k: usize) -> Option<(f64, f64)> {
        self.points.iter().filter(|p| p.feasible).map(|p| p.values[k]).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Maximal runs of consecutive feasible samples, for one-parameter scans.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        if self.params.len() != 1 {
            return Vec::new();
        }
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut open = false;
        for p in &self.points {
            let v = p.values[0];
            match (p.feasible, open) {
                (true, true) => out.last_mut().expect("open run").1 = v,
                (true, false) => {
                    out.push((v, v));
                    open = true;
                }
                (false, _) => open = false,
            }
        }
        out
    }

    /// Why no point was feasible: the fewest zeros seen per Wronskian, or
    /// the first construction failure.
    pub fn diagnosis(&self) -> String {
        let mut parts = Vec::new();
        for (k, j) in self.nodeless.iter().enumerate() {
            if let Some(z) = self.points.iter().filter_map(|p| p.zeros.get(k)).min() {
                parts.push(format!("W{j} has at least {z} zero(s)"));
            }
        }
        if let Some(p) = self.points.iter().find(|p| !p.note.is_empty()) {
            parts.push(format!("construction failed at {:?}: {}", p.values, p.note));
        }
        if parts.is_empty() {
            "no points evaluated".into()
        } else {
            parts.join("; ")
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::new();
        for p in &self.params {
            let _ = write!(out, "{},", p.name);
        }
        out.push_str("feasible");
        for j in &self.nodeless {
            let _ = write!(out, ",zeros_w{j}");
        }
        out.push_str(",note\n");
        for pt in &self.points {
            for v in &pt.values {
                let _ = write!(out, "{v:.16e},");
            }
            out.push_str(if pt.feasible { "1" } else { "0" });
            for j in 0..self.nodeless.len() {
                match pt.zeros.get(j) {
                    Some(z) => {
                        let _ = write!(out, ",{z}");
                    }
                    None => out.push(','),
                }
            }
            let _ = writeln!(out, ",{}", pt.note.replace([',', '\n'], ";"));
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario = {}", self.name);
        let nodeless: Vec<String> = self.nodeless.iter().map(|j| format!("W{j}")).collect();
        let _ = writeln!(out, "nodeless = {}", nodeless.join(", "));
        for p in &self.params {
            let _ = writeln!(out, "param {} = {}:{}:{}", p.name, p.start, p.end, p.count);
        }
        let _ = writeln!(out, "points = {}", self.points.len());
        let _ = writeln!(out, "feasible = {}", self.feasible_count());
        for (k, p) in self.params.iter().enumerate() {
            match self.bounding_range(k) {
                Some((lo, hi)) => {
                    let _ = writeln!(out, "range {} = [{lo}, {hi}]", p.name);
                }
                None => {
                    let _ = writeln!(out, "range {} = empty", p.name);
                }
            }
        }
        for (lo, hi) in self.intervals() {
            let _ = writeln!(out, "interval = [{lo}, {hi}]");
        }
        if self.feasible_count() == 0 {
            let _ = writeln!(out, "diagnosis = {}", self.diagnosis());
        }
        out
    }
}

fn grid_points(params: &[ScanParam]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for p in params {
        let vals = p.values();
        points = points
            .into_iter()
            .flat_map(|prefix| {
                vals.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    points
}

fn evaluate(raw: &RawConfig, params: &[ScanParam], values: &[f64], settings: &Settings) -> Result<ScanPoint> {
    let bindings: BTreeMap<String, f64> = params.iter().map(|p| p.name.clone()).zip(values.iter().copied()).collect();
    let sc = raw.scenario(&bindings)?;
    let h = sc.hamiltonian(&settings.overrides)?;
    let basis = match sc.basis(&h) {
        Ok(b) => b,
        Err(e @ Error::Config { .. }) => return Err(e),
        Err(e) => return Ok(ScanPoint { values: values.to_vec(), feasible: false, zeros: Vec::new(), note: e.to_string() }),
    };
    let zeros: Vec<usize> =
        sc.nodeless.iter().map(|&j| zero_locations(&basis.partial_wronskian(j, 0).remove(0)).len()).collect();
    let feasible = zeros.iter().all(|&z| z == 0);
    Ok(ScanPoint { values: values.to_vec(), feasible, zeros, note: String::new() })
}

/// Evaluates every point of the `[scan]` grid.
pub fn scan_config(raw: &RawConfig, settings: &Settings) -> Result<ScanOutcome> {
    let params = raw.scan_params()?;
    let first: BTreeMap<String, f64> = params.iter().map(|p| (p.name.clone(), p.start)).collect();
    let template = raw.scenario(&first)?;
    let mut points = Vec::new();
    for values in grid_points(&params) {
        points.push(evaluate(raw, &params, &values, settings)?);
    }
    Ok(ScanOutcome { name: template.name, params, nodeless: template.nodeless, points })
}
