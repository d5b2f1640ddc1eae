//! Plain-text run reports: `key = value` entries, one line per check and the
//! list of files written, grouped by action.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    /// Passes when `value` is finite and at most `threshold`.
    pub fn residual(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.to_string(),
            detail: format!("{value:.3e} <= {threshold:.1e}"),
            pass: value.is_finite() && value <= threshold,
        }
    }

    pub fn flag(name: &str, pass: bool, detail: impl Into<String>) -> Check {
        Check { name: name.to_string(), detail: detail.into(), pass }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Line {
    Value(String, String),
    Check(Check),
    File(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub title: String,
    pub lines: Vec<Line>,
}

impl Section {
    pub fn new(title: &str) -> Section {
        Section { title: title.to_string(), lines: Vec::new() }
    }

    pub fn value(&mut self, key: &str, value: impl ToString) {
        self.lines.push(Line::Value(key.to_string(), value.to_string()));
    }

    pub fn check(&mut self, check: Check) {
        self.lines.push(Line::Check(check));
    }

    pub fn residual(&mut self, name: &str, value: f64, threshold: f64) {
        self.check(Check::residual(name, value, threshold));
    }

    pub fn file(&mut self, name: &str) {
        self.lines.push(Line::File(name.to_string()));
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub header: Vec<(String, String)>,
    pub sections: Vec<Section>,
}

impl Report {
    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.sections.iter().flat_map(|s| &s.lines).filter_map(|l| match l {
            Line::Check(c) => Some(c),
            _ => None,
        })
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks().filter(|c| !c.pass).collect()
    }

    pub fn passed(&self) -> bool {
        self.checks().all(|c| c.pass)
    }

    pub fn value(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.iter().filter(|s| s.title == section).flat_map(|s| &s.lines).find_map(|l| match l {
            Line::Value(k, v) if k == key => Some(v.as_str()),
            _ => None,
        })
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k} = {v}");
        }
        for s in &self.sections {
            let _ = writeln!(out, "\n[{}]", s.title);
            for line in &s.lines {
                let _ = match line {
                    Line::Value(k, v) => writeln!(out, "{k} = {v}"),
                    Line::Check(c) => {
                        writeln!(out, "check {} {} {}", c.name, c.detail, if c.pass { "PASS" } else { "FAIL" })
                    }
                    Line::File(f) => writeln!(out, "file {f}"),
                };
            }
        }
        let total = self.checks().count();
        let failed = self.failures().len();
        let verdict = if failed == 0 { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "\nresult = {verdict} ({} of {total} checks passed)", total - failed);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_checks_reject_nan() {
        assert!(Check::residual("a", 1e-7, 1e-6).pass);
        assert!(!Check::residual("a", 2e-6, 1e-6).pass);
        assert!(!Check::residual("a", f64::NAN, 1.0).pass);
    }

    #[test]
    fn render_lists_checks_and_verdict() {
        let mut s = Section::new("verify");
        s.value("order", 2);
        s.residual("intertwining", 3e-9, 1e-5);
        s.check(Check::flag("cells_match", false, "minus [2] plus [1,1]"));
        s.file("v2.csv");
        let r = Report { header: vec![("scenario".into(), "demo".into())], sections: vec![s] };
        let text = r.render();
        assert!(text.contains("check intertwining 3.000e-9 <= 1.0e-5 PASS"));
        assert!(text.contains("check cells_match minus [2] plus [1,1] FAIL"));
        assert!(text.ends_with("result = FAIL (1 of 2 checks passed)\n"));
        assert!(!r.passed());
        assert_eq!(r.value("verify", "order"), Some("2"));
    }
}
