//! Scenario files: flat `key = value` lines, `#` comments, repeated `[chain]`
//! sections and an optional `[scan]` section. Values may contain `$name`
//! placeholders, which only `scan` fills in.
//!
//! ```text
//! name = exponential
//! potential = zero
//! actions = build, verify, factorize3
//!
//! [chain]
//! lambda = -1
//! function = exp:1
//! ```
//!
//! Within a `[chain]` the functions are listed eigenfunction first. The long
//! spellings `lambda_re`/`lambda_im`, `source`, `closed_form:` and `init:`
//! are accepted too.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::crum::{Chain, JordanBasis};
use crate::diffop::Hamiltonian;
use crate::error::{Error, Result};
use crate::gridfn::{Grid, GridFunction, C64, DEFAULT_HALF_WIDTH, DEFAULT_MARGIN, DEFAULT_POINTS};
use crate::schrod::{BuiltinPotential, ClosedForm, Source, TransformationFunctionSpec};

/// Most free parameters a scan accepts.
pub const MAX_SCAN_PARAMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Action {
    Build,
    Verify,
    Classify,
    Minimize,
    Factorize3,
    ClassK,
    Spectrum,
}

impl Action {
    pub fn parse(text: &str) -> Option<Action> {
        Some(match text {
            "build" => Action::Build,
            "verify" => Action::Verify,
            "classify" => Action::Classify,
            "minimize" => Action::Minimize,
            "factorize3" => Action::Factorize3,
            "classk" => Action::ClassK,
            "spectrum" => Action::Spectrum,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Build => "build",
            Action::Verify => "verify",
            Action::Classify => "classify",
            Action::Minimize => "minimize",
            Action::Factorize3 => "factorize3",
            Action::ClassK => "classk",
            Action::Spectrum => "spectrum",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSource {
    Builtin(BuiltinPotential),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub lambda: C64,
    /// Eigenfunction first, then associated functions.
    pub functions: Vec<Source>,
    pub scale: C64,
    pub line: usize,
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub grid_n: Option<usize>,
    pub grid_l: Option<f64>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub potential: PotentialSource,
    pub grid_l: f64,
    pub grid_n: usize,
    pub margin: f64,
    pub chains: Vec<ChainSpec>,
    pub actions: Vec<Action>,
    /// Bound states requested by `spectrum`.
    pub bound_states: usize,
    /// Partial Wronskians `W_j` that `scan` requires to be nodeless.
    pub nodeless: Vec<usize>,
}

/// A scanned parameter: `count` evenly spaced values on `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanParam {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl ScanParam {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

/// Sections of a scenario file before placeholders are filled in.
#[derive(Debug, Clone)]
pub struct RawConfig {
    top: Vec<Entry>,
    chains: Vec<(usize, Vec<Entry>)>,
    scan: Vec<Entry>,
    base_dir: PathBuf,
}

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

impl RawConfig {
    pub fn read(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RawConfig::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<RawConfig> {
        enum Section {
            Top,
            Chain,
            Scan,
        }
        let mut raw = RawConfig { top: Vec::new(), chains: Vec::new(), scan: Vec::new(), base_dir: base_dir.to_path_buf() };
        let mut section = Section::Top;
        let mut seen_scan = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                match content {
                    "[chain]" => {
                        raw.chains.push((line_no, Vec::new()));
                        section = Section::Chain;
                    }
                    "[scan]" => {
                        if seen_scan {
                            return Err(config_err(line_no, "more than one [scan] section"));
                        }
                        seen_scan = true;
                        section = Section::Scan;
                    }
                    other => return Err(config_err(line_no, format!("unknown section {other}"))),
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(config_err(line_no, format!("expected key = value, found '{content}'")));
            };
            let entry = Entry { line: line_no, key: key.trim().to_string(), value: value.trim().to_string() };
            if entry.key.is_empty() {
                return Err(config_err(line_no, "empty key"));
            }
            match section {
                Section::Top => raw.top.push(entry),
                Section::Chain => raw.chains.last_mut().expect("chain section open").1.push(entry),
                Section::Scan => raw.scan.push(entry),
            }
        }
        Ok(raw)
    }

    pub fn scan_params(&self) -> Result<Vec<ScanParam>> {
        let mut out: Vec<ScanParam> = Vec::new();
        for e in &self.scan {
            if out.iter().any(|p| p.name == e.key) {
                return Err(config_err(e.line, format!("scan parameter {} given twice", e.key)));
            }
            let parts: Vec<&str> = e.value.split(':').map(str::trim).collect();
            let bad = || config_err(e.line, format!("scan range for {} must be start:end:count", e.key));
            if parts.len() != 3 {
                return Err(bad());
            }
            let start: f64 = parts[0].parse().map_err(|_| bad())?;
            let end: f64 = parts[1].parse().map_err(|_| bad())?;
            let count: usize = parts[2].parse().map_err(|_| bad())?;
            if count == 0 || !start.is_finite() || !end.is_finite() || end < start {
                return Err(bad());
            }
            out.push(ScanParam { name: e.key.clone(), start, end, count });
        }
        if out.len() > MAX_SCAN_PARAMS {
            return Err(config_err(self.scan[MAX_SCAN_PARAMS].line, format!("at most {MAX_SCAN_PARAMS} scan parameters")));
        }
        Ok(out)
    }

    /// Builds the scenario with `$name` placeholders replaced by `bindings`.
    pub fn scenario(&self, bindings: &BTreeMap<String, f64>) -> Result<Scenario> {
        let fill = |e: &Entry| substitute(e, bindings);
        let mut sc = Scenario {
            name: "scenario".into(),
            potential: PotentialSource::Builtin(BuiltinPotential::Zero),
            grid_l: DEFAULT_HALF_WIDTH,
            grid_n: DEFAULT_POINTS,
            margin: DEFAULT_MARGIN,
            chains: Vec::new(),
            actions: Vec::new(),
            bound_states: 4,
            nodeless: vec![1],
        };
        let mut seen: Vec<&str> = Vec::new();
        for e in &self.top {
            if seen.contains(&e.key.as_str()) {
                return Err(config_err(e.line, format!("key {} given twice", e.key)));
            }
            seen.push(&e.key);
            let v = fill(e)?;
            match e.key.as_str() {
                "name" => {
                    if v.is_empty() || !v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                        return Err(config_err(e.line, "name must be nonempty and use [A-Za-z0-9_-]"));
                    }
                    sc.name = v;
                }
                "potential" => {
                    sc.potential = match v.strip_prefix("csv:") {
                        Some(p) => PotentialSource::Csv(self.base_dir.join(p.trim())),
                        None => PotentialSource::Builtin(
                            BuiltinPotential::parse(&v).map_err(|err| config_err(e.line, err.to_string()))?,
                        ),
                    }
                }
                "grid_l" => sc.grid_l = parse_num(e.line, "grid_l", &v)?,
                "grid_n" => sc.grid_n = parse_num(e.line, "grid_n", &v)?,
                "margin" => sc.margin = parse_num(e.line, "margin", &v)?,
                "bound_states" => sc.bound_states = parse_num(e.line, "bound_states", &v)?,
                "actions" => {
                    for word in v.split(',').map(str::trim).filter(|w| !w.is_empty()) {
                        let a = Action::parse(word).ok_or_else(|| config_err(e.line, format!("unknown action '{word}'")))?;
                        if !sc.actions.contains(&a) {
                            sc.actions.push(a);
                        }
                    }
                }
                "nodeless" => {
                    sc.nodeless = v
                        .split(',')
                        .map(|w| parse_num::<usize>(e.line, "nodeless", w.trim()))
                        .collect::<Result<_>>()?;
                }
                other => return Err(config_err(e.line, format!("unknown key '{other}'"))),
            }
        }
        for (line, entries) in &self.chains {
            sc.chains.push(parse_chain(*line, entries, bindings)?);
        }
        sc.actions.sort();
        let first_line = self.chains.first().map(|c| c.0).unwrap_or(1);
        if sc.chains.is_empty() {
            return Err(config_err(first_line, "no [chain] section"));
        }
        let order: usize = sc.chains.iter().map(|c| c.functions.len()).sum();
        if order > crate::crum::MAX_ORDER {
            return Err(config_err(first_line, format!("chains total order {order}, maximum is {}", crate::crum::MAX_ORDER)));
        }
        let action_line = self.top.iter().find(|e| e.key == "actions").map(|e| e.line).unwrap_or(1);
        if sc.actions.contains(&Action::Factorize3) && order != 3 {
            return Err(config_err(action_line, format!("factorize3 requires order 3 (chains give {order})")));
        }
        if sc.actions.contains(&Action::Classify) && order != 2 {
            return Err(config_err(action_line, format!("classify requires order 2 (chains give {order})")));
        }
        if let Some(&j) = sc.nodeless.iter().find(|&&j| j == 0 || j > order) {
            return Err(config_err(1, format!("nodeless index {j} outside 1..={order}")));
        }
        Ok(sc)
    }
}

fn substitute(e: &Entry, bindings: &BTreeMap<String, f64>) -> Result<String> {
    let mut out = String::with_capacity(e.value.len());
    let mut rest = e.value.as_str();
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        let len = tail.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(tail.len());
        let name = &tail[..len];
        if name.is_empty() {
            return Err(config_err(e.line, "'$' without a parameter name"));
        }
        let v = bindings.get(name).ok_or_else(|| {
            config_err(e.line, format!("unresolved placeholder ${name} (only scan fills placeholders)"))
        })?;
        out.push_str(&format!("{v:?}"));
        rest = &tail[len..];
    }
    out.push_str(rest);
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config_err(line, format!("{key}: cannot parse '{v}'")))
}

fn parse_complex(line: usize, key: &str, v: &str) -> Result<C64> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [re] => Ok(C64::new(parse_num(line, key, re)?, 0.0)),
        [re, im] => Ok(C64::new(parse_num(line, key, re)?, parse_num(line, key, im)?)),
        _ => Err(config_err(line, format!("{key}: expected 're' or 're,im'"))),
    }
}

/// `initial:v,s` or `initial:v_re,v_im,s_re,s_im` (also spelled `init:`);
/// anything else is a closed form, optionally prefixed `closed_form:`.
fn parse_source(line: usize, v: &str) -> Result<Source> {
    let v = v.strip_prefix("closed_form:").unwrap_or(v);
    if let Some(params) = v.strip_prefix("initial:").or_else(|| v.strip_prefix("init:")) {
        let nums: Vec<f64> = params
            .split(',')
            .map(|p| parse_num(line, "initial", p.trim()))
            .collect::<Result<_>>()?;
        return match nums.as_slice() {
            [a, b] => Ok(Source::Initial { value: C64::new(*a, 0.0), slope: C64::new(*b, 0.0) }),
            [a, b, c, d] => Ok(Source::Initial { value: C64::new(*a, *b), slope: C64::new(*c, *d) }),
            _ => Err(config_err(line, "initial: expected value,slope or four numbers")),
        };
    }
    ClosedForm::parse(v).map(Source::ClosedForm).map_err(|e| config_err(line, e.to_string()))
}

fn parse_chain(line: usize, entries: &[Entry], bindings: &BTreeMap<String, f64>) -> Result<ChainSpec> {
    let mut lambda = None;
    let mut split = (None, None);
    let mut scale = C64::new(1.0, 0.0);
    let mut functions = Vec::new();
    for e in entries {
        let v = substitute(e, bindings)?;
        match e.key.as_str() {
            "lambda" => lambda = Some(parse_complex(e.line, "lambda", &v)?),
            "lambda_re" => split.0 = Some(parse_num::<f64>(e.line, "lambda_re", &v)?),
            "lambda_im" => split.1 = Some(parse_num::<f64>(e.line, "lambda_im", &v)?),
            "scale" => scale = parse_complex(e.line, "scale", &v)?,
            "function" | "source" => functions.push(parse_source(e.line, &v)?),
            other => return Err(config_err(e.line, format!("unknown chain key '{other}'"))),
        }
    }
    let lambda = match (lambda, split) {
        (Some(_), (Some(_), _) | (_, Some(_))) => {
            return Err(config_err(line, "give either lambda or lambda_re/lambda_im"));
        }
        (Some(l), _) => l,
        (None, (Some(re), im)) => C64::new(re, im.unwrap_or(0.0)),
        (None, (None, Some(_))) => return Err(config_err(line, "lambda_im without lambda_re")),
        (None, (None, None)) => return Err(config_err(line, "chain without lambda")),
    };
    if functions.is_empty() {
        return Err(config_err(line, "chain without function"));
    }
    Ok(ChainSpec { lambda, functions, scale, line })
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        RawConfig::parse(text, Path::new("."))?.scenario(&BTreeMap::new())
    }

    pub fn order(&self) -> usize {
        self.chains.iter().map(|c| c.functions.len()).sum()
    }

    /// Sampled base potential, with command-line grid overrides applied to
    /// builtin potentials.
    pub fn base_potential(&self, ov: &Overrides) -> Result<GridFunction> {
        match &self.potential {
            PotentialSource::Builtin(p) => {
                let grid = Grid::new(ov.grid_l.unwrap_or(self.grid_l), ov.grid_n.unwrap_or(self.grid_n))?
                    .with_margin(ov.margin.unwrap_or(self.margin))?;
                Ok(p.sample(&grid))
            }
            PotentialSource::Csv(path) => {
                if ov.grid_l.is_some() || ov.grid_n.is_some() {
                    return Err(Error::Precondition("grid flags cannot resample a potential read from CSV".into()));
                }
                let v = GridFunction::read_csv(path)?;
                let grid = v.grid().with_margin(ov.margin.unwrap_or(self.margin))?;
                GridFunction::new(grid, v.into_values())
            }
        }
    }

    pub fn hamiltonian(&self, ov: &Overrides) -> Result<Hamiltonian> {
        Hamiltonian::new(self.base_potential(ov)?)
    }

    /// Realizes every chain on `h` and validates the resulting basis.
    pub fn basis(&self, h: &Hamiltonian) -> Result<JordanBasis> {
        let mut chains = Vec::with_capacity(self.chains.len());
        for spec in &self.chains {
            let mut functions = Vec::with_capacity(spec.functions.len());
            for (i, source) in spec.functions.iter().enumerate() {
                let mut tf = TransformationFunctionSpec::new(spec.lambda, i, source.clone());
                tf.scale = spec.scale;
                let lower = functions.last().map(|f: &crate::schrod::TransformationFunction| &f.value);
                let f = tf.realize(h, lower)?;
                functions.push(f);
            }
            chains.push(Chain::new(spec.lambda, functions));
        }
        JordanBasis::new(h, chains)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLITON: &str = "name = one_soliton\npotential = zero\nactions = verify, build\n\n[chain]\nlambda = -1\nfunction = cosh:1\n";

    #[test]
    fn parses_sections_and_sorts_actions() {
        let sc = Scenario::parse(SOLITON).unwrap();
        assert_eq!(sc.name, "one_soliton");
        assert_eq!(sc.actions, vec![Action::Build, Action::Verify]);
        assert_eq!(sc.order(), 1);
        assert_eq!(sc.chains[0].lambda, C64::new(-1.0, 0.0));
        assert_eq!(sc.grid_n, DEFAULT_POINTS);
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let err = Scenario::parse("name = x\n[chain]\nlambda = -1\nfunction = wobble:3\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 4, .. }), "{err}");
        let err = Scenario::parse("name = x\ncolour = red\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = Scenario::parse("name = x\njust words\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
    }

    #[test]
    fn factorize3_needs_order_three() {
        let text = "actions = factorize3\n[chain]\nlambda = -1\nfunction = exp:1\n[chain]\nlambda = -4\nfunction = exp:2\n";
        let err = Scenario::parse(text).unwrap_err();
        assert!(err.to_string().contains("factorize3 requires order 3"), "{err}");
    }

    #[test]
    fn placeholders_need_bindings() {
        let text = "[chain]\nlambda = 3\nfunction = hermite:1\nfunction = initial:$a,$b\n[scan]\na = -1:1:3\nb = 0:0:1\n";
        let raw = RawConfig::parse(text, Path::new(".")).unwrap();
        assert!(raw.scenario(&BTreeMap::new()).is_err());
        let params = raw.scan_params().unwrap();
        assert_eq!(params.len(), 2);
        assert_eq!(params[0].values(), vec![-1.0, 0.0, 1.0]);
        let bind: BTreeMap<String, f64> = [("a".to_string(), 0.5), ("b".to_string(), -2.0)].into();
        let sc = raw.scenario(&bind).unwrap();
        assert_eq!(sc.chains[0].functions[1], Source::Initial { value: C64::new(0.5, 0.0), slope: C64::new(-2.0, 0.0) });
    }

    #[test]
    fn long_field_names() {
        let text = "[chain]\nlambda_re = 0\nlambda_im = -2\nsource = closed_form:exp:1,1\n[chain]\nlambda_re = 3\nsource = init:1,0\n";
        let sc = Scenario::parse(text).unwrap();
        assert_eq!(sc.chains[0].lambda, C64::new(0.0, -2.0));
        assert_eq!(sc.chains[1].functions[0], Source::Initial { value: C64::new(1.0, 0.0), slope: C64::new(0.0, 0.0) });
        assert!(Scenario::parse("[chain]\nlambda = 1\nlambda_re = 1\nfunction = exp:1\n").is_err());
    }

    #[test]
    fn order_limit_enforced() {
        let mut text = String::new();
        for k in 1..=7 {
            text.push_str(&format!("[chain]\nlambda = {}\nfunction = exp:{k}\n", -((k * k) as f64)));
        }
        assert!(Scenario::parse(&text).is_err());
    }
}
