//! The `run` pipeline: realizes a scenario, performs its actions and writes
//! CSV artifacts next to the report.

use std::path::Path;

use nalgebra::DMatrix;

use super::config::{Action, Overrides, Scenario};
use super::report::{Check, Report, Section};
use crate::crum::{
    build_intertwiner, chain_factorize, ensure_nonsingular, partial_wronskian_system_residual, partner_alpha_residual,
    partner_potential, superpotential_logs, JordanBasis, Side,
};
use crate::cubic::{
    check_lower_bound, coefficient_relations, factorize_cubic, g_profile, parametric_coefficients,
    verify_wronskian_identities, w1_from_g, CUBIC_TOL,
};
use crate::diffop::{gaussian_test_set, intertwining_residual, Hamiltonian, LinearDiffOperator};
use crate::error::{Error, Result};
use crate::gridfn::{identity_residual, GridFunction, C64};
use crate::schrod::{bound_states, class_k_check, CLASS_K_TAIL};
use crate::susy::{
    classify2, closure_residual, compare_spectra, compute_smatrix, conjugate_smatrix, minimize, S_MISMATCH_TOL,
};

/// Threshold for intertwining, closure and the other operator identities.
pub const RESIDUAL_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub overrides: Overrides,
    /// Multiplies every threshold in the report.
    pub tol_scale: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { overrides: Overrides::default(), tol_scale: 1.0 }
    }
}

pub fn fmt_complex(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.im > 0.0 {
        format!("{}+{}i", c.re, c.im)
    } else {
        format!("{}-{}i", c.re, -c.im)
    }
}

fn fmt_list(values: impl IntoIterator<Item = C64>) -> String {
    let parts: Vec<String> = values.into_iter().map(|c| fmt_complex(C64::new(round_sig(c.re), round_sig(c.im)))).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_matrix(m: &DMatrix<C64>) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| fmt_list(r.iter().copied()))
        .collect();
    format!("[{}]", rows.join("; "))
}

/// Rounds to eight significant digits, flushing values below `1e-9`.
fn round_sig(v: f64) -> f64 {
    if v.abs() < 1e-9 {
        return 0.0;
    }
    let digits = 7 - v.abs().log10().floor() as i32;
    let p = 10f64.powi(digits);
    (v * p).round() / p
}

/// `d^2 - 3 d + 2` when every coefficient is constant on the interior,
/// otherwise a note that the coefficients vary.
pub fn describe_operator(op: &LinearDiffOperator) -> String {
    let grid = *op.grid();
    let range = grid.interior();
    let mut consts = Vec::with_capacity(op.order() + 1);
    for c in op.coeffs() {
        let centre = c.at(grid.center());
        let spread = range.clone().fold(0.0f64, |m, i| m.max((c.at(i) - centre).norm()));
        if spread > 1e-6 * (1.0 + centre.norm()) || centre.im.abs() > 1e-9 * (1.0 + centre.norm()) {
            return format!("order {} with variable coefficients", op.order());
        }
        consts.push(round_sig(centre.re));
    }
    let mut terms: Vec<String> = Vec::new();
    for (k, &c) in consts.iter().enumerate().rev() {
        if c == 0.0 {
            continue;
        }
        let mag = c.abs();
        let sign = if c < 0.0 { "-" } else { "+" };
        let power = match k {
            0 => String::new(),
            1 => "d".to_string(),
            _ => format!("d^{k}"),
        };
        let body = match (k, mag == 1.0) {
            (0, _) => format!("{mag}"),
            (_, true) => power,
            (_, false) => format!("{mag} {power}"),
        };
        if terms.is_empty() {
            terms.push(if c < 0.0 { format!("-{body}") } else { body });
        } else {
            terms.push(format!("{sign} {body}"));
        }
    }
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" ")
    }
}

/// Everything the actions share once the basis is built.
struct Built {
    h_plus: Hamiltonian,
    h_minus: Hamiltonian,
    basis: JordanBasis,
    s: DMatrix<C64>,
    q_minus: LinearDiffOperator,
    v1: GridFunction,
    v2: GridFunction,
}

fn write_fn(dir: &Path, sec: &mut Section, name: &str, f: &GridFunction) -> Result<()> {
    f.write_csv(&dir.join(name))?;
    sec.file(name);
    Ok(())
}

fn write_op(dir: &Path, sec: &mut Section, name: &str, op: &LinearDiffOperator) -> Result<()> {
    op.write_csv(&dir.join(name))?;
    sec.file(name);
    Ok(())
}

fn build(sc: &Scenario, settings: &Settings, dir: &Path) -> Result<(Built, Section)> {
    let tol = settings.tol_scale;
    let mut sec = Section::new("build");
    let h_plus = sc.hamiltonian(&settings.overrides)?;
    let grid = *h_plus.grid();
    sec.value("grid", format!("L {} n {} margin {}", grid.half_width(), grid.n_points(), grid.margin()));
    let basis = sc.basis(&h_plus)?;
    sec.value("order", basis.dim());
    for (i, chain) in basis.chains().iter().enumerate() {
        sec.value(&format!("chain{}", i + 1), format!("lambda {} length {}", fmt_complex(chain.lambda), chain.len()));
    }
    let worst_chain = basis.chain_residuals().iter().flatten().fold(0.0f64, |m, &r| m.max(r));
    sec.value("chain_residual", format!("{worst_chain:.3e}"));

    let sm = compute_smatrix(&basis)?;
    sec.value("s_matrix", fmt_matrix(&sm.entries));
    sec.value("s_condition", format!("{:.3e}", sm.condition));
    sec.residual("s_mismatch", sm.mismatch, S_MISMATCH_TOL * tol);

    let w1 = ensure_nonsingular(&basis)?;
    write_fn(dir, &mut sec, "wronskian.csv", &w1)?;
    let q_minus = build_intertwiner(&basis, Side::Minus)?;
    let v1 = h_plus.potential().clone();
    let v2 = partner_potential(&v1, &basis)?;
    write_fn(dir, &mut sec, "v1.csv", &v1)?;
    write_fn(dir, &mut sec, "v2.csv", &v2)?;
    write_op(dir, &mut sec, "q_minus.csv", &q_minus)?;
    write_op(dir, &mut sec, "q_plus.csv", &q_minus.transpose()?)?;
    for (j, (w, _)) in superpotential_logs(&basis).iter().enumerate() {
        write_fn(dir, &mut sec, &format!("w{}.csv", j + 1), w)?;
    }

    let fc = chain_factorize(&basis)?;
    let singular: Vec<String> =
        fc.singular_flags.iter().enumerate().filter(|(_, &s)| s).map(|(k, _)| (k + 1).to_string()).collect();
    if singular.is_empty() {
        sec.value("factor_chain", "regular");
    } else {
        sec.value("factor_chain", format!("singular intermediate at levels {}", singular.join(",")));
    }
    for (k, v) in fc.intermediate_potentials.iter().enumerate() {
        write_fn(dir, &mut sec, &format!("intermediate{}.csv", k + 1), v)?;
    }
    if let Some(r) = fc.composition_residual {
        sec.residual("factor_composition", r, RESIDUAL_TOL * tol);
    }

    let h_minus = Hamiltonian::new(v2.clone())?;
    Ok((Built { h_plus, h_minus, basis, s: sm.entries, q_minus, v1, v2 }, sec))
}

fn verify(b: &Built, tol: f64) -> Result<Section> {
    let mut sec = Section::new("verify");
    let tests = gaussian_test_set(b.basis.grid());
    let q_plus = b.q_minus.transpose()?;
    sec.residual("intertwining", intertwining_residual(&b.q_minus, &b.h_plus, &b.h_minus, &tests)?, RESIDUAL_TOL * tol);
    sec.residual("intertwining_transposed", intertwining_residual(&q_plus, &b.h_minus, &b.h_plus, &tests)?, RESIDUAL_TOL * tol);
    sec.residual("closure", closure_residual(&b.q_minus, &b.h_plus, &b.h_minus, &b.s, &tests)?, RESIDUAL_TOL * tol);
    sec.residual("partner_alpha", partner_alpha_residual(&b.v1, &b.v2, &b.q_minus)?, RESIDUAL_TOL * tol);
    let ws = partial_wronskian_system_residual(&b.basis)?;
    sec.residual("partial_wronskian_system", ws.residual, RESIDUAL_TOL * tol);

    let s_plus = conjugate_smatrix(&b.q_minus, &b.h_minus)?;
    let cmp = compare_spectra(&b.s, &s_plus)?;
    sec.value("spectrum_minus", fmt_list(cmp.minus.eigenvalues()));
    sec.value("spectrum_plus", fmt_list(cmp.plus.eigenvalues()));
    sec.residual("spectrum_gap", cmp.eigenvalue_gap, RESIDUAL_TOL * tol);
    let sizes = |s: &crate::susy::JordanStructure| format!("{:?}", s.cells.iter().map(|c| c.size).collect::<Vec<_>>());
    sec.check(Check::flag(
        "jordan_cells",
        cmp.cells_match,
        format!("minus {} plus {}", sizes(&cmp.minus), sizes(&cmp.plus)),
    ));
    Ok(sec)
}

fn classify(b: &Built) -> Result<Section> {
    let mut sec = Section::new("classify");
    sec.value("class", classify2(&b.q_minus, &b.basis)?);
    Ok(sec)
}

fn minimization(b: &Built, tol: f64, dir: &Path) -> Result<Section> {
    let mut sec = Section::new("minimize");
    let m = minimize(&b.q_minus, &b.basis)?;
    sec.value("reduced_order", m.reduced_order());
    let stripped: Vec<String> = m.stripped.iter().map(|(l, k)| format!("{}^{k}", fmt_complex(*l))).collect();
    sec.value("stripped", format!("[{}]", stripped.join(", ")));
    sec.value("scale", fmt_complex(m.scale));
    sec.value("reduced", describe_operator(&m.p));
    sec.residual("minimization", m.residual, RESIDUAL_TOL * tol);
    write_op(dir, &mut sec, "minimal.csv", &m.p)?;
    Ok(sec)
}

fn factorize3(b: &Built, tol: f64, dir: &Path) -> Result<Section> {
    let mut sec = Section::new("factorize3");
    let gp = g_profile(&b.basis)?;
    sec.value("case", gp.case.number());
    sec.value("lambdas", fmt_list(gp.lambdas));
    sec.residual("branch", gp.branch_residual, CUBIC_TOL * tol);
    let range = b.basis.grid().interior();
    let disc_min = range.clone().fold(f64::INFINITY, |m, i| m.min(gp.discriminant.at(i).re));
    sec.value("discriminant_min", format!("{disc_min:.6e}"));
    write_fn(dir, &mut sec, "g.csv", &gp.g)?;
    write_fn(dir, &mut sec, "discriminant.csv", &gp.discriminant)?;
    write_fn(dir, &mut sec, "sqrt_branch.csv", &gp.sqrt_branch)?;

    match w1_from_g(&gp) {
        Ok(rec) => {
            let logs = superpotential_logs(&b.basis);
            let gap = identity_residual(&[&rec.w1, &-&logs[0].0], 1.0);
            sec.value("w1_recovery", format!("{gap:.3e} (bridged {})", rec.bridged));
        }
        Err(e) => sec.value("w1_recovery", e),
    }

    let ids = verify_wronskian_identities(&b.basis)?;
    for id in &ids.identities {
        sec.value(&format!("identity {}", id.name), format!("{:.3e}", id.residual));
    }
    sec.residual("wronskian_identities", ids.max_residual(), CUBIC_TOL * tol);

    let cr = coefficient_relations(&b.q_minus, &b.v1, &b.v2)?;
    sec.residual("coefficient_relations", cr.max_relation(), CUBIC_TOL * tol);
    sec.residual("transpose_coefficients", cr.transpose_residual, CUBIC_TOL * tol);
    let par = parametric_coefficients(&gp, &cr.g2)?;
    let gap = |a: &GridFunction, b: &GridFunction| identity_residual(&[a, &-b], 1.0);
    let para = gap(&par.v1, &b.v1).max(gap(&par.v2, &b.v2)).max(gap(&par.g1, &cr.g1)).max(gap(&par.g0, &cr.g0));
    sec.residual("parametric_form", para, CUBIC_TOL * tol);

    let bound = check_lower_bound(&gp)?;
    sec.check(Check::flag(
        "lower_bound",
        bound.ok,
        format!("min G - lambda_3 = {:.6e} (lambda_3 = {})", bound.min_gap, bound.lambda3),
    ));

    match factorize_cubic(&b.q_minus, &b.basis) {
        Ok(f) => {
            sec.check(Check::flag("factorization", true, format!("lambda_3 = {}", f.lambda3)));
            sec.value("p1", describe_operator(&f.p1));
            sec.value("k2", describe_operator(&f.k2));
            sec.value("k1", describe_operator(&f.k1));
            sec.value("p2", describe_operator(&f.p2));
            let r = &f.residuals;
            sec.residual("composition", r.composition_first.max(r.composition_second), RESIDUAL_TOL * tol);
            sec.residual("factor_intertwining", r.max_intertwining(), CUBIC_TOL * tol);
            sec.residual("w3_vs_basis", r.w3_vs_basis, CUBIC_TOL * tol);
            write_op(dir, &mut sec, "p1.csv", &f.p1)?;
            write_op(dir, &mut sec, "k2.csv", &f.k2)?;
            write_op(dir, &mut sec, "k1.csv", &f.k1)?;
            write_op(dir, &mut sec, "p2.csv", &f.p2)?;
            write_fn(dir, &mut sec, "h1.csv", &f.h1_potential)?;
            write_fn(dir, &mut sec, "h2.csv", &f.h2_potential)?;
            write_fn(dir, &mut sec, "w3.csv", &f.w3)?;
        }
        Err(Error::FactorizationHypothesis(msg)) => sec.check(Check::flag("factorization", false, msg)),
        Err(e) => return Err(e),
    }
    Ok(sec)
}

fn class_k(b: &Built) -> Result<Section> {
    let mut sec = Section::new("classk");
    for (name, v) in [("v1", &b.v1), ("v2", &b.v2)] {
        let rep = class_k_check(v, CLASS_K_TAIL)?;
        sec.value(&format!("{name}_in_class_k"), rep.in_class_k);
        for (i, d) in rep.diagnosis.iter().enumerate() {
            sec.value(&format!("{name}_diagnosis{}", i + 1), d);
        }
    }
    Ok(sec)
}

fn spectrum(b: &Built, count: usize) -> Result<Section> {
    let mut sec = Section::new("spectrum");
    for (name, h) in [("plus", &b.h_plus), ("minus", &b.h_minus)] {
        let bs = bound_states(h, count)?;
        let levels: Vec<String> = bs.states.iter().map(|(e, _)| format!("{e:.8}")).collect();
        sec.value(&format!("bound_{name}"), format!("[{}]", levels.join(", ")));
        sec.value(&format!("bound_{name}_complete"), bs.complete);
    }
    Ok(sec)
}

/// Runs every action of `sc`, writing artifacts and `report.txt` into `dir`.
pub fn run_scenario(sc: &Scenario, settings: &Settings, dir: &Path) -> Result<Report> {
    std::fs::create_dir_all(dir)?;
    let tol = settings.tol_scale;
    let mut report = Report::default();
    report.header.push(("scenario".into(), sc.name.clone()));
    report.header.push(("tol_scale".into(), format!("{tol}")));
    let actions: Vec<String> = sc.actions.iter().map(|a| a.to_string()).collect();
    report.header.push(("actions".into(), actions.join(", ")));

    let (built, sec) = build(sc, settings, dir)?;
    report.sections.push(sec);
    for action in &sc.actions {
        let sec = match action {
            Action::Build => continue,
            Action::Verify => verify(&built, tol)?,
            Action::Classify => classify(&built)?,
            Action::Minimize => minimization(&built, tol, dir)?,
            Action::Factorize3 => factorize3(&built, tol, dir)?,
            Action::ClassK => class_k(&built)?,
            Action::Spectrum => spectrum(&built, sc.bound_states)?,
        };
        report.sections.push(sec);
    }
    std::fs::write(dir.join("report.txt"), report.render())?;
    Ok(report)
}
