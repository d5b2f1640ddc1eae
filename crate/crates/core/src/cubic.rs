//! Third-order intertwiners: the parameterization function `G`, the branch of
//! `sqrt((G')^2 + 4 P_3(G))` carried by the basis, the recovered logarithmic
//! derivatives `w_j`, Wronskian identity suites, coefficient relations and the
//! splitting `q_3^- = k_2^- p_1^- = k_1^- p_2^-`.

use std::fmt;

use crate::crum::{partner_potential, superpotential_logs, Chain, JordanBasis};
use crate::diffop::{
    coefficientwise_difference, gaussian_test_set, intertwining_residual, operator_difference, Hamiltonian,
    LinearDiffOperator,
};
use crate::error::{Error, Result};
use crate::gridfn::{fd_weights, identity_residual, max_abs, pointwise_identity_residual, Grid, GridFunction, C64, TAU_REAL};

/// Tolerance of the identity suites and round trips.
pub const CUBIC_TOL: f64 = 1e-5;
/// Samples where `|sqrt| < SQRT_ZERO_FRACTION * max|sqrt|` are bridged by
/// interpolation when recovering `w_1`.
pub const SQRT_ZERO_FRACTION: f64 = 1e-3;
const IDENTITY_FLOOR: f64 = 1e-6;
const INTERP_SIDE: usize = 4;

/// Jordan structure of a third-order kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubicCase {
    /// Three cells of size one.
    ThreeCells,
    /// A cell of size one and a cell of size two.
    CellAndPair,
    /// One cell of size three.
    SingleCell,
}

impl CubicCase {
    pub fn number(self) -> u8 {
        match self {
            CubicCase::ThreeCells => 1,
            CubicCase::CellAndPair => 2,
            CubicCase::SingleCell => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(CubicCase::ThreeCells),
            2 => Ok(CubicCase::CellAndPair),
            3 => Ok(CubicCase::SingleCell),
            _ => Err(Error::CaseMismatch(format!("no Jordan case {n}"))),
        }
    }
}

impl fmt::Display for CubicCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            CubicCase::ThreeCells => "three cells of size 1",
            CubicCase::CellAndPair => "cells of size 1 and 2",
            CubicCase::SingleCell => "one cell of size 3",
        };
        write!(f, "case {} ({text})", self.number())
    }
}

pub fn detect_case(basis: &JordanBasis) -> Result<CubicCase> {
    if basis.dim() != 3 {
        return Err(Error::CaseMismatch(format!("basis has order {}, expected 3", basis.dim())));
    }
    let mut lens: Vec<usize> = basis.chains().iter().map(Chain::len).collect();
    lens.sort_unstable();
    match lens.as_slice() {
        [1, 1, 1] => Ok(CubicCase::ThreeCells),
        [1, 2] => Ok(CubicCase::CellAndPair),
        [3] => Ok(CubicCase::SingleCell),
        other => Err(Error::CaseMismatch(format!("chain lengths {other:?}"))),
    }
}

/// The basis renumbered so that a size-two cell comes last, as the
/// identities of that case assume. Other cases are returned unchanged.
pub fn canonical_cubic_order(basis: &JordanBasis) -> Result<JordanBasis> {
    let case = detect_case(basis)?;
    if case == CubicCase::CellAndPair && basis.chains()[0].len() == 2 {
        let chains = vec![basis.chains()[1].clone(), basis.chains()[0].clone()];
        return JordanBasis::new(&basis.hamiltonian(), chains);
    }
    Ok(basis.clone())
}

fn pointwise(grid: Grid, f: impl Fn(usize) -> C64) -> GridFunction {
    GridFunction::new(grid, (0..grid.n_points()).map(f).collect()).expect("length matches grid")
}

fn lambda_triple(basis: &JordanBasis) -> [C64; 3] {
    [basis.lambda(0), basis.lambda(1), basis.lambda(2)]
}

fn p3(l: &[C64; 3], z: C64) -> C64 {
    (z - l[0]) * (z - l[1]) * (z - l[2])
}

fn p3_prime(l: &[C64; 3], z: C64) -> C64 {
    (z - l[1]) * (z - l[2]) + (z - l[0]) * (z - l[2]) + (z - l[0]) * (z - l[1])
}

fn interior_max(f: &GridFunction) -> f64 {
    f.interior_max_abs()
}

/// `G`, its derivative and the branch of the square root fixed by the basis.
#[derive(Debug, Clone)]
pub struct GProfile {
    pub case: CubicCase,
    pub g: GridFunction,
    pub dg: GridFunction,
    /// `(lambda_1, lambda_2, lambda_3)` in the flat order of the basis.
    pub lambdas: [C64; 3],
    pub sqrt_branch: GridFunction,
    /// `(G')^2 + 4 P_3(G)`.
    pub discriminant: GridFunction,
    /// Interior `|sqrt^2 - discriminant|` over `max(|discriminant|, tau_disc)`.
    pub branch_residual: f64,
}

impl GProfile {
    pub fn lambda_sum(&self) -> C64 {
        self.lambdas.iter().sum()
    }

    /// Absolute floor below which the discriminant counts as zero.
    pub fn disc_floor(&self) -> f64 {
        discriminant_floor(&self.g)
    }

    pub fn p3_of_g(&self) -> GridFunction {
        self.g.map(|z| p3(&self.lambdas, z))
    }

    /// Smallest real eigenvalue, if any eigenvalue is real.
    pub fn minimal_real_lambda(&self) -> Option<f64> {
        let scale = self.lambdas.iter().fold(1.0f64, |m, l| m.max(l.norm()));
        self.lambdas
            .iter()
            .filter(|l| l.im.abs() <= 1e-12 * scale)
            .map(|l| l.re)
            .min_by(f64::total_cmp)
    }
}

/// `tau_disc = 1e-8 (1 + |G|^4)`.
pub fn discriminant_floor(g: &GridFunction) -> f64 {
    1e-8 * (1.0 + interior_max(g).powi(4))
}

/// `G = [w_1' + w_1^2 - V_1 + lambda_1 + lambda_2 + lambda_3] / 2`, with `w_1'`
/// by finite differences.
pub fn g_function(w1: &GridFunction, v1: &GridFunction, lambdas: [C64; 3]) -> Result<GridFunction> {
    v1.same_grid(w1)?;
    let dw1 = w1.derivative(1)?;
    let sum: C64 = lambdas.iter().sum();
    Ok(pointwise(*w1.grid(), |i| 0.5 * (dw1.at(i) + w1.at(i) * w1.at(i) - v1.at(i) + sum)))
}

/// `G` and `G'` from the jet of `W_1`: `G = (W_1''/W_1 - V_1 + sum)/2`.
fn g_from_jets(basis: &JordanBasis) -> Result<(GridFunction, GridFunction)> {
    let w = basis.partial_wronskian(1, 3);
    let v = basis.hamiltonian().potential_derivatives(1)?;
    let sum: C64 = basis.lambdas().iter().sum();
    let grid = *basis.grid();
    let g = pointwise(grid, |i| 0.5 * (w[2].at(i) / w[0].at(i) - v[0].at(i) + sum));
    let dg = pointwise(grid, |i| {
        let (r1, r2, r3) = (w[1].at(i) / w[0].at(i), w[2].at(i) / w[0].at(i), w[3].at(i) / w[0].at(i));
        0.5 * (r3 - r1 * r2 - v[1].at(i))
    });
    Ok((g, dg))
}

fn branch_from(basis: &JordanBasis, case: CubicCase, dg: &GridFunction) -> GridFunction {
    let l = lambda_triple(basis);
    let phi: Vec<&GridFunction> = (0..3).map(|j| basis.function(j)).collect();
    let w1 = basis.partial_wronskian(1, 0).remove(0);
    let grid = *basis.grid();
    match case {
        CubicCase::ThreeCells => {
            let prod = 2.0 * (l[0] - l[1]) * (l[1] - l[2]) * (l[2] - l[0]);
            pointwise(grid, |i| prod * phi[0].at(i) * phi[1].at(i) * phi[2].at(i) / w1.at(i) - dg.at(i))
        }
        CubicCase::CellAndPair => {
            let d = l[0] - l[1];
            pointwise(grid, |i| {
                -2.0 * d * d * phi[0].at(i) * phi[2].at(i) * phi[2].at(i) / w1.at(i) - dg.at(i)
            })
        }
        CubicCase::SingleCell => pointwise(grid, |i| -2.0 * phi[2].at(i).powi(3) / w1.at(i) - dg.at(i)),
    }
}

/// The branch of `sqrt((G')^2 + 4 P_3(G))` carried by the basis, read off the
/// identity for `G' + sqrt` of the given case.
pub fn branch_sqrt(basis: &JordanBasis, case: CubicCase) -> Result<GridFunction> {
    let found = detect_case(basis)?;
    if found != case {
        return Err(Error::CaseMismatch(format!("requested {case}, basis has {found}")));
    }
    let ordered = canonical_cubic_order(basis)?;
    let (_, dg) = g_from_jets(&ordered)?;
    Ok(branch_from(&ordered, case, &dg))
}

/// Full profile of a third-order basis: `G`, `G'`, the branch and the
/// discriminant, with the nonnegativity and branch checks applied.
pub fn g_profile(basis: &JordanBasis) -> Result<GProfile> {
    crate::crum::ensure_nonsingular(basis)?;
    let case = detect_case(basis)?;
    let ordered = canonical_cubic_order(basis)?;
    let (g, dg) = g_from_jets(basis)?;
    let sqrt_branch = branch_from(&ordered, case, &dg);
    let lambdas = lambda_triple(basis);
    let discriminant = pointwise(*g.grid(), |i| dg.at(i) * dg.at(i) + 4.0 * p3(&lambdas, g.at(i)));
    let floor = discriminant_floor(&g);
    let range = g.grid().interior();
    let min_disc = range.clone().map(|i| discriminant.at(i).re).fold(f64::INFINITY, f64::min);
    if min_disc < -floor {
        return Err(Error::DiscriminantNegative(min_disc));
    }
    let scale = interior_max(&discriminant).max(floor);
    let mismatch = range.fold(0.0f64, |m, i| m.max((sqrt_branch.at(i).powi(2) - discriminant.at(i)).norm()));
    Ok(GProfile { case, g, dg, lambdas, sqrt_branch, discriminant, branch_residual: mismatch / scale })
}

/// `w_3 = w_1 + (G' - sqrt) / (2 (G - lambda_3))` and
/// `w_2 = (G' + sqrt) / (2 (G - lambda_1))`; returns `(w_2, w_3)`.
pub fn w_from_g(gp: &GProfile, w1: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    gp.g.same_grid(w1)?;
    let threshold = 1e-8 * (1.0 + interior_max(&gp.g));
    for &lambda in [gp.lambdas[2], gp.lambdas[0]].iter() {
        let closest = gp.g.values().iter().map(|&v| (v - lambda).norm()).fold(f64::INFINITY, f64::min);
        if closest <= threshold {
            return Err(Error::GTouchesEigenvalue { lambda: lambda.re });
        }
    }
    let grid = *w1.grid();
    let (l1, l3) = (gp.lambdas[0], gp.lambdas[2]);
    let w3 = pointwise(grid, |i| {
        w1.at(i) + (gp.dg.at(i) - gp.sqrt_branch.at(i)) / (2.0 * (gp.g.at(i) - l3))
    });
    let w2 = pointwise(grid, |i| (gp.dg.at(i) + gp.sqrt_branch.at(i)) / (2.0 * (gp.g.at(i) - l1)));
    Ok((w2, w3))
}

/// Outcome of [`w1_from_g`].
#[derive(Debug, Clone)]
pub struct W1Recovery {
    pub w1: GridFunction,
    /// The discriminant vanishes identically while `G` varies: `w_1 = 0` and
    /// the two potentials coincide.
    pub identical_potentials: bool,
    /// Samples bridged by interpolation across isolated zeros of the root.
    pub bridged: usize,
}

/// `w_1 = (G'' + 2 P_3'(G)) / (2 sqrt)`. Isolated zeros of the root are
/// bridged by polynomial interpolation once the numerator is seen to vanish
/// with it.
pub fn w1_from_g(gp: &GProfile) -> Result<W1Recovery> {
    let grid = *gp.g.grid();
    let floor = gp.disc_floor();
    if interior_max(&gp.discriminant) <= floor {
        if interior_max(&gp.dg) <= 1e-8 * (1.0 + interior_max(&gp.g)) {
            return Err(Error::W1Singular("discriminant vanishes identically and G is constant (strippable)".into()));
        }
        return Ok(W1Recovery { w1: GridFunction::zeros(grid), identical_potentials: true, bridged: 0 });
    }
    let ddg = gp.dg.derivative(1)?;
    let num = pointwise(grid, |i| ddg.at(i) + 2.0 * p3_prime(&gp.lambdas, gp.g.at(i)));
    let root = &gp.sqrt_branch;
    let cut = SQRT_ZERO_FRACTION * interior_max(root);
    let n = grid.n_points();
    let small: Vec<bool> = (0..n).map(|i| root.at(i).norm() < cut).collect();
    let mut w1: Vec<C64> = (0..n).map(|i| if small[i] { C64::new(0.0, 0.0) } else { num.at(i) / (2.0 * root.at(i)) }).collect();
    let interior = grid.interior();
    let mut bridged = 0;
    let mut i = 0;
    while i < n {
        if !small[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && small[i] {
            i += 1;
        }
        let end = i;
        let left: Vec<usize> = (0..start).rev().filter(|&j| !small[j]).take(INTERP_SIDE).collect();
        let right: Vec<usize> = (end..n).filter(|&j| !small[j]).take(INTERP_SIDE).collect();
        let touches_interior = end > interior.start && start < interior.end;
        if left.len() < INTERP_SIDE || right.len() < INTERP_SIDE {
            if touches_interior {
                return Err(Error::W1Singular(format!("root vanishes up to the window edge near x = {:.3}", grid.x(start))));
            }
            continue;
        }
        let nodes: Vec<usize> = left.iter().rev().chain(right.iter()).copied().collect();
        let edge = nodes.iter().fold(0.0f64, |m, &j| m.max(w1[j].norm()));
        let run_num = (start..end).fold(0.0f64, |m, j| m.max(num.at(j).norm()));
        let run_root = (start..end).fold(0.0f64, |m, j| m.max(root.at(j).norm())).max(cut);
        if run_num > 20.0 * (1.0 + edge) * run_root {
            return Err(Error::W1Singular(format!(
                "root vanishes near x = {:.3} where the numerator does not",
                grid.x((start + end) / 2)
            )));
        }
        let xs: Vec<f64> = nodes.iter().map(|&j| grid.x(j)).collect();
        for j in start..end {
            let weights = fd_weights(grid.x(j), &xs, 0);
            w1[j] = nodes.iter().zip(&weights).map(|(&k, w)| w1[k] * w[0]).sum();
        }
        bridged += end - start;
    }
    Ok(W1Recovery { w1: GridFunction::new(grid, w1)?, identical_potentials: false, bridged })
}

/// One evaluated identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResidual {
    pub name: String,
    pub residual: f64,
}

/// Residuals of the Wronskian identities of the detected case.
#[derive(Debug, Clone)]
pub struct WronskianIdentityReport {
    pub case: CubicCase,
    pub identities: Vec<IdentityResidual>,
}

impl WronskianIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.identities.iter().fold(0.0f64, |m, r| m.max(r.residual))
    }
}

struct IdentityData {
    grid: Grid,
    phi: Vec<[GridFunction; 3]>,
    w1: [GridFunction; 2],
    l: [C64; 3],
    g: GridFunction,
    dg: GridFunction,
    root: GridFunction,
}

impl IdentityData {
    /// `W_kl = phi_k' phi_l - phi_k phi_l'` and its derivative.
    fn wkl(&self, k: usize, l: usize) -> (GridFunction, GridFunction) {
        let (a, b) = (&self.phi[k], &self.phi[l]);
        (
            pointwise(self.grid, |i| a[1].at(i) * b[0].at(i) - a[0].at(i) * b[1].at(i)),
            pointwise(self.grid, |i| a[2].at(i) * b[0].at(i) - a[0].at(i) * b[2].at(i)),
        )
    }

    /// `(phi_j / W_1)'`.
    fn ratio_derivative(&self, j: usize) -> GridFunction {
        let (p, w) = (&self.phi[j], &self.w1);
        pointwise(self.grid, |i| p[1].at(i) / w[0].at(i) - p[0].at(i) * w[1].at(i) / w[0].at(i).powi(2))
    }

    fn push(&self, out: &mut Vec<IdentityResidual>, name: String, lhs: GridFunction, rhs: GridFunction) {
        let neg = -&rhs;
        out.push(IdentityResidual { name, residual: pointwise_identity_residual(&[&lhs, &neg], IDENTITY_FLOOR) });
    }

    fn g_minus(&self, lambda: C64) -> GridFunction {
        self.g.map(|v| v - lambda)
    }

    fn branch_sides(&self) -> (GridFunction, GridFunction) {
        (&self.dg + &self.root, &self.dg - &self.root)
    }
}

/// Evaluates every Wronskian identity of the detected Jordan case: derivatives
/// of two-row Wronskians, derivatives of `phi_j / W_1`, the products for
/// `G - lambda_j` and both sides of the branch.
pub fn verify_wronskian_identities(basis: &JordanBasis) -> Result<WronskianIdentityReport> {
    let case = detect_case(basis)?;
    let gp = g_profile(basis)?;
    let ordered = canonical_cubic_order(basis)?;
    let grid = *basis.grid();
    let w1 = ordered.partial_wronskian(1, 1);
    let data = IdentityData {
        grid,
        phi: (0..3)
            .map(|j| {
                let jet = ordered.jet(j);
                [jet[0].clone(), jet[1].clone(), jet[2].clone()]
            })
            .collect(),
        w1: [w1[0].clone(), w1[1].clone()],
        l: lambda_triple(&ordered),
        g: gp.g.clone(),
        dg: gp.dg.clone(),
        root: gp.sqrt_branch.clone(),
    };
    let l = data.l;
    let w0 = &data.w1[0];
    let mut out = Vec::new();
    let (plus, minus) = data.branch_sides();
    match case {
        CubicCase::ThreeCells => {
            let pairs = [(0, 1), (1, 2), (2, 0)];
            let mut w = Vec::new();
            for &(k, m) in &pairs {
                let (wk, dwk) = data.wkl(k, m);
                let (pk, pm) = (&data.phi[k][0], &data.phi[m][0]);
                let rhs = pointwise(grid, |i| (l[m] - l[k]) * pk.at(i) * pm.at(i));
                data.push(&mut out, format!("W{}{}' = (l{} - l{}) phi{} phi{}", k + 1, m + 1, m + 1, k + 1, k + 1, m + 1), dwk, rhs);
                w.push(wk);
            }
            let wr = |a: usize, b: usize| -> GridFunction {
                match (a, b) {
                    (0, 1) => w[0].clone(),
                    (1, 0) => -&w[0],
                    (1, 2) => w[1].clone(),
                    (2, 1) => -&w[1],
                    (2, 0) => w[2].clone(),
                    _ => -&w[2],
                }
            };
            for j in 0..3 {
                let (k, m) = ((j + 1) % 3, (j + 2) % 3);
                let (wjk, wjm) = (wr(j, k), wr(j, m));
                let rhs = pointwise(grid, |i| (l[k] - l[m]) * wjk.at(i) * wjm.at(i) / w0.at(i).powi(2));
                data.push(&mut out, format!("(phi{}/W1)'", j + 1), data.ratio_derivative(j), rhs);
                let wkm = wr(k, m);
                let pj = &data.phi[j][0];
                let rhs = pointwise(grid, |i| (l[j] - l[k]) * (l[j] - l[m]) * pj.at(i) * wkm.at(i) / w0.at(i));
                data.push(&mut out, format!("G - l{}", j + 1), data.g_minus(l[j]), rhs);
            }
            let prod = 2.0 * (l[0] - l[1]) * (l[1] - l[2]) * (l[2] - l[0]);
            let (p0, p1, p2) = (&data.phi[0][0], &data.phi[1][0], &data.phi[2][0]);
            let rhs = pointwise(grid, |i| prod * p0.at(i) * p1.at(i) * p2.at(i) / w0.at(i));
            data.push(&mut out, "G' + sqrt".into(), plus, rhs);
            let rhs = pointwise(grid, |i| prod * w[0].at(i) * w[1].at(i) * w[2].at(i) / w0.at(i).powi(2));
            data.push(&mut out, "G' - sqrt".into(), minus, rhs);
        }
        CubicCase::CellAndPair => {
            let d = l[0] - l[1];
            let (w13, dw13) = data.wkl(0, 2);
            let (w23, dw23) = data.wkl(1, 2);
            let (p1, p3) = (&data.phi[0][0], &data.phi[2][0]);
            data.push(&mut out, "W13' = (l2 - l1) phi1 phi3".into(), dw13, pointwise(grid, |i| -d * p1.at(i) * p3.at(i)));
            data.push(&mut out, "W23' = -phi3^2".into(), dw23, pointwise(grid, |i| -p3.at(i) * p3.at(i)));
            let rhs = pointwise(grid, |i| w13.at(i).powi(2) / w0.at(i).powi(2));
            data.push(&mut out, "(phi1/W1)'".into(), data.ratio_derivative(0), rhs);
            let rhs = pointwise(grid, |i| d * w13.at(i) * w23.at(i) / w0.at(i).powi(2));
            data.push(&mut out, "(phi3/W1)'".into(), data.ratio_derivative(2), rhs);
            let rhs = pointwise(grid, |i| d * d * p1.at(i) * w23.at(i) / w0.at(i));
            data.push(&mut out, "G - l1".into(), data.g_minus(l[0]), rhs);
            let rhs = pointwise(grid, |i| d * p3.at(i) * w13.at(i) / w0.at(i));
            data.push(&mut out, "G - l2".into(), data.g_minus(l[1]), rhs);
            let rhs = pointwise(grid, |i| -2.0 * d * d * p1.at(i) * p3.at(i).powi(2) / w0.at(i));
            data.push(&mut out, "G' + sqrt".into(), plus, rhs);
            let rhs = pointwise(grid, |i| 2.0 * d * d * w13.at(i).powi(2) * w23.at(i) / w0.at(i).powi(2));
            data.push(&mut out, "G' - sqrt".into(), minus, rhs);
        }
        CubicCase::SingleCell => {
            let (w2, dw2) = data.wkl(1, 2);
            let p3 = &data.phi[2][0];
            data.push(&mut out, "W2' = -phi3^2".into(), dw2, pointwise(grid, |i| -p3.at(i) * p3.at(i)));
            let rhs = pointwise(grid, |i| w2.at(i).powi(2) / w0.at(i).powi(2));
            data.push(&mut out, "(phi3/W1)'".into(), data.ratio_derivative(2), rhs);
            let rhs = pointwise(grid, |i| p3.at(i) * w2.at(i) / w0.at(i));
            data.push(&mut out, "G - l1".into(), data.g_minus(l[0]), rhs);
            let rhs = pointwise(grid, |i| -2.0 * p3.at(i).powi(3) / w0.at(i));
            data.push(&mut out, "G' + sqrt".into(), plus, rhs);
            let rhs = pointwise(grid, |i| 2.0 * w2.at(i).powi(3) / w0.at(i).powi(2));
            data.push(&mut out, "G' - sqrt".into(), minus, rhs);
        }
    }
    Ok(WronskianIdentityReport { case, identities: out })
}

/// Coefficients of `q_3^- = d^3 + alpha d^2 + beta d + gamma`, the relations
/// forced by `q_3^- h^+ = h^- q_3^-`, and the `g_2, g_1, g_0` form.
#[derive(Debug, Clone)]
pub struct CoefficientReport {
    pub alpha: GridFunction,
    pub beta: GridFunction,
    pub gamma: GridFunction,
    pub g2: GridFunction,
    pub g1: GridFunction,
    pub g0: GridFunction,
    /// Residuals of the four coefficient relations, lowest derivative order
    /// of `V_2 - V_1` first.
    pub relations: Vec<IdentityResidual>,
    /// Coefficientwise gap between `(q_3^-)^t` and
    /// `-d^3 + g_2 d^2 + (g_2' + 2 g_1) d + (g_0 + g_1')`.
    pub transpose_residual: f64,
}

impl CoefficientReport {
    pub fn max_relation(&self) -> f64 {
        self.relations.iter().fold(0.0f64, |m, r| m.max(r.residual))
    }
}

pub fn coefficient_relations(q3: &LinearDiffOperator, v1: &GridFunction, v2: &GridFunction) -> Result<CoefficientReport> {
    if q3.order() != 3 {
        return Err(Error::Precondition(format!("operator has order {}, expected 3", q3.order())));
    }
    let lead = q3.leading();
    let off = lead.values().iter().fold(0.0f64, |m, v| m.max((v - C64::new(1.0, 0.0)).norm()));
    if off > 1e-12 {
        return Err(Error::Precondition("operator is not monic".into()));
    }
    let grid = *q3.grid();
    let (alpha, beta, gamma) = (q3.coeff(2), q3.coeff(1), q3.coeff(0));
    let d = |f: &GridFunction, k: usize| f.derivative_n(k);
    let (a1, a2) = (d(&alpha, 1)?, d(&alpha, 2)?);
    let (b1, b2) = (d(&beta, 1)?, d(&beta, 2)?);
    let (c1, c2) = (d(&gamma, 1)?, d(&gamma, 2)?);
    let (u1, u2, u3) = (d(v1, 1)?, d(v1, 2)?, d(v1, 3)?);
    let dv = v2 - v1;
    let terms = |fs: Vec<Box<dyn Fn(usize) -> C64 + '_>>| -> Vec<GridFunction> {
        fs.into_iter().map(|f| pointwise(grid, f)).collect()
    };
    let rel = |name: &str, ts: Vec<GridFunction>| -> IdentityResidual {
        let refs: Vec<&GridFunction> = ts.iter().collect();
        IdentityResidual { name: name.into(), residual: identity_residual(&refs, 1.0) }
    };
    let relations = vec![
        rel(
            "V2 - V1 = 2 alpha'",
            terms(vec![Box::new(|i| dv.at(i)), Box::new(|i| -2.0 * a1.at(i))]),
        ),
        rel(
            "alpha (V2 - V1) - 3 V1' = alpha'' + 2 beta'",
            terms(vec![
                Box::new(|i| alpha.at(i) * dv.at(i)),
                Box::new(|i| -3.0 * u1.at(i)),
                Box::new(|i| -a2.at(i)),
                Box::new(|i| -2.0 * b1.at(i)),
            ]),
        ),
        rel(
            "beta (V2 - V1) - 2 alpha V1' - 3 V1'' = beta'' + 2 gamma'",
            terms(vec![
                Box::new(|i| beta.at(i) * dv.at(i)),
                Box::new(|i| -2.0 * alpha.at(i) * u1.at(i)),
                Box::new(|i| -3.0 * u2.at(i)),
                Box::new(|i| -b2.at(i)),
                Box::new(|i| -2.0 * c1.at(i)),
            ]),
        ),
        rel(
            "gamma (V2 - V1) - beta V1' - alpha V1'' - V1''' = gamma''",
            terms(vec![
                Box::new(|i| gamma.at(i) * dv.at(i)),
                Box::new(|i| -beta.at(i) * u1.at(i)),
                Box::new(|i| -alpha.at(i) * u2.at(i)),
                Box::new(|i| -u3.at(i)),
                Box::new(|i| -c2.at(i)),
            ]),
        ),
    ];
    let g2 = alpha.clone();
    let g1 = pointwise(grid, |i| 0.5 * (a1.at(i) - beta.at(i)));
    let g0 = pointwise(grid, |i| gamma.at(i) + 0.5 * (a2.at(i) - b1.at(i)));
    let dg1 = g1.derivative(1)?;
    let plus_form = LinearDiffOperator::new(vec![
        pointwise(grid, |i| g0.at(i) + dg1.at(i)),
        pointwise(grid, |i| a1.at(i) + 2.0 * g1.at(i)),
        g2.clone(),
        GridFunction::constant(grid, C64::new(-1.0, 0.0)),
    ])?;
    let transpose_residual = coefficientwise_difference(&q3.transpose()?, &plus_form);
    Ok(CoefficientReport { alpha, beta, gamma, g2, g1, g0, relations, transpose_residual })
}

/// Potentials and lower coefficients rebuilt from `G` and `g_2`.
#[derive(Debug, Clone)]
pub struct ParametricCoefficients {
    pub v1: GridFunction,
    pub v2: GridFunction,
    pub g1: GridFunction,
    pub g0: GridFunction,
}

/// `V_{1,2} = g_2^2 -+ g_2' - 2G + sum`, `g_1 = (g_2^2 - 3G + sum)/2`,
/// `g_0 = g_2'' - g_2 (g_2^2 - 3G + sum) + sqrt/2`.
pub fn parametric_coefficients(gp: &GProfile, g2: &GridFunction) -> Result<ParametricCoefficients> {
    gp.g.same_grid(g2)?;
    let grid = *g2.grid();
    let s = gp.lambda_sum();
    let (d1, d2) = (g2.derivative(1)?, g2.derivative(2)?);
    let inner = pointwise(grid, |i| g2.at(i) * g2.at(i) - 3.0 * gp.g.at(i) + s);
    Ok(ParametricCoefficients {
        v1: pointwise(grid, |i| g2.at(i) * g2.at(i) - d1.at(i) - 2.0 * gp.g.at(i) + s),
        v2: pointwise(grid, |i| g2.at(i) * g2.at(i) + d1.at(i) - 2.0 * gp.g.at(i) + s),
        g1: inner.scale(C64::new(0.5, 0.0)),
        g0: pointwise(grid, |i| d2.at(i) - g2.at(i) * inner.at(i) + 0.5 * gp.sqrt_branch.at(i)),
    })
}

/// Interior minimum of `G - lambda_3` for the minimal real eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub ok: bool,
    pub min_gap: f64,
    pub lambda3: f64,
}

/// `min (G - lambda_3) > 0` with `lambda_3` the smallest real eigenvalue.
/// Refused for strippable data (a doubled eigenvalue in separate cells).
pub fn check_lower_bound(gp: &GProfile) -> Result<LowerBound> {
    if gp.case == CubicCase::ThreeCells {
        let l = gp.lambdas;
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            if (l[a] - l[b]).norm() <= 1e-9 * (1.0 + l[a].norm()) {
                return Err(Error::Precondition(format!("eigenvalue {} fills two cells: operator is strippable", l[a])));
            }
        }
    }
    let lambda3 = gp
        .minimal_real_lambda()
        .ok_or_else(|| Error::Precondition("no real eigenvalue".into()))?;
    let min_gap = gp.g.grid().interior().map(|i| gp.g.at(i).re - lambda3).fold(f64::INFINITY, f64::min);
    Ok(LowerBound { ok: min_gap > 0.0, min_gap, lambda3 })
}

/// Residuals attached to a [`CubicFactorization`].
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationResiduals {
    /// `|k_2 p_1 - q_3|` relative.
    pub composition_first: f64,
    /// `|k_1 p_2 - q_3|` relative.
    pub composition_second: f64,
    /// `p_1 h^+ = h_1 p_1`, `k_2 h_1 = h^- k_2`, `p_2 h^+ = h_2 p_2`,
    /// `k_1 h_2 = h^- k_1`.
    pub intertwining: [f64; 4],
    /// The same four relations for the transposed factors.
    pub transposed: [f64; 4],
    /// `w_3` from `G` against `phi_3'/phi_3`.
    pub w3_vs_basis: f64,
}

impl FactorizationResiduals {
    pub fn max_intertwining(&self) -> f64 {
        self.intertwining.iter().chain(&self.transposed).fold(0.0f64, |m, &r| m.max(r))
    }
}

/// `q_3^- = k_2^- p_1^- = k_1^- p_2^-` with first-order `p_1, k_1`.
#[derive(Debug, Clone)]
pub struct CubicFactorization {
    pub lambda3: f64,
    pub p1: LinearDiffOperator,
    pub k2: LinearDiffOperator,
    pub p2: LinearDiffOperator,
    pub k1: LinearDiffOperator,
    pub h1_potential: GridFunction,
    pub h2_potential: GridFunction,
    pub w3: GridFunction,
    pub residuals: FactorizationResiduals,
}

fn hypothesis(msg: impl Into<String>) -> Error {
    Error::FactorizationHypothesis(msg.into())
}

fn intermediate_potential(v: &GridFunction, w3: &GridFunction, name: &str) -> Result<GridFunction> {
    let dw = w3.derivative(1)?;
    let pot = pointwise(*v.grid(), |i| v.at(i) - 2.0 * dw.at(i));
    if pot.check_finite().is_err() {
        return Err(hypothesis(format!("intermediate potential {name} is not finite")));
    }
    let scale = max_abs(pot.values()).max(1.0);
    if pot.max_imag() > TAU_REAL * scale {
        return Err(hypothesis(format!("intermediate potential {name} is complex (max |Im| {:.3e})", pot.max_imag())));
    }
    let bound = 1e6 * (1.0 + v.interior_max_abs());
    if pot.interior_max_abs() > bound {
        return Err(hypothesis(format!("intermediate potential {name} is singular (sup {:.3e})", pot.interior_max_abs())));
    }
    Ok(pot.real_part())
}

/// `d^2 + (w_3 - w_1) d + (G + V - w_3^2 - w_1 w_3 - 2 lambda_3)`.
fn second_factor(
    g: &GridFunction,
    v: &GridFunction,
    w1: &GridFunction,
    w3: &GridFunction,
    lambda3: f64,
) -> Result<LinearDiffOperator> {
    let grid = *g.grid();
    LinearDiffOperator::new(vec![
        pointwise(grid, |i| g.at(i) + v.at(i) - w3.at(i) * w3.at(i) - w1.at(i) * w3.at(i) - 2.0 * lambda3),
        w3 - w1,
        GridFunction::constant(grid, C64::new(1.0, 0.0)),
    ])
}

fn first_factor(chi: &GridFunction) -> Result<LinearDiffOperator> {
    LinearDiffOperator::new(vec![chi.clone(), GridFunction::constant(*chi.grid(), C64::new(1.0, 0.0))])
}

/// Splits a real, non-strippable third-order intertwiner whose last basis
/// function carries the minimal real eigenvalue. The second splitting comes
/// from the same construction applied to `-q_3^+` on the `h^-` side, whose
/// data are `w_1 -> -w_1`, `V_1 -> V_2` and the opposite branch.
pub fn factorize_cubic(q3: &LinearDiffOperator, basis: &JordanBasis) -> Result<CubicFactorization> {
    if q3.order() != 3 || basis.dim() != 3 {
        return Err(hypothesis("operator and basis must be of order 3"));
    }
    if q3.relative_imag() > 1e-8 {
        return Err(hypothesis(format!("coefficients are complex (relative Im {:.3e})", q3.relative_imag())));
    }
    let chains = basis.chains();
    for a in 0..chains.len() {
        for b in a + 1..chains.len() {
            if (chains[a].lambda - chains[b].lambda).norm() <= 1e-9 * (1.0 + chains[a].lambda.norm()) {
                return Err(hypothesis(format!("eigenvalue {} fills two cells: operator is strippable", chains[a].lambda)));
            }
        }
    }
    let l3 = basis.lambda(2);
    if l3.im.abs() > 1e-12 * (1.0 + l3.norm()) {
        return Err(hypothesis(format!("lambda_3 = {l3} is not real")));
    }
    let lambda3 = l3.re;
    let gp = g_profile(basis)?;
    if let Some(min) = gp.minimal_real_lambda() {
        if min < lambda3 - 1e-9 * (1.0 + lambda3.abs()) {
            return Err(hypothesis(format!(
                "lambda_3 = {lambda3} is not the minimal real eigenvalue ({min} is smaller)"
            )));
        }
    }
    let bound = check_lower_bound(&gp)?;
    if !bound.ok {
        return Err(hypothesis(format!("G - lambda_3 reaches {:.3e}, not positive", bound.min_gap)));
    }
    let h_plus = basis.hamiltonian();
    let v1 = h_plus.potential().clone();
    let logs = superpotential_logs(basis);
    let w1 = logs[0].0.clone();
    let (_, w3) = w_from_g(&gp, &w1)?;
    let h1_potential = intermediate_potential(&v1, &w3, "h1")?;
    let p1 = first_factor(&-&w3)?;
    let k2 = second_factor(&gp.g, &v1, &w1, &w3, lambda3)?;

    let v2 = partner_potential(&v1, basis)?;
    let grid = *basis.grid();
    let w1m = -&w1;
    let w3m = pointwise(grid, |i| {
        w1m.at(i) + (gp.dg.at(i) + gp.sqrt_branch.at(i)) / (2.0 * (gp.g.at(i) - lambda3))
    });
    let h2_potential = intermediate_potential(&v2, &w3m, "h2")?;
    let k2m = second_factor(&gp.g, &v2, &w1m, &w3m, lambda3)?;
    let p2 = k2m.transpose()?;
    let k1 = first_factor(&w3m)?;

    let h_minus = Hamiltonian::new(v2)?;
    let h1 = Hamiltonian::new(h1_potential.clone())?;
    let h2 = Hamiltonian::new(h2_potential.clone())?;
    let tests = gaussian_test_set(&grid);
    let intertwining = [
        intertwining_residual(&p1, &h_plus, &h1, &tests)?,
        intertwining_residual(&k2, &h1, &h_minus, &tests)?,
        intertwining_residual(&p2, &h_plus, &h2, &tests)?,
        intertwining_residual(&k1, &h2, &h_minus, &tests)?,
    ];
    let transposed = [
        intertwining_residual(&p1.transpose()?, &h1, &h_plus, &tests)?,
        intertwining_residual(&k2.transpose()?, &h_minus, &h1, &tests)?,
        intertwining_residual(&p2.transpose()?, &h2, &h_plus, &tests)?,
        intertwining_residual(&k1.transpose()?, &h_minus, &h2, &tests)?,
    ];
    let jet = basis.jet(2);
    let from_basis = pointwise(grid, |i| jet[1].at(i) / jet[0].at(i));
    let residuals = FactorizationResiduals {
        composition_first: operator_difference(&k2.compose(&p1)?, q3),
        composition_second: operator_difference(&k1.compose(&p2)?, q3),
        intertwining,
        transposed,
        w3_vs_basis: crate::gridfn::relative_difference(&w3, &from_basis),
    };
    Ok(CubicFactorization { lambda3, p1, k2, p2, k1, h1_potential, h2_potential, w3, residuals })
}
