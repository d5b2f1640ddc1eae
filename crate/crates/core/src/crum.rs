//! Intertwining operators from a canonical basis: the Crum determinant
//! formula, partner potentials, first-order chains and the partial-Wronskian
//! system.
//!
//! Transformation functions are kept in the flat order `phi_1..phi_N`: chains
//! in the order given, each chain from its highest associated function down
//! to its eigenfunction. `W_j` is the Wronskian of the rows
//! `phi_N, phi_{N-1}, ..., phi_j`, so `W_N = phi_N` and `W_1` is the full
//! determinant.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::diffop::{binomial, compose_all, operator_difference, Hamiltonian, LinearDiffOperator};
use crate::error::{Error, Result};
use crate::gridfn::{
    identity_residual, max_abs, pointwise_identity_residual, zero_locations, Grid, GridFunction, C64, TAU_REAL,
};
use crate::linalg;
use crate::schrod::{chain_residual, TransformationFunction};

pub const MAX_ORDER: usize = 6;
/// Relative residual allowed for eigenfunctions of `h`.
pub const EIGEN_TOL: f64 = 1e-6;
/// Relative residual allowed for associated functions.
pub const ASSOCIATED_TOL: f64 = 1e-4;
/// A Wronskian below this fraction of the product of its row norms counts
/// as vanishing.
const DEGENERATE_RATIO: f64 = 1e-10;

/// One Jordan chain: `functions[0]` is the eigenfunction and
/// `(h - lambda) functions[i] = functions[i - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub lambda: C64,
    pub functions: Vec<TransformationFunction>,
}

impl Chain {
    pub fn new(lambda: C64, functions: Vec<TransformationFunction>) -> Self {
        Chain { lambda, functions }
    }

    pub fn eigen(lambda: C64, f: TransformationFunction) -> Self {
        Chain { lambda, functions: vec![f] }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// A validated canonical basis with derivative jets of every function.
#[derive(Debug, Clone)]
pub struct JordanBasis {
    potential: GridFunction,
    chains: Vec<Chain>,
    /// `(chain, index within chain)` for `phi_1..phi_N`.
    order: Vec<(usize, usize)>,
    /// Derivatives `0..=N+2` of each `phi_j`, flat order.
    jets: Vec<Vec<GridFunction>>,
    chain_residuals: Vec<Vec<f64>>,
}

impl JordanBasis {
    /// Checks the chain relations against `h` and precomputes derivatives.
    pub fn new(h: &Hamiltonian, chains: Vec<Chain>) -> Result<Self> {
        let basis = Self::assemble(h, chains)?;
        for (c, res) in basis.chain_residuals.iter().enumerate() {
            for (i, &r) in res.iter().enumerate() {
                let tol = if i == 0 { EIGEN_TOL } else { ASSOCIATED_TOL };
                if !(r < tol) {
                    return Err(Error::NonCanonicalBasis(format!(
                        "chain {} function {i}: residual {r:.3e} exceeds {tol:.0e}",
                        c + 1
                    )));
                }
            }
        }
        Ok(basis)
    }

    fn assemble(h: &Hamiltonian, chains: Vec<Chain>) -> Result<Self> {
        if chains.is_empty() || chains.iter().any(|c| c.is_empty()) {
            return Err(Error::Empty("basis needs nonempty chains"));
        }
        let n: usize = chains.iter().map(|c| c.len()).sum();
        if n > MAX_ORDER {
            return Err(Error::OrderTooLarge(n));
        }
        for (a, ca) in chains.iter().enumerate() {
            let same = chains.iter().filter(|cb| same_eigenvalue(ca.lambda, cb.lambda)).count();
            if same > 2 {
                return Err(Error::NonCanonicalBasis(format!(
                    "eigenvalue {} occurs in {same} chains (at most two allowed)",
                    ca.lambda
                )));
            }
            for f in &ca.functions {
                h.potential().same_grid(&f.value)?;
                f.value.check_finite()?;
                f.derivative.check_finite()?;
            }
            let _ = a;
        }
        let vders = h.potential_derivatives(n)?;
        let mut chain_jets: Vec<Vec<Vec<GridFunction>>> = Vec::with_capacity(chains.len());
        let mut chain_residuals = Vec::with_capacity(chains.len());
        for chain in &chains {
            let mut jets: Vec<Vec<GridFunction>> = Vec::with_capacity(chain.len());
            let mut res = Vec::with_capacity(chain.len());
            for (i, f) in chain.functions.iter().enumerate() {
                let lower = if i == 0 { None } else { Some(&jets[i - 1]) };
                jets.push(function_jet(f, chain.lambda, &vders, lower.map(|v| v.as_slice()), n + 2));
                let lower_value = if i == 0 { None } else { Some(&chain.functions[i - 1].value) };
                res.push(chain_residual(h, chain.lambda, &f.value, lower_value)?);
            }
            chain_jets.push(jets);
            chain_residuals.push(res);
        }
        let mut order = Vec::with_capacity(n);
        let mut jets = Vec::with_capacity(n);
        for (c, chain) in chains.iter().enumerate() {
            for i in (0..chain.len()).rev() {
                order.push((c, i));
                jets.push(chain_jets[c][i].clone());
            }
        }
        Ok(JordanBasis { potential: h.potential().clone(), chains, order, jets, chain_residuals })
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn grid(&self) -> &Grid {
        self.potential.grid()
    }

    pub fn potential(&self) -> &GridFunction {
        &self.potential
    }

    pub fn hamiltonian(&self) -> Hamiltonian {
        Hamiltonian::new(self.potential.clone()).expect("potential validated at construction")
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    /// Relative chain residuals, `[chain][index]`.
    pub fn chain_residuals(&self) -> &[Vec<f64>] {
        &self.chain_residuals
    }

    /// `(chain, index)` of `phi_1..phi_N`.
    pub fn flat_order(&self) -> &[(usize, usize)] {
        &self.order
    }

    /// `phi_{j+1}` (zero-based `j`).
    pub fn function(&self, j: usize) -> &GridFunction {
        &self.jets[j][0]
    }

    /// Eigenvalue attached to `phi_{j+1}`.
    pub fn lambda(&self, j: usize) -> C64 {
        self.chains[self.order[j].0].lambda
    }

    pub fn lambdas(&self) -> Vec<C64> {
        (0..self.dim()).map(|j| self.lambda(j)).collect()
    }

    /// Derivatives `0..=N+2` of `phi_{j+1}`.
    pub fn jet(&self, j: usize) -> &[GridFunction] {
        &self.jets[j]
    }

    /// Same chains with every function multiplied by the matching factor.
    pub fn rescaled(&self, h: &Hamiltonian, factors: &[C64]) -> Result<JordanBasis> {
        if factors.len() != self.chains.len() {
            return Err(Error::Precondition("one factor per chain required".into()));
        }
        let chains = self
            .chains
            .iter()
            .zip(factors)
            .map(|(c, &s)| Chain::new(c.lambda, c.functions.iter().map(|f| f.scale(s)).collect()))
            .collect();
        JordanBasis::new(h, chains)
    }

    /// A basis made of the lowest `keep[c]` functions of each chain; chains
    /// with `keep[c] = 0` are dropped. Returns `None` when nothing is kept.
    pub fn truncated(&self, keep: &[usize]) -> Result<Option<JordanBasis>> {
        let chains: Vec<Chain> = self
            .chains
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k > 0)
            .map(|(c, &k)| Chain::new(c.lambda, c.functions[..k.min(c.len())].to_vec()))
            .collect();
        if chains.is_empty() {
            return Ok(None);
        }
        Ok(Some(JordanBasis::new(&self.hamiltonian(), chains)?))
    }

    /// `W_j` and its first `order` derivatives (`j` one-based).
    pub fn partial_wronskian(&self, j: usize, order: usize) -> Vec<GridFunction> {
        let n = self.dim();
        assert!(j >= 1 && j <= n, "partial Wronskian index {j} outside 1..={n}");
        let rows: Vec<usize> = (j - 1..n).rev().collect();
        let m = rows.len();
        assert!(m + order <= self.jets[0].len(), "jet too short for W_{j}^({order})");
        let grid = *self.grid();
        let expansions = determinant_derivatives(m, order);
        expansions
            .iter()
            .map(|terms| {
                let values = (0..grid.n_points())
                    .map(|p| {
                        let mut acc = C64::new(0.0, 0.0);
                        for (cols, coef) in terms {
                            let mat = DMatrix::from_fn(m, m, |r, c| self.jets[rows[r]][cols[c]].at(p));
                            acc += linalg::det(mat) * *coef as f64;
                        }
                        acc
                    })
                    .collect();
                GridFunction::from_vec(grid, values)
            })
            .collect()
    }

    /// Pointwise `|W_j| / prod(row norms)` (Hadamard ratio), in `[0, 1]`.
    pub fn wronskian_ratio(&self, j: usize) -> Vec<f64> {
        let n = self.dim();
        let rows: Vec<usize> = (j - 1..n).rev().collect();
        let m = rows.len();
        (0..self.grid().n_points())
            .map(|p| {
                let mat = DMatrix::from_fn(m, m, |r, c| self.jets[rows[r]][c].at(p));
                let norms: f64 = (0..m).map(|r| mat.row(r).norm()).product();
                if norms == 0.0 {
                    0.0
                } else {
                    linalg::det(mat).norm() / norms
                }
            })
            .collect()
    }
}

fn same_eigenvalue(a: C64, b: C64) -> bool {
    (a - b).norm() <= 1e-9 * (1.0 + a.norm().max(b.norm()))
}

/// Derivatives `0..=order` of a transformation function from its value and
/// slope: `f'' = (V - lambda) f - g` differentiated `k` times, with `g` the
/// lower chain member.
fn function_jet(
    f: &TransformationFunction,
    lambda: C64,
    vders: &[GridFunction],
    lower: Option<&[GridFunction]>,
    order: usize,
) -> Vec<GridFunction> {
    let grid = *f.value.grid();
    let n = grid.n_points();
    let mut jet: Vec<Vec<C64>> = vec![f.value.values().to_vec(), f.derivative.values().to_vec()];
    for k in 0..order.saturating_sub(1) {
        let mut next = vec![C64::new(0.0, 0.0); n];
        for m in 0..=k {
            let b = binomial(k, m) as f64;
            let u = &vders[m.min(vders.len() - 1)];
            let use_v = m < vders.len();
            for p in 0..n {
                let um = if m == 0 { u.at(p) - lambda } else if use_v { u.at(p) } else { C64::new(0.0, 0.0) };
                next[p] += um * jet[k - m][p] * b;
            }
        }
        if let Some(g) = lower {
            for p in 0..n {
                next[p] -= g[k].at(p);
            }
        }
        jet.push(next);
    }
    jet.truncate(order + 1);
    jet.into_iter().map(|v| GridFunction::from_vec(grid, v)).collect()
}

/// Column-derivative expansions of `d^k/dx^k det[f_r^(c)]` for an `m`-row
/// Wronskian, `k = 0..=order`. Each term lists the derivative order of every
/// column with an integer multiplicity.
fn determinant_derivatives(m: usize, order: usize) -> Vec<Vec<(Vec<usize>, i64)>> {
    let mut current: HashMap<Vec<usize>, i64> = HashMap::new();
    current.insert((0..m).collect(), 1);
    let mut out = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut terms: Vec<(Vec<usize>, i64)> = current.iter().map(|(c, &v)| (c.clone(), v)).collect();
        terms.sort();
        out.push(terms);
        if k == order {
            break;
        }
        let mut next: HashMap<Vec<usize>, i64> = HashMap::new();
        for (cols, coef) in &current {
            for c in 0..m {
                let mut raised = cols.clone();
                raised[c] += 1;
                if raised.iter().enumerate().any(|(i, &v)| i != c && v == raised[c]) {
                    continue;
                }
                *next.entry(raised).or_insert(0) += coef;
            }
        }
        next.retain(|_, v| *v != 0);
        current = next;
    }
    out
}

/// Which intertwiner of the pair to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `q^-`, leading coefficient `1`.
    Minus,
    /// `q^+ = (q^-)^t`, leading coefficient `(-1)^N`.
    Plus,
}

/// Checks that `W_1` has no zero on the grid.
pub fn ensure_nonsingular(basis: &JordanBasis) -> Result<GridFunction> {
    let w1 = basis.partial_wronskian(1, 0).remove(0);
    let zeros = zero_locations(&w1);
    if !zeros.is_empty() {
        return Err(Error::SingularWronskian { zeros });
    }
    Ok(w1)
}

/// The order-`N` operator annihilating every basis function, normalized so
/// that `q^-` is monic.
pub fn build_intertwiner(basis: &JordanBasis, side: Side) -> Result<LinearDiffOperator> {
    ensure_nonsingular(basis)?;
    let n = basis.dim();
    let grid = *basis.grid();
    let np = grid.n_points();
    let mut coeffs = vec![vec![C64::new(0.0, 0.0); np]; n + 1];
    for p in 0..np {
        let a = DMatrix::from_fn(n, n, |j, k| basis.jet(j)[k].at(p));
        let b = DVector::from_fn(n, |j, _| -basis.jet(j)[n].at(p));
        let x = linalg::solve(a, b).ok_or_else(|| Error::SingularWronskian { zeros: vec![grid.x(p)] })?;
        for k in 0..n {
            coeffs[k][p] = x[k];
        }
        coeffs[n][p] = C64::new(1.0, 0.0);
    }
    let q = LinearDiffOperator::new(coeffs.into_iter().map(|c| GridFunction::from_vec(grid, c)).collect())?;
    match side {
        Side::Minus => Ok(q),
        Side::Plus => q.transpose(),
    }
}

/// `max_j |q phi_j| / max_k |c_k phi_j^(k)|` over the interior, with
/// derivatives taken by finite differences.
pub fn kernel_residual(q: &LinearDiffOperator, f: &GridFunction) -> Result<f64> {
    let mut terms = Vec::with_capacity(q.order() + 1);
    for k in 0..=q.order() {
        let d = if k == 0 { f.clone() } else { f.derivative_n(k)? };
        terms.push(q.coeff(k).zip_with(&d, |a, b| a * b)?);
    }
    let refs: Vec<&GridFunction> = terms.iter().collect();
    Ok(identity_residual(&refs, 0.0))
}

/// `w = W'/W` and `w'` from a jet `(W, W', W'')`.
fn log_derivatives(jet: &[GridFunction]) -> (GridFunction, GridFunction) {
    let grid = *jet[0].grid();
    let (w, dw): (Vec<C64>, Vec<C64>) = (0..grid.n_points())
        .map(|p| {
            let r1 = jet[1].at(p) / jet[0].at(p);
            let r2 = jet[2].at(p) / jet[0].at(p);
            (r1, r2 - r1 * r1)
        })
        .unzip();
    (GridFunction::from_vec(grid, w), GridFunction::from_vec(grid, dw))
}

/// `w_j = W_j'/W_j` and `w_j'` for `j = 1..=N` (index `j - 1`).
pub fn superpotential_logs(basis: &JordanBasis) -> Vec<(GridFunction, GridFunction)> {
    (1..=basis.dim()).map(|j| log_derivatives(&basis.partial_wronskian(j, 2))).collect()
}

/// `V2 = V1 - 2 (ln W_1)''`, evaluated as `V1 - 2(W''/W - (W'/W)^2)`.
pub fn partner_potential(v1: &GridFunction, basis: &JordanBasis) -> Result<GridFunction> {
    let w1 = ensure_nonsingular(basis)?;
    v1.same_grid(&w1)?;
    let (_, dw) = log_derivatives(&basis.partial_wronskian(1, 2));
    let v2 = v1.zip_with(&dw, |a, b| a - b * 2.0)?;
    v2.check_finite()?;
    let scale = max_abs(v2.values()).max(1.0);
    if v2.max_imag() > TAU_REAL * scale {
        return Err(Error::ComplexPotential { max_imag: v2.max_imag() });
    }
    Ok(v2.real_part())
}

/// Residual of `V2 - V1 = 2 alpha'` with `alpha` the `d^{N-1}` coefficient of
/// `q^-`; unit floor.
pub fn partner_alpha_residual(v1: &GridFunction, v2: &GridFunction, q: &LinearDiffOperator) -> Result<f64> {
    let alpha = q.coeff(q.order().saturating_sub(1));
    let da = alpha.derivative(1)?.scale(C64::new(-2.0, 0.0));
    let diff = v2 - v1;
    Ok(identity_residual(&[&diff, &da], 1.0))
}

/// First-order factorization `q^- = r_1 ... r_N`, `r_j = d + chi_j`.
#[derive(Debug, Clone)]
pub struct FactorizationChain {
    /// `r_1, ..., r_N`; the rightmost factor acts first.
    pub factors: Vec<LinearDiffOperator>,
    pub superpotentials: Vec<GridFunction>,
    /// `v_1, ..., v_{N-1}`.
    pub intermediate_potentials: Vec<GridFunction>,
    /// Mismatch between the two expressions for each `v_j`.
    pub intermediate_mismatch: Vec<f64>,
    /// Factor `j` involves a Wronskian `W_j` or `W_{j+1}` with a zero.
    pub singular_flags: Vec<bool>,
    /// `chi_j` has a non-negligible imaginary part.
    pub complex_flags: Vec<bool>,
    /// `compose(factors)` against [`build_intertwiner`]; `None` when a
    /// singular factor makes the comparison meaningless.
    pub composition_residual: Option<f64>,
    /// `V1 = chi_N^2 - chi_N' + lambda_N` and
    /// `V2 = chi_1^2 + chi_1' + lambda_1` against the direct potentials.
    pub v1_residual: f64,
    pub v2_residual: f64,
}

impl FactorizationChain {
    pub fn is_regular(&self) -> bool {
        !self.singular_flags.iter().any(|&f| f) && !self.complex_flags.iter().any(|&f| f)
    }
}

/// Levels `j >= 2` whose partial Wronskian `W_j` changes sign or vanishes.
pub fn singular_levels(basis: &JordanBasis) -> Result<Vec<usize>> {
    let n = basis.dim();
    let mut out = Vec::new();
    let interior = basis.grid().interior();
    for j in 2..=n {
        let ratio = basis.wronskian_ratio(j);
        let tiny = ratio.iter().filter(|&&r| r < DEGENERATE_RATIO).count();
        if tiny * 5 > ratio.len() {
            return Err(Error::DegeneratePartialWronskian(j));
        }
        let w = basis.partial_wronskian(j, 0).remove(0);
        let crosses = !zero_locations(&w).is_empty();
        let touches = interior.clone().any(|p| ratio[p] < DEGENERATE_RATIO);
        if crosses || touches {
            out.push(j);
        }
    }
    Ok(out)
}

/// `chi_j = -w_j + w_{j+1}` (`w_{N+1} = 0`), intermediate potentials and
/// diagnostics. Samples where a Wronskian vanishes exactly are set to zero;
/// the affected step is flagged singular.
pub fn chain_factorize(basis: &JordanBasis) -> Result<FactorizationChain> {
    ensure_nonsingular(basis)?;
    let n = basis.dim();
    let grid = *basis.grid();
    let singular = singular_levels(basis)?;
    let logs = superpotential_logs(basis);
    let zero = GridFunction::zeros(grid);
    let w = |j: usize| -> &GridFunction { if j > n { &zero } else { &logs[j - 1].0 } };
    let dw = |j: usize| -> &GridFunction { if j > n { &zero } else { &logs[j - 1].1 } };

    let mut chis = Vec::with_capacity(n);
    let mut dchis = Vec::with_capacity(n);
    for j in 1..=n {
        chis.push(sanitize(w(j + 1).zip_with(w(j), |a, b| a - b)?));
        dchis.push(sanitize(dw(j + 1).zip_with(dw(j), |a, b| a - b)?));
    }
    let lambdas = basis.lambdas();
    let from_left = |j: usize| -> Result<GridFunction> {
        let l = lambdas[j - 1];
        chis[j - 1].zip_with(&dchis[j - 1], |c, d| c * c - d + l)
    };
    let from_right = |j: usize| -> Result<GridFunction> {
        let l = lambdas[j - 1];
        chis[j - 1].zip_with(&dchis[j - 1], |c, d| c * c + d + l)
    };
    let mut intermediate = Vec::with_capacity(n.saturating_sub(1));
    let mut mismatch = Vec::with_capacity(n.saturating_sub(1));
    for j in 1..n {
        let a = from_left(j)?;
        let b = from_right(j + 1)?;
        let nb = -&b;
        mismatch.push(identity_residual(&[&a, &nb], 1.0));
        intermediate.push(a);
    }
    let singular_flags: Vec<bool> =
        (1..=n).map(|j| singular.contains(&j) || singular.contains(&(j + 1))).collect();
    let complex_flags: Vec<bool> = chis
        .iter()
        .map(|c| c.max_imag() > TAU_REAL * c.max_abs().max(1.0))
        .collect();
    let factors: Vec<LinearDiffOperator> = chis.iter().map(|c| LinearDiffOperator::first_order(c.clone())).collect();

    let v1 = basis.potential();
    let v1_chain = from_left(n)?;
    let v1_residual = identity_residual(&[&v1_chain, &-v1], 1.0);
    let v2_chain = from_right(1)?;
    let v2_residual = match partner_potential(v1, basis) {
        Ok(v2) => identity_residual(&[&v2_chain, &-&v2], 1.0),
        Err(_) => f64::NAN,
    };
    let composition_residual = if singular_flags.iter().any(|&f| f) {
        None
    } else {
        let composed = compose_all(&factors)?;
        let direct = build_intertwiner(basis, Side::Minus)?;
        Some(operator_difference(&composed, &direct))
    };
    Ok(FactorizationChain {
        factors,
        superpotentials: chis,
        intermediate_potentials: intermediate,
        intermediate_mismatch: mismatch,
        singular_flags,
        complex_flags,
        composition_residual,
        v1_residual,
        v2_residual,
    })
}

fn sanitize(f: GridFunction) -> GridFunction {
    f.map(|v| if v.re.is_finite() && v.im.is_finite() { v } else { C64::new(0.0, 0.0) })
}

/// Result of [`partial_wronskian_system_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct WronskianSystemReport {
    /// Worst pointwise relative residual over all equations.
    pub residual: f64,
    /// Per equation: `j = 1..N-1` for the coupled equations, then the last
    /// (Schrödinger) equation for `W_N`.
    pub per_equation: Vec<f64>,
    /// Levels whose `W_j` vanishes somewhere; the cleared-denominator form
    /// stays regular there.
    pub singular_levels: Vec<usize>,
}

/// Residuals of the equations satisfied by the logarithmic derivatives
/// `w_j = W_j'/W_j`:
/// `w_j' - w_{j+2}' + w_j^2 - w_{j+2}^2 - 2 w_{j+1}(w_j - w_{j+2}) + lambda_j - lambda_{j+1} = 0`
/// for `j < N` (with `W_{N+1} = 1`), and `w_N' + w_N^2 + lambda_N - V1 = 0`.
/// Each equation is multiplied through by its Wronskians, each Wronskian jet
/// is scaled pointwise to unit size, and the residual is taken relative to
/// the largest term at each sample.
pub fn partial_wronskian_system_residual(basis: &JordanBasis) -> Result<WronskianSystemReport> {
    let n = basis.dim();
    let grid = *basis.grid();
    let np = grid.n_points();
    let singular = singular_levels(basis)?;
    let lambdas = basis.lambdas();
    // scaled jets (W, W', W'') for j = 1..=N+1
    let mut jets: Vec<[Vec<C64>; 3]> = Vec::with_capacity(n + 1);
    for j in 1..=n {
        let raw = basis.partial_wronskian(j, 2);
        let mut scaled = [vec![C64::new(0.0, 0.0); np], vec![C64::new(0.0, 0.0); np], vec![C64::new(0.0, 0.0); np]];
        for p in 0..np {
            let s = raw.iter().fold(0.0f64, |m, f| m.max(f.at(p).norm()));
            let s = if s > 0.0 { s } else { 1.0 };
            for d in 0..3 {
                scaled[d][p] = raw[d].at(p) / s;
            }
        }
        jets.push(scaled);
    }
    jets.push([vec![C64::new(1.0, 0.0); np], vec![C64::new(0.0, 0.0); np], vec![C64::new(0.0, 0.0); np]]);

    let mut per_equation = Vec::with_capacity(n);
    for j in 1..n {
        let (a, b, c) = (&jets[j - 1], &jets[j], &jets[j + 1]);
        let dl = lambdas[j - 1] - lambdas[j];
        let terms: Vec<GridFunction> = (0..6)
            .map(|t| {
                let v = (0..np)
                    .map(|p| match t {
                        0 => a[2][p] * b[0][p] * c[0][p],
                        1 => -c[2][p] * a[0][p] * b[0][p],
                        2 => b[1][p] * a[1][p] * c[0][p] * -2.0,
                        3 => b[1][p] * c[1][p] * a[0][p] * 2.0,
                        4 => a[0][p] * b[0][p] * c[0][p] * dl,
                        _ => C64::new(0.0, 0.0),
                    })
                    .collect();
                GridFunction::from_vec(grid, v)
            })
            .collect();
        let refs: Vec<&GridFunction> = terms.iter().collect();
        per_equation.push(pointwise_identity_residual(&refs, 1e-12));
    }
    let last = &jets[n - 1];
    let v1 = basis.potential();
    let ln = lambdas[n - 1];
    let t0 = GridFunction::from_vec(grid, last[2].clone());
    let t1 = GridFunction::from_vec(grid, (0..np).map(|p| last[0][p] * ln).collect());
    let t2 = GridFunction::from_vec(grid, (0..np).map(|p| -last[0][p] * v1.at(p)).collect());
    per_equation.push(pointwise_identity_residual(&[&t0, &t1, &t2], 1e-12));
    let residual = per_equation.iter().cloned().fold(0.0, f64::max);
    Ok(WronskianSystemReport { residual, per_equation, singular_levels: singular })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffop::coefficientwise_difference;
    use crate::schrod::ClosedForm;

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn free(g: Grid) -> Hamiltonian {
        Hamiltonian::new(GridFunction::zeros(g)).unwrap()
    }

    fn exp_basis(g: Grid) -> JordanBasis {
        let chains = (1..=3)
            .map(|k| Chain::eigen(c(-(k * k) as f64), ClosedForm::Exp { k: c(k as f64) }.sample(&g)))
            .collect();
        JordanBasis::new(&free(g), chains).unwrap()
    }

    #[test]
    fn determinant_expansion_counts() {
        // d/dx det[f, f'] = det[f, f'']
        let d = determinant_derivatives(2, 2);
        assert_eq!(d[1], vec![(vec![0, 2], 1)]);
        assert_eq!(d[2], vec![(vec![0, 3], 1), (vec![1, 2], 1)]);
    }

    #[test]
    fn exponential_partial_wronskians() {
        let g = Grid::default();
        let b = exp_basis(g);
        let checks: [(usize, f64, f64); 3] = [(1, -2.0, 6.0), (2, -1.0, 5.0), (3, 1.0, 3.0)];
        for (j, a, k) in checks {
            let w = b.partial_wronskian(j, 2);
            for p in g.interior().step_by(97) {
                let x = g.x(p);
                let want = a * (k * x).exp();
                assert!((w[0].at(p).re - want).abs() < 1e-10 * want.abs(), "W_{j} at {x}");
                assert!((w[1].at(p).re - k * want).abs() < 1e-10 * k * want.abs());
                assert!((w[2].at(p).re - k * k * want).abs() < 1e-10 * k * k * want.abs());
            }
        }
    }

    #[test]
    fn one_soliton_intertwiner() {
        let g = Grid::default();
        let b = JordanBasis::new(&free(g), vec![Chain::eigen(c(-1.0), ClosedForm::Cosh { k: 1.0 }.sample(&g))]).unwrap();
        let q = build_intertwiner(&b, Side::Minus).unwrap();
        let want = LinearDiffOperator::new(vec![GridFunction::from_real_fn(g, |x| -x.tanh()), GridFunction::constant(g, c(1.0))])
            .unwrap();
        assert!(coefficientwise_difference(&q, &want) < 1e-12);
        let v2 = partner_potential(b.potential(), &b).unwrap();
        assert!((v2.at(g.center()).re + 2.0).abs() < 1e-12);
        let oracle = GridFunction::from_real_fn(g, |x| -2.0 / x.cosh().powi(2));
        assert!(crate::gridfn::relative_difference(&v2, &oracle) < 1e-12);
        assert!(partner_alpha_residual(b.potential(), &v2, &q).unwrap() < 1e-9);
    }

    #[test]
    fn exponential_intertwiner_and_chain() {
        let g = Grid::default();
        let b = exp_basis(g);
        let q = build_intertwiner(&b, Side::Minus).unwrap();
        let want = LinearDiffOperator::constant_real(g, &[-6.0, 11.0, -6.0, 1.0]);
        assert!(coefficientwise_difference(&q, &want) < 1e-10);
        for j in 0..3 {
            assert!(kernel_residual(&q, b.function(j)).unwrap() < 1e-5);
        }
        let qp = build_intertwiner(&b, Side::Plus).unwrap();
        assert!((qp.leading().at(0).re + 1.0).abs() < 1e-14);

        let ch = chain_factorize(&b).unwrap();
        for (j, want) in [-1.0, -2.0, -3.0].iter().enumerate() {
            let chi = &ch.superpotentials[j];
            assert!(g.interior().all(|p| (chi.at(p).re - want).abs() < 1e-9), "chi_{}", j + 1);
        }
        assert!(ch.is_regular());
        assert!(ch.composition_residual.unwrap() < 1e-6);
        assert!(ch.intermediate_mismatch.iter().all(|&m| m < 1e-9));
        assert!(ch.v1_residual < 1e-9 && ch.v2_residual < 1e-9);

        let sys = partial_wronskian_system_residual(&b).unwrap();
        assert!(sys.residual < 1e-8, "{sys:?}");
    }

    #[test]
    fn doubled_eigenvalue_gives_second_order_constant() {
        let g = Grid::default();
        let b = JordanBasis::new(
            &free(g),
            vec![
                Chain::eigen(c(-1.0), ClosedForm::Exp { k: c(1.0) }.sample(&g)),
                Chain::eigen(c(-1.0), ClosedForm::Exp { k: c(-1.0) }.sample(&g)),
            ],
        )
        .unwrap();
        let q = build_intertwiner(&b, Side::Minus).unwrap();
        assert!(coefficientwise_difference(&q, &LinearDiffOperator::constant_real(g, &[-1.0, 0.0, 1.0])) < 1e-10);
        let qp = build_intertwiner(&b, Side::Plus).unwrap();
        assert!((qp.leading().at(5).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oscillator_ground_state_partner() {
        let g = Grid::default();
        let h = Hamiltonian::new(GridFunction::from_real_fn(g, |x| x * x)).unwrap();
        let b = JordanBasis::new(&h, vec![Chain::eigen(c(1.0), ClosedForm::Hermite { n: 0 }.sample(&g))]).unwrap();
        let v2 = partner_potential(h.potential(), &b).unwrap();
        let oracle = GridFunction::from_real_fn(g, |x| x * x + 2.0);
        assert!(crate::gridfn::relative_difference(&v2, &oracle) < 1e-10);
    }

    #[test]
    fn node_makes_wronskian_singular() {
        let g = Grid::default();
        let h = Hamiltonian::new(GridFunction::from_real_fn(g, |x| x * x)).unwrap();
        let b = JordanBasis::new(&h, vec![Chain::eigen(c(3.0), ClosedForm::Hermite { n: 1 }.sample(&g))]).unwrap();
        match build_intertwiner(&b, Side::Minus) {
            Err(Error::SingularWronskian { zeros }) => assert!(zeros.iter().any(|z| z.abs() < 0.02)),
            other => panic!("expected singular Wronskian, got {other:?}"),
        }
    }

    #[test]
    fn hermite_pair_flags_singular_intermediate() {
        let g = Grid::default();
        let h = Hamiltonian::new(GridFunction::from_real_fn(g, |x| x * x)).unwrap();
        let chains = vec![
            Chain::eigen(c(3.0), ClosedForm::Hermite { n: 1 }.sample(&g)),
            Chain::eigen(c(5.0), ClosedForm::Hermite { n: 2 }.sample(&g)),
        ];
        let b = JordanBasis::new(&h, chains).unwrap();
        let ch = chain_factorize(&b).unwrap();
        assert!(ch.singular_flags.iter().any(|&f| f));
        assert!(ch.composition_residual.is_none());
        assert_eq!(singular_levels(&b).unwrap(), vec![2]);
    }

    #[test]
    fn soliton_system_residual() {
        let g = Grid::default();
        let chains = vec![
            Chain::eigen(c(-1.0), ClosedForm::Cosh { k: 1.0 }.sample(&g)),
            Chain::eigen(c(-4.0), ClosedForm::Sinh { k: 2.0 }.sample(&g)),
            Chain::eigen(c(-9.0), ClosedForm::Cosh { k: 3.0 }.sample(&g)),
        ];
        let b = JordanBasis::new(&free(g), chains).unwrap();
        let sys = partial_wronskian_system_residual(&b).unwrap();
        assert!(sys.residual < 1e-6, "{sys:?}");
        let v2 = partner_potential(b.potential(), &b).unwrap();
        let oracle = GridFunction::from_real_fn(g, |x| -12.0 / x.cosh().powi(2));
        assert!(crate::gridfn::relative_difference(&v2, &oracle) < 1e-9);
    }

    #[test]
    fn rejects_three_chains_on_one_eigenvalue() {
        let g = Grid::new(6.0, 513).unwrap();
        let chains = vec![
            Chain::eigen(c(-1.0), ClosedForm::Exp { k: c(1.0) }.sample(&g)),
            Chain::eigen(c(-1.0), ClosedForm::Exp { k: c(-1.0) }.sample(&g)),
            Chain::eigen(c(-1.0), ClosedForm::Cosh { k: 1.0 }.sample(&g)),
        ];
        assert!(matches!(JordanBasis::new(&free(g), chains), Err(Error::NonCanonicalBasis(_))));
    }

    #[test]
    fn rejects_broken_chain() {
        let g = Grid::new(6.0, 513).unwrap();
        let chains = vec![Chain::eigen(c(-4.0), ClosedForm::Exp { k: c(1.0) }.sample(&g))];
        assert!(matches!(JordanBasis::new(&free(g), chains), Err(Error::NonCanonicalBasis(_))));
    }
}
