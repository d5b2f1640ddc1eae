//! Matrix S of an intertwiner, its Jordan structure, the polynomial closure
//! `q^+ q^- = P_N(h^+)`, minimization of strippable operators and the
//! classification of second-order intertwiners.

use nalgebra::DMatrix;

use crate::crum::{build_intertwiner, JordanBasis, Side};
use crate::diffop::{operator_difference, Hamiltonian, LinearDiffOperator};
use crate::error::{Error, Result};
use crate::gridfn::{count_sign_changes, identity_residual, Grid, GridFunction, C64};
use crate::linalg;
use crate::ode::{self, REFINE};

/// Default Jordan tolerance for exactly known matrices.
pub const JORDAN_TOL: f64 = 1e-6;
/// Clustering tolerance for matrices obtained by collocation.
pub const NUMERIC_JORDAN_TOL: f64 = 1e-3;
/// Largest allowed entrywise gap between declared and collocated S.
pub const S_MISMATCH_TOL: f64 = 1e-3;
/// Largest allowed condition number of a collocation system.
pub const MAX_CONDITION: f64 = 1e12;

/// The declared matrix together with its collocation estimate.
#[derive(Debug, Clone)]
pub struct SMatrix {
    /// `h phi_n = sum_m S_nm phi_m`, rows and columns in declaration order
    /// (chains in order, eigenfunction first within a chain).
    pub entries: DMatrix<C64>,
    pub collocated: DMatrix<C64>,
    /// Largest entry of `|collocated - entries|` over `max(1, |S|)`.
    pub mismatch: f64,
    /// Condition number of the collocation system.
    pub condition: f64,
    /// Worst relative residual of `h phi_n - sum_m S_nm phi_m`.
    pub action_residual: f64,
}

impl SMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Declared functions in declaration order.
fn declared_functions(basis: &JordanBasis) -> Vec<GridFunction> {
    basis.chains().iter().flat_map(|c| c.functions.iter().map(|f| f.value.clone())).collect()
}

/// Builds S from the chain structure and re-derives it by least-squares
/// collocation of `h phi_n` (finite differences) at `4N` interior points.
pub fn compute_smatrix(basis: &JordanBasis) -> Result<SMatrix> {
    let n = basis.dim();
    let mut s = DMatrix::<C64>::zeros(n, n);
    let mut row = 0;
    for chain in basis.chains() {
        for i in 0..chain.len() {
            s[(row, row)] = chain.lambda;
            if i > 0 {
                s[(row, row - 1)] = C64::new(1.0, 0.0);
            }
            row += 1;
        }
    }
    let h = basis.hamiltonian();
    let functions = declared_functions(basis);
    let images = functions.iter().map(|f| h.apply(f)).collect::<Result<Vec<_>>>()?;
    let (collocated, condition) = collocate(&functions, &images)?;
    let scale = s.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    let mismatch = (&collocated - &s).iter().fold(0.0f64, |m, v| m.max(v.norm())) / scale;
    let action_residual = action_residual(&s, &functions, &images)?;
    if !(mismatch <= S_MISMATCH_TOL) {
        return Err(Error::SMatrixMismatch(mismatch));
    }
    Ok(SMatrix { entries: s, collocated, mismatch, condition, action_residual })
}

/// Solves `images[n](x_p) = sum_m S_nm functions[m](x_p)` in the least-squares
/// sense at `4N` interior points.
pub fn collocate(functions: &[GridFunction], images: &[GridFunction]) -> Result<(DMatrix<C64>, f64)> {
    let n = functions.len();
    let grid = *functions[0].grid();
    let range = grid.interior();
    let rows = 4 * n;
    let span = (range.end - 1 - range.start) as f64;
    let points: Vec<usize> =
        (0..rows).map(|r| range.start + ((r as f64 + 0.5) / rows as f64 * span).round() as usize).collect();
    let a = DMatrix::from_fn(rows, n, |r, m| functions[m].at(points[r]));
    let b = DMatrix::from_fn(rows, n, |r, k| images[k].at(points[r]));
    let (x, cond) = linalg::least_squares(&a, &b).ok_or(Error::IllConditionedBasis(f64::INFINITY))?;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditionedBasis(cond));
    }
    // x is N x N with column k holding row k of S
    Ok((x.transpose(), cond))
}

fn action_residual(s: &DMatrix<C64>, functions: &[GridFunction], images: &[GridFunction]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (nrow, img) in images.iter().enumerate() {
        let mut combo = GridFunction::zeros(*img.grid());
        for (m, f) in functions.iter().enumerate() {
            let c = s[(nrow, m)];
            if c.norm() > 0.0 {
                combo = combo.zip_with(f, |a, b| a + b * c)?;
            }
        }
        let neg = -&combo;
        worst = worst.max(identity_residual(&[img, &neg], 0.0));
    }
    Ok(worst)
}

/// One Jordan cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JordanCell {
    pub lambda: C64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanStructure {
    /// Grouped by eigenvalue (first appearance), sizes descending within a
    /// group.
    pub cells: Vec<JordanCell>,
}

impl JordanStructure {
    pub fn dim(&self) -> usize {
        self.cells.iter().map(|c| c.size).sum()
    }

    /// Distinct eigenvalues with their cell sizes (descending).
    pub fn groups(&self) -> Vec<(C64, Vec<usize>)> {
        let mut out: Vec<(C64, Vec<usize>)> = Vec::new();
        for cell in &self.cells {
            match out.iter_mut().find(|(l, _)| *l == cell.lambda) {
                Some((_, sizes)) => sizes.push(cell.size),
                None => out.push((cell.lambda, vec![cell.size])),
            }
        }
        out
    }

    /// Eigenvalues repeated by algebraic multiplicity.
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.cells.iter().flat_map(|c| std::iter::repeat_n(c.lambda, c.size)).collect()
    }
}

fn spectral_norm(s: &DMatrix<C64>) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    s.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

fn is_lower_triangular(s: &DMatrix<C64>) -> bool {
    (0..s.nrows()).all(|i| (i + 1..s.ncols()).all(|j| s[(i, j)].norm() == 0.0))
}

fn is_upper_triangular(s: &DMatrix<C64>) -> bool {
    (0..s.nrows()).all(|i| (0..i).all(|j| s[(i, j)].norm() == 0.0))
}

/// Cell decomposition of `s`. Eigenvalues are read off the diagonal of a
/// triangular matrix and otherwise taken as roots of the characteristic
/// polynomial; they are clustered by single linkage at `tol * |S|` and each
/// cluster is represented by its mean. Cell sizes follow from the ranks of
/// `(S - lambda I)^k`, cut at a threshold that grows with the power.
pub fn jordan_structure(s: &DMatrix<C64>, tol: f64) -> Result<JordanStructure> {
    let n = s.nrows();
    if n == 0 || n != s.ncols() {
        return Err(Error::Precondition("S must be square and nonempty".into()));
    }
    if n > crate::crum::MAX_ORDER {
        return Err(Error::OrderTooLarge(n));
    }
    let norm = spectral_norm(s).max(1.0);
    let eigen: Vec<C64> = if is_lower_triangular(s) || is_upper_triangular(s) {
        (0..n).map(|i| s[(i, i)]).collect()
    } else {
        linalg::poly_roots(&linalg::char_poly(s))
    };
    let clusters = cluster(&eigen, tol * norm);
    for a in 0..clusters.len() {
        for b in a + 1..clusters.len() {
            let gap = clusters[a]
                .iter()
                .flat_map(|x| clusters[b].iter().map(move |y| (x - y).norm()))
                .fold(f64::INFINITY, f64::min);
            if gap < 3.0 * tol * norm {
                return Err(Error::EigenvalueResolution);
            }
        }
    }
    let rank_tol = (tol * JORDAN_TOL).sqrt();
    let id = DMatrix::<C64>::identity(n, n);
    let mut cells = Vec::new();
    for members in &clusters {
        let m = members.len();
        let lambda = members.iter().sum::<C64>() / m as f64;
        let shifted = s - &id * lambda;
        let step = spectral_norm(&shifted).max(1.0);
        let mut ranks = vec![n];
        let mut power = id.clone();
        for k in 1..=m + 1 {
            power = &power * &shifted;
            let threshold = rank_tol * k as f64 * norm * step.powi(k as i32 - 1);
            ranks.push(linalg::rank(&power, threshold));
        }
        let mut sizes = Vec::new();
        for k in 1..=m {
            let at_least_k = ranks[k - 1] - ranks[k];
            let at_least_next = ranks[k] - ranks[k + 1];
            for _ in 0..at_least_k.saturating_sub(at_least_next) {
                sizes.push(k);
            }
        }
        if sizes.iter().sum::<usize>() != m {
            return Err(Error::EigenvalueResolution);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        cells.extend(sizes.into_iter().map(|size| JordanCell { lambda, size }));
    }
    Ok(JordanStructure { cells })
}

fn cluster(values: &[C64], radius: f64) -> Vec<Vec<C64>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if (values[i] - values[j]).norm() <= radius {
                let (from, to) = (label[i], label[j]);
                for l in label.iter_mut() {
                    if *l == from {
                        *l = to;
                    }
                }
            }
        }
    }
    let mut out: Vec<(usize, Vec<C64>)> = Vec::new();
    for i in 0..n {
        match out.iter_mut().find(|(l, _)| *l == label[i]) {
            Some((_, v)) => v.push(values[i]),
            None => out.push((label[i], vec![values[i]])),
        }
    }
    out.into_iter().map(|(_, v)| v).collect()
}

/// `det(E I - S)` in ascending powers of `E`.
pub fn closure_polynomial(s: &DMatrix<C64>) -> Vec<C64> {
    linalg::char_poly(s)
}

/// `sum_k p_k h^k f`.
pub fn apply_polynomial(p: &[C64], h: &Hamiltonian, f: &GridFunction) -> Result<GridFunction> {
    let mut acc = GridFunction::zeros(*f.grid());
    let mut power = f.clone();
    for (k, &c) in p.iter().enumerate() {
        if k > 0 {
            power = h.apply(&power)?;
        }
        acc = acc.zip_with(&power, |a, b| a + b * c)?;
    }
    Ok(acc)
}

/// `sum_k p_k h^k` as an operator.
pub fn polynomial_operator(p: &[C64], h: &Hamiltonian) -> Result<LinearDiffOperator> {
    let grid = *h.grid();
    let hop = h.as_operator();
    let mut acc = LinearDiffOperator::constant(grid, &[p.first().copied().unwrap_or(C64::new(0.0, 0.0))]);
    let mut power = LinearDiffOperator::identity(grid);
    for &c in p.iter().skip(1) {
        power = power.compose(&hop)?;
        acc = acc.add(&power.scale(c))?;
    }
    Ok(acc)
}

/// Worst relative residual of `(q^+ q^- - P(h^+)) f` and
/// `(q^- q^+ - P(h^-)) f` over the test set, `q^+ = (q^-)^t`. Both sides are
/// formed as operators first, so the test functions are differentiated once
/// rather than through stacked high-order stencils.
pub fn closure_residual(
    q_minus: &LinearDiffOperator,
    h_plus: &Hamiltonian,
    h_minus: &Hamiltonian,
    s: &DMatrix<C64>,
    tests: &[GridFunction],
) -> Result<f64> {
    if tests.is_empty() {
        return Err(Error::Empty("closure residual needs test functions"));
    }
    let q_plus = q_minus.transpose()?;
    let p = closure_polynomial(s);
    let mut worst = 0.0f64;
    for (product, h) in [(q_plus.compose(q_minus)?, h_plus), (q_minus.compose(&q_plus)?, h_minus)] {
        let difference = product.sub(&polynomial_operator(&p, h)?)?;
        for f in tests {
            let lhs = product.apply(f)?;
            let diff = difference.apply(f)?;
            let range = f.grid().interior();
            let scale = range.clone().fold(0.0f64, |m, i| m.max(lhs.at(i).norm()));
            let num = range.fold(0.0f64, |m, i| m.max(diff.at(i).norm()));
            worst = worst.max(if scale > 0.0 { num / scale } else { num });
        }
    }
    Ok(worst)
}

/// A basis of `ker q` from unit initial data at `x = 0`.
pub fn operator_kernel(q: &LinearDiffOperator) -> Result<Vec<GridFunction>> {
    let n = q.order();
    if n == 0 {
        return Ok(Vec::new());
    }
    let grid = *q.grid();
    let coeffs: Vec<Vec<C64>> = q.coeffs().iter().map(|c| c.refine(REFINE)).collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut init = vec![C64::new(0.0, 0.0); n];
        init[k] = C64::new(1.0, 0.0);
        let states = ode::integrate_from_center(&grid, &init, |p, s, d| {
            let lead = coeffs[n][p];
            let mut top = C64::new(0.0, 0.0);
            for m in 0..n {
                top += coeffs[m][p] * s[m];
                if m + 1 < n {
                    d[m] = s[m + 1];
                }
            }
            d[n - 1] = -top / lead;
        })?;
        out.push(GridFunction::new(grid, states.iter().map(|s| s[0]).collect())?);
    }
    Ok(out)
}

/// S of `q^+ = (q^-)^t`: the action of `h^-` on a numerically integrated
/// basis of `ker q^+`, by collocation.
pub fn conjugate_smatrix(q_minus: &LinearDiffOperator, h_minus: &Hamiltonian) -> Result<DMatrix<C64>> {
    let q_plus = q_minus.transpose()?;
    let kernel = operator_kernel(&q_plus)?;
    let images = kernel.iter().map(|f| h_minus.apply(f)).collect::<Result<Vec<_>>>()?;
    Ok(collocate(&kernel, &images)?.0)
}

/// Comparison of the spectra of `S^-` and `S^+`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumComparison {
    pub minus: JordanStructure,
    pub plus: JordanStructure,
    /// Largest distance between matched eigenvalues.
    pub eigenvalue_gap: f64,
    /// Cell-size multisets agree eigenvalue by eigenvalue.
    pub cells_match: bool,
}

pub fn compare_spectra(s_minus: &DMatrix<C64>, s_plus: &DMatrix<C64>) -> Result<SpectrumComparison> {
    let minus = jordan_structure(s_minus, JORDAN_TOL)?;
    let plus = jordan_structure(s_plus, NUMERIC_JORDAN_TOL)?;
    let gm = minus.groups();
    let gp = plus.groups();
    let mut gap = 0.0f64;
    let mut cells_match = gm.len() == gp.len();
    for (lambda, sizes) in &gm {
        let best = gp.iter().min_by(|a, b| (a.0 - lambda).norm().total_cmp(&(b.0 - lambda).norm()));
        match best {
            Some((mu, other)) => {
                gap = gap.max((mu - lambda).norm());
                cells_match &= other == sizes;
            }
            None => {
                gap = f64::INFINITY;
                cells_match = false;
            }
        }
    }
    Ok(SpectrumComparison { minus, plus, eigenvalue_gap: gap, cells_match })
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone)]
pub struct Minimization {
    /// The non-minimizable part.
    pub p: LinearDiffOperator,
    /// `(lambda, power)` of each stripped factor `(lambda - h)^power`.
    pub stripped: Vec<(C64, usize)>,
    /// Kernel basis of `p`; `None` when `p` is the identity.
    pub reduced_basis: Option<JordanBasis>,
    /// Fitted `c` in `q = c * p (lambda - h)^k ...`.
    pub scale: C64,
    /// Coefficientwise residual of that identity.
    pub residual: f64,
}

impl Minimization {
    pub fn reduced_order(&self) -> usize {
        self.p.order()
    }
}

fn same_eigenvalue(a: C64, b: C64) -> bool {
    (a - b).norm() <= 1e-9 * (1.0 + a.norm().max(b.norm()))
}

/// Splits off `prod (lambda_l - h)^{dk_l}` for every eigenvalue carried by
/// two chains (`dk_l` = the shorter length). The reduced basis drops the
/// shorter chain and keeps the lowest `K - dk_l` functions of the longer one.
pub fn minimize(q: &LinearDiffOperator, basis: &JordanBasis) -> Result<Minimization> {
    let chains = basis.chains();
    let mut keep: Vec<usize> = chains.iter().map(|c| c.len()).collect();
    let mut stripped = Vec::new();
    for a in 0..chains.len() {
        for b in a + 1..chains.len() {
            if same_eigenvalue(chains[a].lambda, chains[b].lambda) {
                let (ka, kb) = (chains[a].len(), chains[b].len());
                let dk = ka.min(kb);
                stripped.push((chains[a].lambda, dk));
                let (short, long) = if kb <= ka { (b, a) } else { (a, b) };
                keep[short] = 0;
                keep[long] = chains[long].len() - dk;
            }
        }
    }
    let reduced_basis = basis.truncated(&keep)?;
    let grid = *basis.grid();
    let p = match &reduced_basis {
        Some(rb) => build_intertwiner(rb, Side::Minus)?,
        None => LinearDiffOperator::identity(grid),
    };
    let h = basis.hamiltonian().as_operator();
    let mut product = p.clone();
    for &(lambda, k) in &stripped {
        let shift = LinearDiffOperator::constant(grid, &[lambda]).sub(&h)?;
        for _ in 0..k {
            product = product.compose(&shift)?;
        }
    }
    let scale = fit_scale(q, &product);
    let fitted = product.scale(scale);
    let residual = operator_difference(q, &fitted);
    let unit = (scale - C64::new(1.0, 0.0)).norm().min((scale + C64::new(1.0, 0.0)).norm());
    if !(unit < 1e-6) || !(residual < 1e-5) {
        return Err(Error::MinimizationInconsistent(residual.max(unit)));
    }
    Ok(Minimization { p, stripped, reduced_basis, scale, residual })
}

/// Least-squares `c` minimizing `|q - c r|` over interior coefficient samples.
fn fit_scale(q: &LinearDiffOperator, r: &LinearDiffOperator) -> C64 {
    let n = q.order().max(r.order());
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for k in 0..=n {
        let (a, b) = (q.coeff(k), r.coeff(k));
        for i in q.grid().interior() {
            num += b.at(i).conj() * a.at(i);
            den += b.at(i).norm_sqr();
        }
    }
    if den == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        num / den
    }
}

/// Verdict for a second-order intertwiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrderClass {
    /// Two cells share an eigenvalue.
    Minimizable,
    /// Complex-conjugate eigenvalue pair.
    TypeI,
    /// Real distinct eigenvalues, both transformation functions with zeros.
    TypeII,
    /// One cell of size two whose eigenfunction has a zero.
    TypeIII,
    /// Factorizes through a real nonsingular intermediate Hamiltonian.
    Reducible,
}

impl std::fmt::Display for SecondOrderClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SecondOrderClass::Minimizable => "minimizable",
            SecondOrderClass::TypeI => "type I",
            SecondOrderClass::TypeII => "type II",
            SecondOrderClass::TypeIII => "type III",
            SecondOrderClass::Reducible => "reducible",
        };
        f.write_str(s)
    }
}

/// Classifies `q2` from the Jordan structure of its basis and the zeros of
/// the transformation functions.
pub fn classify2(q2: &LinearDiffOperator, basis: &JordanBasis) -> Result<SecondOrderClass> {
    if q2.order() != 2 || basis.dim() != 2 {
        return Err(Error::Precondition(format!(
            "second-order classification needs order 2 (operator {}, basis {})",
            q2.order(),
            basis.dim()
        )));
    }
    let s = compute_smatrix(basis)?;
    let js = jordan_structure(&s.entries, JORDAN_TOL)?;
    let groups = js.groups();
    if groups.iter().any(|(_, sizes)| sizes.len() > 1) {
        return Ok(SecondOrderClass::Minimizable);
    }
    let chains = basis.chains();
    if groups.len() == 1 {
        let eigenfunction = &chains[0].functions[0].value;
        return Ok(if count_sign_changes(&eigenfunction.real_part())? > 0 {
            SecondOrderClass::TypeIII
        } else {
            SecondOrderClass::Reducible
        });
    }
    let (l1, l2) = (groups[0].0, groups[1].0);
    let imag_scale = 1e-9 * (1.0 + l1.norm().max(l2.norm()));
    if l1.im.abs() > imag_scale || l2.im.abs() > imag_scale {
        if (l1 - l2.conj()).norm() <= imag_scale {
            return Ok(SecondOrderClass::TypeI);
        }
        return Err(Error::Precondition("complex eigenvalues that are not a conjugate pair".into()));
    }
    let mut both = true;
    for chain in chains {
        let f = &chain.functions[0].value;
        let real = rotate_real(f)?;
        both &= count_sign_changes(&real)? > 0;
    }
    Ok(if both { SecondOrderClass::TypeII } else { SecondOrderClass::Reducible })
}

/// Multiplies by the conjugate phase of the peak sample so that a function
/// real up to a constant factor becomes real.
fn rotate_real(f: &GridFunction) -> Result<GridFunction> {
    let peak = f.values().iter().copied().fold(C64::new(0.0, 0.0), |m, v| if v.norm() > m.norm() { v } else { m });
    let rotated = if peak.norm() > 0.0 { f.scale(peak.conj() / peak.norm()) } else { f.clone() };
    rotated.ensure_real()?;
    Ok(rotated.real_part())
}

/// Grid shared by a basis and an operator.
pub fn grid_of(q: &LinearDiffOperator) -> Grid {
    *q.grid()
}
