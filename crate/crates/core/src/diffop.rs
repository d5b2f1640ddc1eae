//! Linear differential operators `sum_k c_k(x) d^k/dx^k` with grid-function
//! coefficients, Schrödinger Hamiltonians, and intertwining residuals.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gridfn::{max_abs, Grid, GridFunction, C64};

/// Coefficientwise relative tolerance for operator equality.
pub const TAU_OP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDiffOperator {
    coeffs: Vec<GridFunction>,
}

impl LinearDiffOperator {
    /// `coeffs[k]` multiplies `d^k/dx^k`.
    pub fn new(coeffs: Vec<GridFunction>) -> Result<Self> {
        let first = coeffs.first().ok_or(Error::Empty("operator needs at least one coefficient"))?;
        for c in &coeffs {
            first.same_grid(c)?;
        }
        Ok(LinearDiffOperator { coeffs })
    }

    pub fn identity(grid: Grid) -> Self {
        Self::constant(grid, &[C64::new(1.0, 0.0)])
    }

    /// Constant coefficients in ascending order of derivative.
    pub fn constant(grid: Grid, coeffs: &[C64]) -> Self {
        let coeffs = coeffs.iter().map(|&c| GridFunction::constant(grid, c)).collect();
        LinearDiffOperator { coeffs }
    }

    pub fn constant_real(grid: Grid, coeffs: &[f64]) -> Self {
        let c: Vec<C64> = coeffs.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self::constant(grid, &c)
    }

    /// `d/dx + chi(x)`.
    pub fn first_order(chi: GridFunction) -> Self {
        let grid = *chi.grid();
        LinearDiffOperator { coeffs: vec![chi, GridFunction::constant(grid, C64::new(1.0, 0.0))] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn grid(&self) -> &Grid {
        self.coeffs[0].grid()
    }

    pub fn coeffs(&self) -> &[GridFunction] {
        &self.coeffs
    }

    /// Coefficient of `d^k/dx^k`; zero beyond the order.
    pub fn coeff(&self, k: usize) -> GridFunction {
        self.coeffs.get(k).cloned().unwrap_or_else(|| GridFunction::zeros(*self.grid()))
    }

    pub fn leading(&self) -> &GridFunction {
        &self.coeffs[self.order()]
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.grid_check(f)?;
        let mut out = self.coeffs[0].zip_with(f, |c, v| c * v)?;
        let mut deriv = f.clone();
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            deriv = if k <= 4 { f.derivative(k)? } else { deriv.derivative(1)? };
            for (o, (&ci, &di)) in out.values_mut().iter_mut().zip(c.values().iter().zip(deriv.values())) {
                *o += ci * di;
            }
        }
        Ok(out)
    }

    /// `self ∘ other`, expanded by the Leibniz rule.
    pub fn compose(&self, other: &LinearDiffOperator) -> Result<LinearDiffOperator> {
        if self.grid() != other.grid() {
            return Err(Error::GridMismatch);
        }
        let grid = *self.grid();
        let order = self.order() + other.order();
        let mut out: Vec<GridFunction> = (0..=order).map(|_| GridFunction::zeros(grid)).collect();
        let max_i = self.order();
        let mut b_derivs: Vec<Vec<GridFunction>> = Vec::with_capacity(other.coeffs.len());
        for b in &other.coeffs {
            let mut ds = vec![b.clone()];
            for m in 1..=max_i {
                ds.push(b.derivative_n(m)?);
            }
            b_derivs.push(ds);
        }
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, bd) in b_derivs.iter().enumerate() {
                for (m, bm) in bd.iter().enumerate().take(i + 1) {
                    let binom = binomial(i, m) as f64;
                    let target = &mut out[i - m + j];
                    for ((t, &av), &bv) in target.values_mut().iter_mut().zip(a.values()).zip(bm.values()) {
                        *t += av * bv * binom;
                    }
                }
            }
        }
        Ok(LinearDiffOperator { coeffs: out })
    }

    /// Formal transpose `sum_k (-d/dx)^k ∘ c_k`.
    pub fn transpose(&self) -> Result<LinearDiffOperator> {
        let grid = *self.grid();
        let n = self.order();
        let mut out: Vec<GridFunction> = (0..=n).map(|_| GridFunction::zeros(grid)).collect();
        for (k, c) in self.coeffs.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            for m in 0..=k {
                let cm = c.derivative_n(m)?;
                let w = sign * binomial(k, m) as f64;
                for (t, &v) in out[k - m].values_mut().iter_mut().zip(cm.values()) {
                    *t += v * w;
                }
            }
        }
        Ok(LinearDiffOperator { coeffs: out })
    }

    pub fn add(&self, other: &LinearDiffOperator) -> Result<LinearDiffOperator> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &LinearDiffOperator) -> Result<LinearDiffOperator> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &LinearDiffOperator, sign: f64) -> Result<LinearDiffOperator> {
        if self.grid() != other.grid() {
            return Err(Error::GridMismatch);
        }
        let n = self.order().max(other.order());
        let coeffs = (0..=n)
            .map(|k| self.coeff(k).zip_with(&other.coeff(k), |a, b| a + b * sign))
            .collect::<Result<Vec<_>>>()?;
        Ok(LinearDiffOperator { coeffs })
    }

    pub fn scale(&self, c: C64) -> LinearDiffOperator {
        LinearDiffOperator { coeffs: self.coeffs.iter().map(|f| f.scale(c)).collect() }
    }

    /// Largest interior imaginary part over all coefficients, relative to the
    /// largest coefficient magnitude.
    pub fn relative_imag(&self) -> f64 {
        let range = self.grid().interior();
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(max_abs(&c.values()[range.clone()])));
        let imag = self
            .coeffs
            .iter()
            .fold(0.0f64, |m, c| c.values()[range.clone()].iter().fold(m, |m, v| m.max(v.im.abs())));
        if scale == 0.0 {
            0.0
        } else {
            imag / scale
        }
    }

    /// Real parts of all coefficients.
    pub fn real_part(&self) -> LinearDiffOperator {
        LinearDiffOperator { coeffs: self.coeffs.iter().map(|c| c.real_part()).collect() }
    }

    /// Writes `x,c0_re,c0_im,...,cN_re,cN_im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let grid = *self.grid();
        let mut out = String::from("x");
        for k in 0..=self.order() {
            let _ = write!(out, ",c{k}_re,c{k}_im");
        }
        out.push('\n');
        for i in 0..grid.n_points() {
            let _ = write!(out, "{:.16e}", grid.x(i));
            for c in &self.coeffs {
                let v = c.at(i);
                let _ = write!(out, ",{:.16e},{:.16e}", v.re, v.im);
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    fn grid_check(&self, f: &GridFunction) -> Result<()> {
        if self.grid() == f.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Composes factors left to right (`factors[0] ∘ factors[1] ∘ ...`) by
/// pairing neighbours in a balanced tree.
pub fn compose_all(factors: &[LinearDiffOperator]) -> Result<LinearDiffOperator> {
    match factors.len() {
        0 => Err(Error::Empty("no factors to compose")),
        1 => Ok(factors[0].clone()),
        n => {
            let (left, right) = factors.split_at(n / 2);
            compose_all(left)?.compose(&compose_all(right)?)
        }
    }
}

/// Coefficientwise interior max-norm of `a - b` relative to the largest
/// coefficient magnitude of either operator.
pub fn operator_difference(a: &LinearDiffOperator, b: &LinearDiffOperator) -> f64 {
    let range = a.grid().interior();
    let n = a.order().max(b.order());
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..=n {
        let (ak, bk) = (a.coeff(k), b.coeff(k));
        for i in range.clone() {
            diff = diff.max((ak.at(i) - bk.at(i)).norm());
            scale = scale.max(ak.at(i).norm()).max(bk.at(i).norm());
        }
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Like [`operator_difference`] but each coefficient is compared on its own
/// scale, so a small lower-order coefficient is not masked by a large one.
pub fn coefficientwise_difference(a: &LinearDiffOperator, b: &LinearDiffOperator) -> f64 {
    let range = a.grid().interior();
    let n = a.order().max(b.order());
    let mut worst = 0.0f64;
    for k in 0..=n {
        let (ak, bk) = (a.coeff(k), b.coeff(k));
        let scale = max_abs(&ak.values()[range.clone()]).max(max_abs(&bk.values()[range.clone()])).max(1.0);
        let diff = range.clone().fold(0.0f64, |m, i| m.max((ak.at(i) - bk.at(i)).norm()));
        worst = worst.max(diff / scale);
    }
    worst
}

/// `h = -d²/dx² + V(x)` with a real potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    potential: GridFunction,
}

impl Hamiltonian {
    pub fn new(potential: GridFunction) -> Result<Self> {
        potential.check_finite()?;
        if !potential.is_real() {
            return Err(Error::ComplexPotential { max_imag: potential.max_imag() });
        }
        Ok(Hamiltonian { potential: potential.real_part() })
    }

    pub fn potential(&self) -> &GridFunction {
        &self.potential
    }

    pub fn grid(&self) -> &Grid {
        self.potential.grid()
    }

    pub fn as_operator(&self) -> LinearDiffOperator {
        let grid = *self.grid();
        LinearDiffOperator {
            coeffs: vec![
                self.potential.clone(),
                GridFunction::zeros(grid),
                GridFunction::constant(grid, C64::new(-1.0, 0.0)),
            ],
        }
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        f.same_grid(&self.potential)?;
        let d2 = f.derivative(2)?;
        Ok(GridFunction::from_vec(
            *f.grid(),
            f.values()
                .iter()
                .zip(d2.values())
                .zip(self.potential.values())
                .map(|((&v, &dv), &pot)| pot * v - dv)
                .collect(),
        ))
    }

    /// `V, V', ..., V^(order)` by finite differences.
    pub fn potential_derivatives(&self, order: usize) -> Result<Vec<GridFunction>> {
        let mut out = vec![self.potential.clone()];
        for k in 1..=order {
            out.push(self.potential.derivative_n(k)?);
        }
        Ok(out)
    }
}

/// Gaussian bumps `exp(-(x - c)^2)` at five centres spread over the middle
/// third of the window.
pub fn gaussian_test_set(grid: &Grid) -> Vec<GridFunction> {
    let l = grid.half_width();
    [-l / 3.0, -l / 6.0, 0.0, l / 6.0, l / 3.0]
        .iter()
        .map(|&c| GridFunction::from_real_fn(*grid, move |x| (-(x - c) * (x - c)).exp()))
        .collect()
}

/// `max_f |(q h1 - h2 q) f| / |q h1 f|` over the interior.
pub fn intertwining_residual(
    q: &LinearDiffOperator,
    hplus: &Hamiltonian,
    hminus: &Hamiltonian,
    test_set: &[GridFunction],
) -> Result<f64> {
    if test_set.is_empty() {
        return Err(Error::Empty("intertwining residual needs test functions"));
    }
    let mut worst = 0.0f64;
    for f in test_set {
        let left = q.apply(&hplus.apply(f)?)?;
        let right = hminus.apply(&q.apply(f)?)?;
        let range = f.grid().interior();
        let scale = max_abs(&left.values()[range.clone()]);
        let diff = range.clone().fold(0.0f64, |m, i| m.max((left.at(i) - right.at(i)).norm()));
        worst = worst.max(if scale == 0.0 { diff } else { diff / scale });
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(6.0, 1025).unwrap()
    }

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    #[test]
    fn kernel_element_of_first_order() {
        let g = grid();
        let q = LinearDiffOperator::constant_real(g, &[-1.0, 1.0]);
        let f = GridFunction::from_real_fn(g, f64::exp);
        assert!(q.apply(&f).unwrap().interior_max_abs() / f.interior_max_abs() < 1e-9);
    }

    #[test]
    fn minus_second_derivative_of_sine() {
        let g = grid();
        let q = LinearDiffOperator::constant_real(g, &[0.0, 0.0, -1.0]);
        let f = GridFunction::from_real_fn(g, f64::sin);
        let r = q.apply(&f).unwrap();
        for i in g.interior() {
            assert!((r.at(i) - f.at(i)).norm() < 1e-9);
        }
    }

    #[test]
    fn complex_exponential_kernel() {
        let g = grid();
        let q = LinearDiffOperator::constant_real(g, &[2.0, -2.0, 1.0]);
        let f = GridFunction::from_fn(g, |x| (C64::new(1.0, 1.0) * x).exp());
        assert!(q.apply(&f).unwrap().interior_max_abs() / f.interior_max_abs() < 1e-9);
    }

    #[test]
    fn compose_constant_factors() {
        let g = grid();
        let f = |k: f64| LinearDiffOperator::constant_real(g, &[-k, 1.0]);
        let two = f(1.0).compose(&f(2.0)).unwrap();
        assert!(operator_difference(&two, &LinearDiffOperator::constant_real(g, &[2.0, -3.0, 1.0])) < 1e-14);
        let three = compose_all(&[f(1.0), f(2.0), f(3.0)]).unwrap();
        let want = LinearDiffOperator::constant_real(g, &[-6.0, 11.0, -6.0, 1.0]);
        assert!(operator_difference(&three, &want) < 1e-14);
    }

    #[test]
    fn compose_with_variable_coefficient() {
        let g = grid();
        let a = LinearDiffOperator::new(vec![GridFunction::from_real_fn(g, |x| x), GridFunction::constant(g, c(1.0))])
            .unwrap();
        let d = LinearDiffOperator::constant_real(g, &[0.0, 1.0]);
        let r = a.compose(&d).unwrap();
        assert_eq!(r.order(), 2);
        assert!(r.coeff(0).max_abs() < 1e-12);
        for i in g.interior() {
            assert!((r.coeff(1).at(i).re - g.x(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_examples() {
        let g = grid();
        let q = LinearDiffOperator::constant_real(g, &[-2.0, 1.0]);
        let t = q.transpose().unwrap();
        assert!(operator_difference(&t, &LinearDiffOperator::constant_real(g, &[-2.0, -1.0])) < 1e-14);

        let b = GridFunction::from_real_fn(g, |x| x);
        let cc = GridFunction::from_real_fn(g, |x| x * x);
        let q2 = LinearDiffOperator::new(vec![cc, b, GridFunction::constant(g, c(1.0))]).unwrap();
        let t2 = q2.transpose().unwrap();
        let want = LinearDiffOperator::new(vec![
            GridFunction::from_real_fn(g, |x| x * x - 1.0),
            GridFunction::from_real_fn(g, |x| -x),
            GridFunction::constant(g, c(1.0)),
        ])
        .unwrap();
        assert!(operator_difference(&t2, &want) < 1e-10);
    }

    #[test]
    fn hamiltonian_is_self_transposed() {
        let g = grid();
        let h = Hamiltonian::new(GridFunction::from_real_fn(g, |x| -2.0 / x.cosh().powi(2))).unwrap();
        let op = h.as_operator();
        assert!(operator_difference(&op.transpose().unwrap(), &op) < 1e-10);
    }

    #[test]
    fn soliton_darboux_pair_intertwines() {
        let g = Grid::default();
        let q = LinearDiffOperator::first_order(GridFunction::from_real_fn(g, |x| -x.tanh()));
        let h1 = Hamiltonian::new(GridFunction::zeros(g)).unwrap();
        let h2 = Hamiltonian::new(GridFunction::from_real_fn(g, |x| -2.0 / x.cosh().powi(2))).unwrap();
        let r = intertwining_residual(&q, &h1, &h2, &gaussian_test_set(&g)).unwrap();
        assert!(r < 1e-7, "residual {r:e}");
    }

    #[test]
    fn identity_intertwines_equal_hamiltonians() {
        let g = grid();
        let h = Hamiltonian::new(GridFunction::from_real_fn(g, |x| x * x)).unwrap();
        let r = intertwining_residual(&LinearDiffOperator::identity(g), &h, &h, &gaussian_test_set(&g)).unwrap();
        assert!(r < 1e-14);
    }

    #[test]
    fn derivative_does_not_intertwine_oscillators() {
        let g = grid();
        let h = Hamiltonian::new(GridFunction::from_real_fn(g, |x| x * x)).unwrap();
        let d = LinearDiffOperator::constant_real(g, &[0.0, 1.0]);
        let r = intertwining_residual(&d, &h, &h, &gaussian_test_set(&g)).unwrap();
        assert!(r > 0.1);
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let g = grid();
        let h = Hamiltonian::new(GridFunction::zeros(g)).unwrap();
        assert!(intertwining_residual(&LinearDiffOperator::identity(g), &h, &h, &[]).is_err());
    }

    #[test]
    fn complex_potential_is_rejected() {
        let g = grid();
        let v = GridFunction::from_fn(g, |x| C64::new(x, 0.5));
        assert!(matches!(Hamiltonian::new(v), Err(Error::ComplexPotential { .. })));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(6, 0), 1);
        assert_eq!(binomial(3, 4), 0);
    }
}
