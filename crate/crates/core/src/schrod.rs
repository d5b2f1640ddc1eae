//! Formal eigenfunctions and associated functions of `h = -d²/dx² + V`,
//! bound states, normalizability at the infinities, and the class-K test.

use crate::diffop::Hamiltonian;
use crate::error::{Error, Result};
use crate::gridfn::{identity_residual, integrate_from_center, Grid, GridFunction, C64};
use crate::ode::{self, REFINE};

/// A transformation function sampled together with its first derivative;
/// higher derivatives follow from the Schrödinger equation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationFunction {
    pub value: GridFunction,
    pub derivative: GridFunction,
}

impl TransformationFunction {
    pub fn new(value: GridFunction, derivative: GridFunction) -> Result<Self> {
        value.same_grid(&derivative)?;
        value.check_finite()?;
        derivative.check_finite()?;
        Ok(TransformationFunction { value, derivative })
    }

    pub fn scale(&self, c: C64) -> Self {
        TransformationFunction { value: self.value.scale(c), derivative: self.derivative.scale(c) }
    }

    pub fn add_scaled(&self, other: &TransformationFunction, c: C64) -> Result<Self> {
        Ok(TransformationFunction {
            value: self.value.zip_with(&other.value, |a, b| a + b * c)?,
            derivative: self.derivative.zip_with(&other.derivative, |a, b| a + b * c)?,
        })
    }
}

/// Closed-form solutions used by the curated examples.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    /// `exp(k x)`; solves `V = 0` at `lambda = -k^2`.
    Exp { k: C64 },
    /// `cosh(k x)`; `V = 0`, `lambda = -k^2`.
    Cosh { k: f64 },
    /// `sinh(k x)`; `V = 0`, `lambda = -k^2`.
    Sinh { k: f64 },
    /// `p(x) exp(k x)` with `p` in ascending coefficients.
    PolyExp { k: C64, poly: Vec<C64> },
    /// `H_n(x) exp(-x^2/2)` (physicists' Hermite); `V = x^2`, `lambda = 2n + 1`.
    Hermite { n: usize },
}

impl ClosedForm {
    /// Parses `name:params` such as `exp:1`, `exp:1,1`, `cosh:3`,
    /// `polyexp:2,0,0,-0.25`, `hermite:2`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = text.split_once(':').unwrap_or((text, ""));
        let nums: Vec<f64> = if params.trim().is_empty() {
            Vec::new()
        } else {
            params
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Parse(format!("closed form '{text}': {e}"))))
                .collect::<Result<_>>()?
        };
        let need = |n: usize| {
            if nums.len() < n {
                Err(Error::Parse(format!("closed form '{text}' needs {n} parameter(s)")))
            } else {
                Ok(())
            }
        };
        match name.trim() {
            "exp" => {
                need(1)?;
                Ok(ClosedForm::Exp { k: C64::new(nums[0], nums.get(1).copied().unwrap_or(0.0)) })
            }
            "cosh" => {
                need(1)?;
                Ok(ClosedForm::Cosh { k: nums[0] })
            }
            "sinh" => {
                need(1)?;
                Ok(ClosedForm::Sinh { k: nums[0] })
            }
            "polyexp" => {
                need(3)?;
                Ok(ClosedForm::PolyExp {
                    k: C64::new(nums[0], nums[1]),
                    poly: nums[2..].iter().map(|&a| C64::new(a, 0.0)).collect(),
                })
            }
            "hermite" => {
                need(1)?;
                if nums[0] < 0.0 || nums[0].fract() != 0.0 {
                    return Err(Error::Parse(format!("hermite index must be a nonnegative integer, got {}", nums[0])));
                }
                Ok(ClosedForm::Hermite { n: nums[0] as usize })
            }
            other => Err(Error::Parse(format!("unknown closed form '{other}'"))),
        }
    }

    pub fn sample(&self, grid: &Grid) -> TransformationFunction {
        let (value, derivative): (Vec<C64>, Vec<C64>) = grid.xs().into_iter().map(|x| self.eval(x)).unzip();
        TransformationFunction {
            value: GridFunction::from_vec(*grid, value),
            derivative: GridFunction::from_vec(*grid, derivative),
        }
    }

    /// Value and first derivative at `x`.
    pub fn eval(&self, x: f64) -> (C64, C64) {
        match self {
            ClosedForm::Exp { k } => {
                let e = (k * x).exp();
                (e, k * e)
            }
            ClosedForm::Cosh { k } => (C64::new((k * x).cosh(), 0.0), C64::new(k * (k * x).sinh(), 0.0)),
            ClosedForm::Sinh { k } => (C64::new((k * x).sinh(), 0.0), C64::new(k * (k * x).cosh(), 0.0)),
            ClosedForm::PolyExp { k, poly } => {
                let e = (k * x).exp();
                let p = poly.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * x + a);
                let dp = poly
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(C64::new(0.0, 0.0), |acc, (j, &a)| acc * x + a * j as f64);
                (p * e, (dp + k * p) * e)
            }
            ClosedForm::Hermite { n } => {
                let (h, h_prev) = hermite_pair(*n, x);
                let g = (-0.5 * x * x).exp();
                let dh = 2.0 * *n as f64 * h_prev;
                (C64::new(h * g, 0.0), C64::new((dh - x * h) * g, 0.0))
            }
        }
    }
}

/// `(H_n(x), H_{n-1}(x))` by the three-term recurrence (`H_{-1} = 0`).
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Built-in potentials.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinPotential {
    Zero,
    Constant(f64),
    /// `x^2`.
    Oscillator,
    /// Polynomial in ascending coefficients.
    Poly(Vec<f64>),
    /// `-m(m+1) sech^2 x + shift`.
    Soliton { m: usize, shift: f64 },
}

impl BuiltinPotential {
    /// Parses `zero`, `constant:c`, `oscillator`, `poly:c0,c1,...`,
    /// `soliton:m[,shift]`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = text.split_once(':').unwrap_or((text, ""));
        let nums: Vec<f64> = if params.trim().is_empty() {
            Vec::new()
        } else {
            params
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Parse(format!("potential '{text}': {e}"))))
                .collect::<Result<_>>()?
        };
        match (name.trim(), nums.len()) {
            ("zero", 0) => Ok(BuiltinPotential::Zero),
            ("constant", 1) => Ok(BuiltinPotential::Constant(nums[0])),
            ("oscillator", 0) => Ok(BuiltinPotential::Oscillator),
            ("poly", n) if n > 0 => Ok(BuiltinPotential::Poly(nums)),
            ("soliton", 1 | 2) if nums[0] >= 0.0 && nums[0].fract() == 0.0 => {
                Ok(BuiltinPotential::Soliton { m: nums[0] as usize, shift: nums.get(1).copied().unwrap_or(0.0) })
            }
            _ => Err(Error::Parse(format!("unknown or malformed potential '{text}'"))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BuiltinPotential::Zero => 0.0,
            BuiltinPotential::Constant(c) => *c,
            BuiltinPotential::Oscillator => x * x,
            BuiltinPotential::Poly(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            BuiltinPotential::Soliton { m, shift } => {
                let m = *m as f64;
                -m * (m + 1.0) / x.cosh().powi(2) + shift
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> GridFunction {
        GridFunction::from_real_fn(*grid, |x| self.eval(x))
    }
}

/// Where a transformation function comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    ClosedForm(ClosedForm),
    /// `psi(0)` and `psi'(0)`. For an associated function these are added as
    /// a homogeneous part on top of the particular solution that vanishes
    /// with its derivative at the origin.
    Initial { value: C64, slope: C64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformationFunctionSpec {
    pub lambda: C64,
    /// 0 for the eigenfunction, `i` for the `i`-th associated function.
    pub chain_index: usize,
    pub source: Source,
    /// Constant factor applied after construction.
    pub scale: C64,
}

impl TransformationFunctionSpec {
    pub fn new(lambda: C64, chain_index: usize, source: Source) -> Self {
        TransformationFunctionSpec { lambda, chain_index, source, scale: C64::new(1.0, 0.0) }
    }

    /// Samples the function. `lower` is the previous member of the chain and
    /// is required exactly when `chain_index > 0`.
    pub fn realize(&self, h: &Hamiltonian, lower: Option<&GridFunction>) -> Result<TransformationFunction> {
        if self.chain_index > 0 && lower.is_none() {
            return Err(Error::NonCanonicalBasis("associated function without a lower chain member".into()));
        }
        let f = match (&self.source, lower) {
            (Source::ClosedForm(cf), _) => cf.sample(h.grid()),
            (Source::Initial { value, slope }, None) => solve_formal_pair(h, self.lambda, (*value, *slope))?,
            (Source::Initial { value, slope }, Some(g)) => {
                let particular = solve_associated_pair(h, self.lambda, g)?;
                if value.norm() == 0.0 && slope.norm() == 0.0 {
                    particular
                } else {
                    let homogeneous = solve_formal_pair(h, self.lambda, (*value, *slope))?;
                    particular.add_scaled(&homogeneous, C64::new(1.0, 0.0))?
                }
            }
        };
        Ok(f.scale(self.scale))
    }
}

/// Solves `-psi'' + V psi = lambda psi` outward from `x = 0` with
/// `psi(0), psi'(0) = init`.
pub fn solve_formal(h: &Hamiltonian, lambda: C64, init: (C64, C64)) -> Result<GridFunction> {
    Ok(solve_formal_pair(h, lambda, init)?.value)
}

pub fn solve_formal_pair(h: &Hamiltonian, lambda: C64, init: (C64, C64)) -> Result<TransformationFunction> {
    if init.0.norm() == 0.0 && init.1.norm() == 0.0 {
        return Err(Error::Precondition("initial data must not both vanish".into()));
    }
    let grid = *h.grid();
    let v = h.potential().refine(REFINE);
    let states = ode::integrate_from_center(&grid, &[init.0, init.1], |k, s, out| {
        out[0] = s[1];
        out[1] = (v[k] - lambda) * s[0];
    })?;
    split_states(grid, &states, 0, 1)
}

/// A particular solution of `(h - lambda) u = lower` with `u(0) = u'(0) = 0`.
/// The homogeneous pair with initial data `(1, 0)` and `(0, 1)` is carried
/// along and its Wronskian checked for constancy; `u` itself is integrated
/// directly, since the explicit variation-of-parameters product cancels
/// catastrophically when the pair grows exponentially.
pub fn solve_associated(h: &Hamiltonian, lambda: C64, lower: &GridFunction) -> Result<GridFunction> {
    Ok(solve_associated_pair(h, lambda, lower)?.value)
}

pub fn solve_associated_pair(h: &Hamiltonian, lambda: C64, lower: &GridFunction) -> Result<TransformationFunction> {
    let grid = *h.grid();
    lower.same_grid(h.potential())?;
    let v = h.potential().refine(REFINE);
    let g = lower.refine(REFINE);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let states = ode::integrate_from_center(&grid, &[one, zero, zero, one, zero, zero], |k, s, out| {
        let q = v[k] - lambda;
        out[0] = s[1];
        out[1] = q * s[0];
        out[2] = s[3];
        out[3] = q * s[2];
        out[4] = s[5];
        out[5] = q * s[4] - g[k];
    })?;
    let c = &states[grid.center()];
    let w0 = (c[0] * c[3] - c[1] * c[2]).norm();
    if w0 < 1e-12 {
        return Err(Error::DegenerateHomogeneousPair(w0));
    }
    let mut drift = 0.0f64;
    for i in grid.interior() {
        let s = &states[i];
        let w = s[0] * s[3] - s[1] * s[2];
        let scale = (s[0] * s[3]).norm() + (s[1] * s[2]).norm();
        drift = drift.max((w - one).norm() / scale.max(1.0));
    }
    if drift > 1e-6 {
        return Err(Error::WronskianDrift(drift));
    }
    split_states(grid, &states, 4, 5)
}

fn split_states(grid: Grid, states: &[Vec<C64>], a: usize, b: usize) -> Result<TransformationFunction> {
    let value = states.iter().map(|s| s[a]).collect();
    let derivative = states.iter().map(|s| s[b]).collect();
    TransformationFunction::new(GridFunction::new(grid, value)?, GridFunction::new(grid, derivative)?)
}

/// Interior residual of `(h - lambda) f - lower` relative to the largest of
/// the terms `h f`, `lambda f`, `lower`, floored at `max|f|`.
pub fn chain_residual(h: &Hamiltonian, lambda: C64, f: &GridFunction, lower: Option<&GridFunction>) -> Result<f64> {
    let hf = h.apply(f)?;
    let lf = f.scale(-lambda);
    let floor = f.interior_max_abs();
    match lower {
        Some(g) => {
            let ng = -g;
            Ok(identity_residual(&[&hf, &lf, &ng], floor))
        }
        None => Ok(identity_residual(&[&hf, &lf], floor)),
    }
}

/// Result of [`bound_states`].
#[derive(Debug, Clone)]
pub struct BoundStates {
    pub states: Vec<(f64, GridFunction)>,
    /// False when fewer states than requested lie below the asymptotic level.
    pub complete: bool,
}

/// Lowest `count` Dirichlet eigenvalues on `[-L, L]` below the smaller edge
/// value of `V`, by bisection on the node count of the left-shot solution.
pub fn bound_states(h: &Hamiltonian, count: usize) -> Result<BoundStates> {
    if count == 0 {
        return Err(Error::Precondition("count must be at least 1".into()));
    }
    let grid = *h.grid();
    let v = h.potential().re();
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let ceiling = v[0].min(v[v.len() - 1]);
    let vfine: Vec<f64> = h.potential().refine(REFINE).iter().map(|z| z.re).collect();
    let mut states = Vec::new();
    let mut lo = vmin;
    for k in 0..count {
        if nodes(&grid, &vfine, ceiling) <= k {
            return Ok(BoundStates { states, complete: false });
        }
        let mut hi = ceiling;
        let mut a = lo;
        for _ in 0..200 {
            let mid = 0.5 * (a + hi);
            if nodes(&grid, &vfine, mid) > k {
                hi = mid;
            } else {
                a = mid;
            }
            if hi - a < 1e-12 * (1.0 + hi.abs()) {
                break;
            }
        }
        let e = 0.5 * (a + hi);
        states.push((e, eigenfunction(&grid, &vfine, &v, e)));
        lo = e;
    }
    Ok(BoundStates { states, complete: true })
}

fn shoot(grid: &Grid, vfine: &[f64], e: f64, from_left: bool) -> Vec<f64> {
    let n = grid.n_points();
    let dt = grid.spacing() / 4.0;
    let mut out = vec![0.0; n];
    let (mut y, mut dy) = (0.0f64, if from_left { 1.0 } else { -1.0 });
    let f = |k: usize, y: f64, dy: f64| (dy, (vfine[k] - e) * y);
    let sign = if from_left { 1.0 } else { -1.0 };
    let h = dt * sign;
    let last = (n - 1) * REFINE;
    let mut fine: i64 = if from_left { 0 } else { last as i64 };
    let step = if from_left { 2i64 } else { -2 };
    for cell in 0..n - 1 {
        for _ in 0..4 {
            let k0 = fine as usize;
            let km = (fine + step / 2) as usize;
            let k1 = (fine + step) as usize;
            let (a1, b1) = f(k0, y, dy);
            let (a2, b2) = f(km, y + 0.5 * h * a1, dy + 0.5 * h * b1);
            let (a3, b3) = f(km, y + 0.5 * h * a2, dy + 0.5 * h * b2);
            let (a4, b4) = f(k1, y + h * a3, dy + h * b3);
            y += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            dy += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            fine += step;
        }
        let big = y.abs().max(dy.abs());
        if big > 1e100 {
            y /= big;
            dy /= big;
            let idx_range: Box<dyn Iterator<Item = usize>> =
                if from_left { Box::new(0..=cell) } else { Box::new(n - 1 - cell..n) };
            for i in idx_range {
                out[i] /= big;
            }
        }
        let idx = if from_left { cell + 1 } else { n - 2 - cell };
        out[idx] = y;
    }
    out
}

fn nodes(grid: &Grid, vfine: &[f64], e: f64) -> usize {
    let psi = shoot(grid, vfine, e, true);
    let scale = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut count = 0;
    let mut last = 0.0f64;
    for &p in &psi[1..] {
        if p.abs() <= 1e-300 * scale {
            continue;
        }
        if last != 0.0 && last.signum() != p.signum() {
            count += 1;
        }
        last = p;
    }
    count
}

fn eigenfunction(grid: &Grid, vfine: &[f64], v: &[f64], e: f64) -> GridFunction {
    let n = grid.n_points();
    let left = shoot(grid, vfine, e, true);
    let right = shoot(grid, vfine, e, false);
    let turning = (0..n).rev().find(|&i| v[i] < e).unwrap_or(n / 2).clamp(1, n - 2);
    let ratio = if right[turning].abs() > 0.0 { left[turning] / right[turning] } else { 1.0 };
    let mut psi: Vec<f64> = (0..n).map(|i| if i <= turning { left[i] } else { right[i] * ratio }).collect();
    let peak = psi.iter().cloned().fold(0.0f64, |m, p| if p.abs() > m.abs() { p } else { m });
    if peak != 0.0 {
        for p in psi.iter_mut() {
            *p /= peak;
        }
    }
    GridFunction::from_real_fn(*grid, |x| psi[grid.index_of(x)])
}

/// Normalizability verdicts at `+inf` and `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Normalizability {
    pub at_plus: bool,
    pub at_minus: bool,
    /// A tail underflowed below `1e-300` and was taken as decaying.
    pub underflow: bool,
}

/// Fits the slope of `ln|f|` on the outer 15% of samples at each end; a
/// decaying tail (slope beyond `1e-3` toward zero) counts as normalizable.
pub fn normalizable_at_infinity(f: &GridFunction) -> Normalizability {
    let grid = f.grid();
    let n = grid.n_points();
    let k = ((0.15 * n as f64).round() as usize).max(2);
    let fit = |range: std::ops::Range<usize>| -> Option<f64> {
        let pts: Vec<(f64, f64)> = range
            .filter(|&i| f.at(i).norm() > 1e-300)
            .map(|i| (grid.x(i), f.at(i).norm().ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    };
    let mut underflow = false;
    let at_plus = match fit(n - k..n) {
        Some(s) => s < -1e-3,
        None => {
            underflow = true;
            true
        }
    };
    let at_minus = match fit(0..k) {
        Some(s) => s > 1e-3,
        None => {
            underflow = true;
            true
        }
    };
    Normalizability { at_plus, at_minus, underflow }
}

/// Outcome of the class-K test on a sampled potential.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassKReport {
    pub cond1_real_smooth: bool,
    pub cond2_positive_tail: bool,
    /// Smallest sampled `R0` with `V >= epsilon` for `|x| >= R0`.
    pub r0: Option<f64>,
    pub epsilon: f64,
    /// `None` when the tail expression is indeterminate (V vanishes there).
    pub cond3_bounded: Option<bool>,
    /// Lower limit of the tail integral: smallest sampled `R` with `V > 0`
    /// for `|x| >= R`.
    pub integral_anchor: Option<f64>,
    /// Supremum of the tail expression on `x >= R` and `x <= -R`.
    pub sup_plus: f64,
    pub sup_minus: f64,
    pub in_class_k: bool,
    pub diagnosis: Vec<String>,
}

/// Default tail fraction for [`class_k_check`].
pub const CLASS_K_TAIL: f64 = 0.25;

/// Checks the three class-K conditions on the window. The tail consists of
/// the outer `tail_fraction` of samples at each end; condition 3 compares the
/// supremum of the tail expression over the outermost quarter of each tail
/// with the supremum over the next quarter and accepts growth up to 10%.
pub fn class_k_check(v: &GridFunction, tail_fraction: f64) -> Result<ClassKReport> {
    if !(tail_fraction > 0.0 && tail_fraction < 0.5) {
        return Err(Error::Precondition(format!("tail fraction {tail_fraction} outside (0, 0.5)")));
    }
    let grid = *v.grid();
    let n = grid.n_points();
    let mut report = ClassKReport {
        cond1_real_smooth: v.check_finite().is_ok() && v.is_real(),
        cond2_positive_tail: false,
        r0: None,
        epsilon: 0.0,
        cond3_bounded: None,
        integral_anchor: None,
        sup_plus: f64::NAN,
        sup_minus: f64::NAN,
        in_class_k: false,
        diagnosis: Vec::new(),
    };
    if !report.cond1_real_smooth {
        report.diagnosis.push("condition 1: V is not real and finite".into());
    }
    let re = v.re();
    let k = ((tail_fraction * n as f64).round() as usize).max(8);
    let tail_min = re[..k].iter().chain(&re[n - k..]).cloned().fold(f64::INFINITY, f64::min);
    report.epsilon = 0.5 * tail_min;
    if report.epsilon > 0.0 {
        report.cond2_positive_tail = true;
        report.r0 = Some(radius_where(&grid, &re, |val| val >= report.epsilon));
    } else {
        report
            .diagnosis
            .push(format!("condition 2: no epsilon > 0 with V >= epsilon on the tails (min V on tails = {tail_min:.6e})"));
    }

    let anchor = if report.cond2_positive_tail { Some(radius_where(&grid, &re, |val| val > 0.0)) } else { None };
    report.integral_anchor = anchor;
    if let Some(r) = anchor {
        let tail_vanishes = re[..k].iter().chain(&re[n - k..]).any(|val| val.abs() < 1e-300);
        if tail_vanishes {
            report.diagnosis.push("condition 3: V vanishes on the tail; indeterminate".into());
        } else {
            let expr = tail_expression(v, r)?;
            let (bounded_plus, sup_plus) = quartile_verdict(&expr[n - k..]);
            let mut left: Vec<f64> = expr[..k].to_vec();
            left.reverse();
            let (bounded_minus, sup_minus) = quartile_verdict(&left);
            report.sup_plus = sup_plus;
            report.sup_minus = sup_minus;
            let bounded = bounded_plus && bounded_minus;
            report.cond3_bounded = Some(bounded);
            if !bounded {
                report.diagnosis.push(format!(
                    "condition 3: tail expression still growing (sup +{sup_plus:.4e}, -{sup_minus:.4e})"
                ));
            }
        }
    }
    report.in_class_k =
        report.cond1_real_smooth && report.cond2_positive_tail && report.cond3_bounded == Some(true);
    Ok(report)
}

/// Smallest sampled `R >= 0` such that `pred(V(x))` holds for all `|x| >= R`.
fn radius_where(grid: &Grid, v: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    let n = v.len();
    let c = grid.center();
    let mut r: f64 = 0.0;
    for i in (c..n).rev() {
        if !pred(v[i]) {
            r = r.max(grid.x((i + 1).min(n - 1)));
            break;
        }
    }
    for i in 0..=c {
        if !pred(v[i]) {
            r = r.max(-grid.x(i.saturating_sub(1)));
            break;
        }
    }
    r
}

/// `(int_{+-R}^x sqrt|V|)^2 (|V'|^2/|V|^3 + |V''|/|V|^2)`; zero for `|x| < R`.
fn tail_expression(v: &GridFunction, anchor: f64) -> Result<Vec<f64>> {
    let grid = *v.grid();
    let d1 = v.derivative(1)?;
    let d2 = v.derivative(2)?;
    let root = v.map(|z| C64::new(z.norm().sqrt(), 0.0));
    let integral = integrate_from_center(&root);
    let ip = integral.at(grid.index_of(anchor)).re;
    let im = integral.at(grid.index_of(-anchor)).re;
    Ok((0..grid.n_points())
        .map(|i| {
            let x = grid.x(i);
            let int = if x >= anchor {
                integral.at(i).re - ip
            } else if x <= -anchor {
                im - integral.at(i).re
            } else {
                return 0.0;
            };
            let a = v.at(i).norm();
            let w = d1.at(i).norm().powi(2) / a.powi(3) + d2.at(i).norm() / a.powi(2);
            int * int * w
        })
        .collect())
}

/// `tail` runs inward to outward. Returns (bounded, supremum).
fn quartile_verdict(tail: &[f64]) -> (bool, f64) {
    let q = tail.len() / 4;
    let outer = &tail[tail.len() - q..];
    let inner = &tail[tail.len() - 2 * q..tail.len() - q];
    let sup_outer = outer.iter().cloned().fold(0.0f64, f64::max);
    let sup_inner = inner.iter().cloned().fold(0.0f64, f64::max);
    let sup = tail.iter().cloned().fold(0.0f64, f64::max);
    (sup.is_finite() && sup_outer <= 1.1 * sup_inner, sup)
}
