//! Uniform grids on `[-L, L]` and complex-valued sampled functions with
//! high-order finite-difference calculus.
//!
//! Every other module evaluates its identities on [`GridFunction`]s. Residual
//! norms skip a boundary margin (10% of the samples at each end by default)
//! because one-sided stencils and exponentially growing formal solutions
//! pollute the edges.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Neg, Range, Sub};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const DEFAULT_HALF_WIDTH: f64 = 12.0;
pub const DEFAULT_POINTS: usize = 2049;
pub const DEFAULT_MARGIN: f64 = 0.1;
pub const DEFAULT_ACCURACY: usize = 8;

/// Realness threshold, relative to `max|f|`.
pub const TAU_REAL: f64 = 1e-9;
/// Samples below `TAU_ZERO` times the local magnitude are ignored when
/// counting sign changes.
pub const TAU_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    n_points: usize,
    margin: f64,
    accuracy: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            half_width: DEFAULT_HALF_WIDTH,
            n_points: DEFAULT_POINTS,
            margin: DEFAULT_MARGIN,
            accuracy: DEFAULT_ACCURACY,
        }
    }
}

impl Grid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if n_points < 64 || n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points}; need an odd count >= 64 so that x = 0 is sampled"
            )));
        }
        Ok(Grid { half_width, n_points, ..Grid::default() })
    }

    /// Fraction of samples excluded at each end from residual norms.
    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&margin) {
            return Err(Error::InvalidGrid(format!("margin {margin} outside [0, 0.5)")));
        }
        self.margin = margin;
        Ok(self)
    }

    /// Accuracy order of the finite-difference stencils (even, >= 2).
    pub fn with_accuracy(mut self, accuracy: usize) -> Result<Self> {
        if accuracy < 2 || accuracy % 2 == 1 {
            return Err(Error::InvalidGrid(format!("accuracy order {accuracy} must be even and >= 2")));
        }
        self.accuracy = accuracy;
        Ok(self)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn accuracy(&self) -> usize {
        self.accuracy
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn center(&self) -> usize {
        self.n_points / 2
    }

    /// Sample range used by residual norms.
    pub fn interior(&self) -> Range<usize> {
        self.interior_with(self.margin)
    }

    pub fn interior_with(&self, margin: f64) -> Range<usize> {
        let skip = (margin * self.n_points as f64).round() as usize;
        skip..self.n_points - skip
    }

    /// Nearest sample index to `x`, clamped to the grid.
    pub fn index_of(&self, x: f64) -> usize {
        let t = ((x + self.half_width) / self.spacing()).round();
        t.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Complex samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::GridMismatch);
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(GridFunction { grid, values })
    }

    /// Builds without the finiteness check; callers guarantee finite input.
    pub(crate) fn from_vec(grid: Grid, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points);
        GridFunction { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> C64) -> Self {
        let values = (0..grid.n_points).map(|i| f(grid.x(i))).collect();
        GridFunction { grid, values }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn constant(grid: Grid, c: C64) -> Self {
        GridFunction { grid, values: vec![c; grid.n_points] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, C64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize) -> C64 {
        self.values[i]
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(()),
        }
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(C64, C64) -> C64) -> Result<GridFunction> {
        self.same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, c: C64) -> GridFunction {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> GridFunction {
        self.map(|v| v.conj())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn interior_max_abs(&self) -> f64 {
        max_abs(&self.values[self.grid.interior()])
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Realness within `TAU_REAL * max|f|`.
    pub fn is_real(&self) -> bool {
        self.max_imag() <= TAU_REAL * self.max_abs()
    }

    pub fn ensure_real(&self) -> Result<()> {
        if self.is_real() {
            Ok(())
        } else {
            Err(Error::NotRealValued { max_imag: self.max_imag(), scale: self.max_abs() })
        }
    }

    /// Drops the imaginary part.
    pub fn real_part(&self) -> GridFunction {
        self.map(|v| C64::new(v.re, 0.0))
    }

    /// `d^order f / dx^order` with central stencils of the grid's accuracy
    /// order in the interior and one-sided stencils of the same accuracy near
    /// the ends.
    pub fn derivative(&self, order: usize) -> Result<GridFunction> {
        if order == 0 || order > 4 {
            return Err(Error::DerivativeOrder(order));
        }
        let stencils = Stencils::new(&self.grid, order)?;
        Ok(GridFunction { grid: self.grid, values: stencils.apply(&self.values) })
    }

    /// Any derivative order, chaining calls of order <= 4.
    pub fn derivative_n(&self, order: usize) -> Result<GridFunction> {
        if order == 0 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        let mut left = order;
        while left > 0 {
            let step = left.min(4);
            out = out.derivative(step)?;
            left -= step;
        }
        Ok(out)
    }

    /// Samples on a grid refined `factor` times (spacing `h / factor`) by
    /// local Lagrange interpolation of the stencil's accuracy order.
    pub fn refine(&self, factor: usize) -> Vec<C64> {
        let n = self.grid.n_points;
        let width = (self.grid.accuracy).min(n);
        let mut out = Vec::with_capacity((n - 1) * factor + 1);
        let mut cache: Vec<Option<Vec<Vec<f64>>>> = vec![None; width];
        for cell in 0..n - 1 {
            let start = (cell + 1).saturating_sub(width / 2).min(n - width);
            let rel = cell - start;
            let weights = cache[rel].get_or_insert_with(|| {
                let nodes: Vec<f64> = (0..width).map(|j| j as f64).collect();
                (0..factor)
                    .map(|k| {
                        let z = rel as f64 + k as f64 / factor as f64;
                        fd_weights(z, &nodes, 0).into_iter().map(|c| c[0]).collect()
                    })
                    .collect()
            });
            for w in weights.iter() {
                let mut acc = C64::new(0.0, 0.0);
                for (j, wj) in w.iter().enumerate() {
                    acc += self.values[start + j] * wj;
                }
                out.push(acc);
            }
        }
        out.push(self.values[n - 1]);
        out
    }

    /// Writes `x,re,im` rows with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,re,im\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", self.grid.x(i), v.re, v.im);
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Reads a CSV written by [`GridFunction::write_csv`]. The abscissae must
    /// describe an admissible uniform grid symmetric about zero.
    pub fn read_csv(path: &Path) -> Result<GridFunction> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if lineno == 0 {
                if line != "x,re,im" {
                    return Err(Error::Parse(format!("{}: expected header x,re,im", path.display())));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("{}:{}: expected 3 fields", path.display(), lineno + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))
            };
            xs.push(parse(fields[0])?);
            values.push(C64::new(parse(fields[1])?, parse(fields[2])?));
        }
        let n = xs.len();
        if n < 2 {
            return Err(Error::Parse(format!("{}: too few rows", path.display())));
        }
        let half_width = -xs[0];
        let grid = Grid::new(half_width, n)?;
        let h = grid.spacing();
        if ((xs[n - 1] - half_width) / h).abs() > 1e-6 {
            return Err(Error::Parse(format!("{}: abscissae not symmetric about zero", path.display())));
        }
        GridFunction::new(grid, values)
    }
}

impl<'a> Add for &'a GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &'a GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub for &'a GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &'a GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul for &'a GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: &'a GridFunction) -> GridFunction {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        GridFunction {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a * b).collect(),
        }
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;
    fn neg(self) -> GridFunction {
        self.map(|v| -v)
    }
}

pub fn max_abs(values: &[C64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.norm()))
}

/// Finite-difference weights for derivatives `0..=m` at `z` from `nodes`
/// (Fornberg's recursion). `out[j][k]` weights node `j` for derivative `k`.
pub fn fd_weights(z: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// Precomputed stencils for one derivative order on one grid.
struct Stencils {
    order: usize,
    radius: usize,
    central: Vec<f64>,
    /// Weights for the first `radius` samples over the leading nodes.
    left: Vec<Vec<f64>>,
}

impl Stencils {
    fn new(grid: &Grid, order: usize) -> Result<Self> {
        let p = grid.accuracy;
        let central_points = 2 * order.div_ceil(2) - 1 + p;
        let radius = central_points / 2;
        let one_sided = order + p;
        let n = grid.n_points;
        let needed = one_sided.max(central_points);
        if needed > n {
            return Err(Error::GridTooCoarse { stencil: needed, n_points: n });
        }
        let scale = grid.spacing().powi(order as i32);
        let offsets: Vec<f64> = (0..central_points).map(|j| j as f64 - radius as f64).collect();
        let central = fd_weights(0.0, &offsets, order).into_iter().map(|c| c[order] / scale).collect();
        let nodes: Vec<f64> = (0..one_sided).map(|j| j as f64).collect();
        let left = (0..radius)
            .map(|i| fd_weights(i as f64, &nodes, order).into_iter().map(|c| c[order] / scale).collect())
            .collect();
        Ok(Stencils { order, radius, central, left })
    }

    fn apply(&self, f: &[C64]) -> Vec<C64> {
        let n = f.len();
        let r = self.radius;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            if i >= r && i + r < n {
                for (j, w) in self.central.iter().enumerate() {
                    acc += f[i + j - r] * w;
                }
            } else if i < r {
                for (j, w) in self.left[i].iter().enumerate() {
                    acc += f[j] * w;
                }
            } else {
                // Mirror of the left stencil: reflection flips odd orders.
                let k = n - 1 - i;
                let sign = if self.order.is_multiple_of(2) { 1.0 } else { -1.0 };
                for (j, w) in self.left[k].iter().enumerate() {
                    acc += f[n - 1 - j] * (w * sign);
                }
            }
            *slot = acc;
        }
        out
    }
}

/// Pointwise Wronskian determinant. Row `i` holds `fs[i]` and its first
/// `k-1` derivatives; rows appear in the order given by the caller.
pub fn wronskian(fs: &[GridFunction]) -> Result<GridFunction> {
    let first = fs.first().ok_or(Error::Empty("wronskian needs at least one function"))?;
    for f in fs {
        first.same_grid(f)?;
    }
    let k = fs.len();
    if k == 1 {
        return Ok(first.clone());
    }
    let mut rows: Vec<Vec<GridFunction>> = Vec::with_capacity(k);
    for f in fs {
        let mut row = vec![f.clone()];
        for d in 1..k {
            row.push(f.derivative_n(d)?);
        }
        rows.push(row);
    }
    let grid = *first.grid();
    let values = (0..grid.n_points())
        .map(|p| {
            let m = nalgebra::DMatrix::from_fn(k, k, |i, j| rows[i][j].at(p));
            crate::linalg::det(m)
        })
        .collect();
    Ok(GridFunction::from_vec(grid, values))
}

/// Number of strict sign changes of the real part, ignoring samples below
/// `TAU_ZERO * max|f|`.
pub fn count_sign_changes(f: &GridFunction) -> Result<usize> {
    f.ensure_real()?;
    Ok(sign_change_locations(f).len())
}

/// Half-width, in samples, of the neighbourhood that sets the noise floor of
/// [`sign_change_locations`].
const ZERO_WINDOW: usize = 8;

/// Abscissae (linearly interpolated) where the real part changes sign.
/// A sample counts only above `TAU_ZERO` times the largest magnitude among
/// its neighbours, so a sign change stays visible next to an exponentially
/// larger tail.
pub fn sign_change_locations(f: &GridFunction) -> Vec<f64> {
    let grid = f.grid();
    let vals = f.values();
    let n = vals.len();
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, v) in vals.iter().enumerate() {
        let window = &vals[i.saturating_sub(ZERO_WINDOW)..(i + ZERO_WINDOW + 1).min(n)];
        if v.norm() < TAU_ZERO * max_abs(window) || v.re == 0.0 {
            continue;
        }
        if let Some((j, prev)) = last {
            if prev.signum() != v.re.signum() {
                let (x0, x1) = (grid.x(j), grid.x(i));
                out.push(x0 + (x1 - x0) * prev.abs() / (prev.abs() + v.re.abs()));
            }
        }
        last = Some((i, v.re));
    }
    out
}

/// Approximate zero locations of a possibly complex function. A function
/// that is real up to a constant phase is rotated and checked for sign
/// changes; otherwise a zero is reported where real and imaginary parts
/// change sign in the same cell.
pub fn zero_locations(f: &GridFunction) -> Vec<f64> {
    let peak = f.values().iter().copied().fold(C64::new(0.0, 0.0), |m, v| if v.norm() > m.norm() { v } else { m });
    if peak.norm() == 0.0 {
        return vec![0.0];
    }
    let rotated = f.scale(peak.conj() / peak.norm());
    if rotated.is_real() {
        return sign_change_locations(&rotated);
    }
    let grid = f.grid();
    let vals = f.values();
    let mut out = Vec::new();
    for i in 1..vals.len() {
        let (a, b) = (vals[i - 1], vals[i]);
        if a.norm() == 0.0 {
            out.push(grid.x(i - 1));
            continue;
        }
        let re_flip = a.re.signum() != b.re.signum();
        let im_flip = a.im.signum() != b.im.signum();
        if re_flip && im_flip {
            out.push(0.5 * (grid.x(i - 1) + grid.x(i)));
        }
    }
    out
}

/// `max_x |f - g|` over the interior divided by the larger interior max-norm.
pub fn relative_difference(f: &GridFunction, g: &GridFunction) -> f64 {
    let range = f.grid().interior();
    let diff = f.values()[range.clone()]
        .iter()
        .zip(&g.values()[range.clone()])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    let scale = max_abs(&f.values()[range.clone()]).max(max_abs(&g.values()[range]));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Residual of an identity `sum(terms) = 0`: interior max of the sum over
/// the interior max of the largest term, floored at `floor`.
pub fn identity_residual(terms: &[&GridFunction], floor: f64) -> f64 {
    let Some(first) = terms.first() else { return 0.0 };
    let range = first.grid().interior();
    let mut num = 0.0f64;
    let mut den = floor;
    for i in range {
        let mut s = C64::new(0.0, 0.0);
        for t in terms {
            s += t.at(i);
            den = den.max(t.at(i).norm());
        }
        num = num.max(s.norm());
    }
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Like [`identity_residual`] but normalized sample by sample, for identities
/// whose terms vary over many orders of magnitude across the window.
/// `floor_fraction` of the global term scale keeps vanishing regions finite.
pub fn pointwise_identity_residual(terms: &[&GridFunction], floor_fraction: f64) -> f64 {
    let Some(first) = terms.first() else { return 0.0 };
    let range = first.grid().interior();
    let global = terms.iter().fold(0.0f64, |m, t| m.max(max_abs(&t.values()[range.clone()])));
    let floor = (floor_fraction * global).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in range {
        let mut s = C64::new(0.0, 0.0);
        let mut den = floor;
        for t in terms {
            s += t.at(i);
            den = den.max(t.at(i).norm());
        }
        worst = worst.max(s.norm() / den);
    }
    worst
}

/// Cumulative integral from the center sample outward (trapezoid on the
/// grid, corrected by the end-point derivative term).
pub fn integrate_from_center(f: &GridFunction) -> GridFunction {
    let grid = *f.grid();
    let n = grid.n_points();
    let h = grid.spacing();
    let c = grid.center();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for i in c + 1..n {
        out[i] = out[i - 1] + (f.at(i - 1) + f.at(i)) * (0.5 * h);
    }
    for i in (0..c).rev() {
        out[i] = out[i + 1] - (f.at(i) + f.at(i + 1)) * (0.5 * h);
    }
    GridFunction::from_vec(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(l: f64, n: usize) -> Grid {
        Grid::new(l, n).unwrap()
    }

    #[test]
    fn rejects_even_or_tiny_grids() {
        assert!(Grid::new(5.0, 1024).is_err());
        assert!(Grid::new(5.0, 63).is_err());
        assert!(Grid::new(-1.0, 129).is_err());
        assert!(Grid::new(5.0, 129).is_ok());
    }

    #[test]
    fn center_sample_is_origin() {
        let g = grid(7.0, 129);
        assert_eq!(g.x(g.center()), 0.0);
    }

    #[test]
    fn second_derivative_of_square_is_two() {
        let g = grid(3.0, 129);
        let f = GridFunction::from_real_fn(g, |x| x * x);
        let d = f.derivative(2).unwrap();
        for v in d.values() {
            assert!((v.re - 2.0).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn first_derivative_of_exp() {
        let g = grid(5.0, 1025);
        let f = GridFunction::from_real_fn(g, f64::exp);
        let d = f.derivative(1).unwrap();
        let err = g.interior().map(|i| (d.at(i) - f.at(i)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err = {err:e}");
    }

    #[test]
    fn fourth_derivative_of_sin() {
        let g = grid(12.0, 513);
        let f = GridFunction::from_real_fn(g, f64::sin);
        let d = f.derivative(4).unwrap();
        let err = g.interior().map(|i| (d.at(i) - f.at(i)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6, "err = {err:e}");
    }

    #[test]
    fn derivative_order_bounds() {
        let g = grid(3.0, 129);
        let f = GridFunction::from_real_fn(g, |x| x);
        assert!(matches!(f.derivative(0), Err(Error::DerivativeOrder(0))));
        assert!(matches!(f.derivative(5), Err(Error::DerivativeOrder(5))));
    }

    #[test]
    fn coarse_grid_is_reported() {
        let g = grid(3.0, 65).with_accuracy(64).unwrap();
        let f = GridFunction::from_real_fn(g, |x| x);
        assert!(matches!(f.derivative(4), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn boundary_stencils_are_exact_on_polynomials() {
        let g = grid(2.0, 65);
        let f = GridFunction::from_real_fn(g, |x| x.powi(5) - 3.0 * x.powi(3));
        let d = f.derivative(3).unwrap();
        for i in [0usize, 1, 2, 3, 32, 61, 62, 63, 64] {
            let x = g.x(i);
            let exact = 60.0 * x * x - 18.0;
            assert!((d.at(i).re - exact).abs() < 1e-6 * (1.0 + exact.abs()), "i={i}");
        }
    }

    #[test]
    fn wronskian_of_exponentials() {
        let g = grid(3.0, 257);
        let e = |a: f64| GridFunction::from_real_fn(g, move |x| (a * x).exp());
        let w1 = wronskian(&[e(1.0)]).unwrap();
        assert_eq!(w1, e(1.0));
        let w2 = wronskian(&[e(3.0), e(2.0)]).unwrap();
        let w3 = wronskian(&[e(3.0), e(2.0), e(1.0)]).unwrap();
        for i in g.interior() {
            let x = g.x(i);
            let want2 = -(5.0 * x).exp();
            let want3 = -2.0 * (6.0 * x).exp();
            assert!((w2.at(i).re - want2).abs() < 1e-9 * want2.abs());
            assert!((w3.at(i).re - want3).abs() < 1e-9 * want3.abs());
        }
    }

    #[test]
    fn sign_changes() {
        let g = Grid::default();
        let cosh = GridFunction::from_real_fn(g, f64::cosh);
        let sinh = GridFunction::from_real_fn(g, f64::sinh);
        let osc = GridFunction::from_real_fn(g, |x| (4.0 * x * x - 2.0) * (-x * x / 2.0).exp());
        assert_eq!(count_sign_changes(&cosh).unwrap(), 0);
        assert_eq!(count_sign_changes(&sinh).unwrap(), 1);
        assert_eq!(count_sign_changes(&osc).unwrap(), 2);
        let roots = sign_change_locations(&osc);
        assert!((roots[1] - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn sign_change_next_to_huge_tail() {
        // 2 cosh 3x cosh 2x - 3 sinh 3x sinh 2x: positive near 0, -e^{5|x|}/4 outside.
        let g = Grid::default();
        let f = GridFunction::from_real_fn(g, |x| {
            2.0 * (3.0 * x).cosh() * (2.0 * x).cosh() - 3.0 * (3.0 * x).sinh() * (2.0 * x).sinh()
        });
        let roots = sign_change_locations(&f);
        assert_eq!(roots.len(), 2);
        let bisect = |mut a: f64, mut b: f64| {
            let h = |x: f64| 2.0 * (3.0 * x).cosh() * (2.0 * x).cosh() - 3.0 * (3.0 * x).sinh() * (2.0 * x).sinh();
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if h(a).signum() == h(m).signum() {
                    a = m
                } else {
                    b = m
                }
            }
            a
        };
        assert!((roots[1] - bisect(0.0, 3.0)).abs() < g.spacing());
        assert!((roots[0] + bisect(0.0, 3.0)).abs() < g.spacing());
    }

    #[test]
    fn sign_changes_reject_complex() {
        let g = grid(3.0, 129);
        let f = GridFunction::from_fn(g, |x| C64::new(x, 1.0));
        assert!(matches!(count_sign_changes(&f), Err(Error::NotRealValued { .. })));
    }

    #[test]
    fn zeros_of_rotated_and_complex_functions() {
        let g = grid(3.0, 129);
        let imaginary = GridFunction::from_fn(g, |x| C64::new(0.0, -2.0 * (2.0 * x).exp()));
        assert!(zero_locations(&imaginary).is_empty());
        let through_origin = GridFunction::from_fn(g, |x| C64::new(x, 0.0) * C64::new(1.0, 2.0));
        assert_eq!(zero_locations(&through_origin).len(), 1);
        let spiral = GridFunction::from_fn(g, |x| C64::new(x, 0.3 + x * x));
        assert!(zero_locations(&spiral).is_empty());
    }

    #[test]
    fn refine_reproduces_smooth_function() {
        let g = grid(4.0, 129);
        let f = GridFunction::from_real_fn(g, |x| (0.7 * x).sin() * x.exp());
        let fine = f.refine(8);
        let h = g.spacing() / 8.0;
        for (k, v) in fine.iter().enumerate() {
            let x = -4.0 + k as f64 * h;
            let want = (0.7 * x).sin() * x.exp();
            assert!((v.re - want).abs() < 1e-7 * (1.0 + want.abs()), "k={k}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let g = grid(2.5, 65);
        let f = GridFunction::from_fn(g, |x| C64::new(x.sin(), x.cos() / 3.0));
        f.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,re,im\n"));
        let back = GridFunction::read_csv(&path).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn cumulative_integral() {
        let g = grid(3.0, 601);
        let f = GridFunction::from_real_fn(g, |x| x.cos());
        let big_f = integrate_from_center(&f);
        for i in g.interior() {
            assert!((big_f.at(i).re - g.x(i).sin()).abs() < 1e-4);
        }
    }
}
