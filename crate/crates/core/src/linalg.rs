//! Small dense complex linear algebra used pointwise on the grid and on the
//! constant matrices S.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

type C64 = Complex64;

fn row_scales(m: &DMatrix<C64>) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| {
            let s = m.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect()
}

/// Determinant with row equilibration, so that rows of very different
/// magnitude (growing exponentials next to decaying ones) do not lose digits.
pub fn det(mut m: DMatrix<C64>) -> C64 {
    let scales = row_scales(&m);
    let mut factor = C64::new(1.0, 0.0);
    for (i, s) in scales.iter().enumerate() {
        m.row_mut(i).scale_mut(1.0 / s);
        factor *= s;
    }
    m.full_piv_lu().determinant() * factor
}

/// Solves `a x = b` with row equilibration and full pivoting.
pub fn solve(mut a: DMatrix<C64>, mut b: DVector<C64>) -> Option<DVector<C64>> {
    let scales = row_scales(&a);
    for (i, s) in scales.iter().enumerate() {
        a.row_mut(i).scale_mut(1.0 / s);
        b[i] /= s;
    }
    a.full_piv_lu().solve(&b)
}

/// Least-squares solution of `a x = b` (several right-hand sides as columns)
/// after row and column equilibration. Returns the solution and the 2-norm
/// condition number of the equilibrated matrix.
pub fn least_squares(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<(DMatrix<C64>, f64)> {
    let (rows, cols) = a.shape();
    let mut a = a.clone();
    let mut b = b.clone();
    let rs = row_scales(&a);
    for (i, s) in rs.iter().enumerate() {
        a.row_mut(i).scale_mut(1.0 / s);
        b.row_mut(i).scale_mut(1.0 / s);
    }
    let cs: Vec<f64> = (0..cols)
        .map(|j| {
            let s = a.column(j).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in cs.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let eps = smax * 1e-15 * rows.max(cols) as f64;
    let mut x = svd.solve(&b, eps).ok()?;
    for (j, s) in cs.iter().enumerate() {
        x.row_mut(j).scale_mut(1.0 / s);
    }
    Some((x, cond))
}

/// Numerical rank: singular values strictly above `threshold`.
pub fn rank(m: &DMatrix<C64>, threshold: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > threshold).count()
}

/// Coefficients of `det(E I - S)` in ascending powers (monic, length N+1),
/// by the Faddeev-LeVerrier recursion.
pub fn char_poly(s: &DMatrix<C64>) -> Vec<C64> {
    let n = s.nrows();
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    coeffs[n] = C64::new(1.0, 0.0);
    let id = DMatrix::<C64>::identity(n, n);
    let mut m = DMatrix::<C64>::zeros(n, n);
    for k in 1..=n {
        m = s * &m + &id * coeffs[n - k + 1];
        let sm = s * &m;
        coeffs[n - k] = -sm.trace() / k as f64;
    }
    coeffs
}

pub fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn poly_derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect()
}

/// Roots of a polynomial given in ascending coefficients (Aberth-Ehrlich).
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.len() > 1 && c.last().map(|v| v.norm() == 0.0).unwrap_or(false) {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let c: Vec<C64> = c.iter().map(|v| v / lead).collect();
    let dc = poly_derivative(&c);
    let radius = 1.0 + c[..n].iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let p = poly_eval(&c, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / poly_eval(&dc, z[i]);
            let mut sum = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        sum += C64::new(1.0, 0.0) / d;
                    }
                }
            }
            let step = ratio / (C64::new(1.0, 0.0) - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn determinant_of_badly_scaled_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1e200), c(2e200), c(3e-200), c(4e-200)]);
        let d = det(m);
        assert!((d.re + 2.0).abs() < 1e-12);
    }

    #[test]
    fn char_poly_of_diagonal() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![c(-1.0), c(-4.0), c(-9.0)]));
        let p = char_poly(&s);
        let want = [36.0, 49.0, 14.0, 1.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn roots_of_cubic() {
        let mut r: Vec<f64> = poly_roots(&[c(36.0), c(49.0), c(14.0), c(1.0)]).iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in r.iter().zip([-9.0, -4.0, -1.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_roots() {
        // E^2 + 4 has roots +-2i
        let r = poly_roots(&[c(4.0), c(0.0), c(1.0)]);
        for z in r {
            assert!(z.re.abs() < 1e-12 && (z.im.abs() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_recovers_overdetermined_solution() {
        let a = DMatrix::from_fn(6, 2, |i, j| c(((i + 1) as f64).powi(j as i32)));
        let x = DMatrix::from_column_slice(2, 1, &[c(2.0), c(-3.0)]);
        let b = &a * &x;
        let (got, cond) = least_squares(&a, &b).unwrap();
        assert!(cond < 100.0);
        assert!((got[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((got[(1, 0)].re + 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_of_nilpotent() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(1.0), c(0.0)]);
        assert_eq!(rank(&m, 1e-9), 1);
        assert_eq!(rank(&(&m * &m), 1e-9), 0);
    }
}
