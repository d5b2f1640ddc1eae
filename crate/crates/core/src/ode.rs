//! Fixed-step RK4 for linear systems, integrated outward from `x = 0`.
//!
//! Each grid cell is crossed in four substeps; right-hand sides are sampled
//! on a grid refined eight times so that substep midpoints are sample points.

use crate::error::{Error, Result};
use crate::gridfn::{Grid, C64};

pub(crate) const REFINE: usize = 8;
const SUBSTEPS: usize = 4;
const OVERFLOW: f64 = 1e300;

/// `rhs(fine_index, state, out)` writes the derivative of `state` at the fine
/// sample `fine_index`. Returns the state at every coarse grid point.
pub(crate) fn integrate_from_center<F>(grid: &Grid, init: &[C64], rhs: F) -> Result<Vec<Vec<C64>>>
where
    F: Fn(usize, &[C64], &mut [C64]),
{
    let n = grid.n_points();
    let c = grid.center();
    let dim = init.len();
    let mut out = vec![Vec::new(); n];
    out[c] = init.to_vec();
    let stride = REFINE / SUBSTEPS;
    let dt = grid.spacing() / SUBSTEPS as f64;
    let mut k1 = vec![C64::new(0.0, 0.0); dim];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for direction in [1i64, -1] {
        let mut state = init.to_vec();
        let mut fine = (c * REFINE) as i64;
        let h = dt * direction as f64;
        let steps = if direction > 0 { n - 1 - c } else { c };
        for cell in 1..=steps {
            for _ in 0..SUBSTEPS {
                let mid = (fine + direction * (stride as i64 / 2)) as usize;
                let end = (fine + direction * stride as i64) as usize;
                rhs(fine as usize, &state, &mut k1);
                for d in 0..dim {
                    tmp[d] = state[d] + k1[d] * (0.5 * h);
                }
                rhs(mid, &tmp, &mut k2);
                for d in 0..dim {
                    tmp[d] = state[d] + k2[d] * (0.5 * h);
                }
                rhs(mid, &tmp, &mut k3);
                for d in 0..dim {
                    tmp[d] = state[d] + k3[d] * h;
                }
                rhs(end, &tmp, &mut k4);
                for d in 0..dim {
                    state[d] += (k1[d] + (k2[d] + k3[d]) * 2.0 + k4[d]) * (h / 6.0);
                }
                fine += direction * stride as i64;
            }
            if state.iter().any(|v| !(v.norm() < OVERFLOW)) {
                return Err(Error::Overflow);
            }
            let idx = if direction > 0 { c + cell } else { c - cell };
            out[idx] = state.clone();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let grid = Grid::new(5.0, 257).unwrap();
        let out = integrate_from_center(&grid, &[C64::new(1.0, 0.0)], |_, s, o| o[0] = s[0] * 2.0).unwrap();
        for (i, s) in out.iter().enumerate() {
            let want = (2.0 * grid.x(i)).exp();
            assert!((s[0].re - want).abs() < 1e-7 * want, "i={i}: {}", (s[0].re - want).abs() / want);
        }
    }

    #[test]
    fn overflow_is_reported() {
        let grid = Grid::new(12.0, 129).unwrap();
        let r = integrate_from_center(&grid, &[C64::new(1.0, 0.0)], |_, s, o| o[0] = s[0] * 80.0);
        assert!(matches!(r, Err(Error::Overflow)));
    }
}
