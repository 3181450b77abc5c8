//! Bracketed bisection and grid scanning for sign changes.

use thiserror::Error;

use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("function returned a non-finite value at {0}")]
    NonFinite(f64),
}

/// Bisection on `[lo, hi]` until the bracket is narrower than `x_tol`.
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them be zero).
pub fn bisect<F>(f: F, lo: f64, hi: f64, x_tol: f64, max_iter: usize) -> Result<f64, RootError>
where
    F: Fn(f64) -> f64,
{
    try_bisect(|x| Ok::<f64, RootError>(f(x)), lo, hi, x_tol, max_iter)
}

/// Fallible variant of [`bisect`]; errors from `f` are propagated.
pub fn try_bisect<F, E>(f: F, mut lo: f64, mut hi: f64, x_tol: f64, max_iter: usize) -> Result<f64, E>
where
    F: Fn(f64) -> Result<f64, E>,
    E: From<RootError>,
{
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if !flo.is_finite() {
        return Err(RootError::NonFinite(lo).into());
    }
    if !fhi.is_finite() {
        return Err(RootError::NonFinite(hi).into());
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(RootError::NoSignChange { lo, hi }.into());
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if !fm.is_finite() {
            return Err(RootError::NonFinite(mid).into());
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Uniform grid of `n` points on `[lo, hi)` (the right endpoint is excluded).
pub fn half_open_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / n as f64;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

/// Evaluates `f` on `grid`, brackets every sign change and refines each one
/// by bisection to `x_tol`. Roots come back sorted ascending.
pub fn scan_roots<F, E>(f: &F, grid: &[f64], x_tol: f64, exec: Execution) -> Result<Vec<f64>, E>
where
    F: Fn(f64) -> Result<f64, E> + Sync,
    E: From<RootError> + Send,
{
    let values: Vec<f64> = par::map(grid, exec, |&x| f(x))
        .into_iter()
        .collect::<Result<_, E>>()?;
    let mut brackets = Vec::new();
    for i in 0..values.len() {
        if values[i] == 0.0 {
            brackets.push((grid[i], grid[i]));
        } else if i + 1 < values.len() && values[i] * values[i + 1] < 0.0 {
            brackets.push((grid[i], grid[i + 1]));
        }
    }
    let refined = par::map(&brackets, exec, |&(a, b)| {
        if a == b {
            Ok(a)
        } else {
            try_bisect(f, a, b, x_tol, 200)
        }
    });
    refined.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100),
            Err(RootError::NoSignChange { .. })
        ));
    }

    #[test]
    fn scan_finds_all_roots_of_cubic() {
        let f = |x: f64| Ok::<f64, RootError>((x + 1.5) * (x - 0.25) * (x - 2.0));
        let grid = half_open_grid(-3.0, 3.0, 600);
        let roots = scan_roots(&f, &grid, 1e-12, Execution::Sequential).unwrap();
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip([-1.5, 0.25, 2.0]) {
            assert!((r - e).abs() < 1e-11);
        }
        let par_roots = scan_roots(&f, &grid, 1e-12, Execution::Parallel).unwrap();
        assert_eq!(roots, par_roots);
    }
}
