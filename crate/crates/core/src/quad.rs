//! Adaptive Simpson quadrature with explicit error control.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    /// Absolute error target for the whole interval.
    pub abs_tol: T,
    /// Maximum bisection depth before giving up on an interval.
    pub max_depth: u32,
    /// Number of equal panels the interval is split into before adaptivity.
    pub initial_panels: u32,
}

impl<T: Scalar> QuadOptions<T> {
    pub fn with_abs_tol(abs_tol: T) -> Self {
        QuadOptions { abs_tol, max_depth: 52, initial_panels: 8 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub err_estimate: T,
    pub evals: usize,
}

fn simpson<T: Scalar>(h: T, fa: T, fm: T, fb: T) -> T {
    let six = T::of(6.0);
    h / six * (fa + T::of(4.0) * fm + fb)
}

/// Adaptive Simpson on `[a, b]`. Fails with a numeric error carrying the
/// offending sub-interval when the depth budget cannot reach the tolerance.
pub fn adaptive_simpson<T: Scalar>(
    f: &dyn Fn(T) -> T,
    a: T,
    b: T,
    opts: QuadOptions<T>,
) -> Result<QuadResult<T>> {
    if !(b > a) {
        return Ok(QuadResult { value: T::zero(), err_estimate: T::zero(), evals: 0 });
    }
    let two = T::of(2.0);
    let mut evals = 0usize;
    let mut eval = |x: T| -> Result<T> {
        evals += 1;
        let y = f(x);
        if y.is_nan() || y.is_infinite() {
            return Err(Error::Numeric(format!(
                "integrand returned {y:?} at x = {x:e}"
            )));
        }
        Ok(y)
    };

    // seed panels
    struct Item<T> {
        a: T,
        m: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        s: T,
        tol: T,
        depth: u32,
    }
    let n0 = opts.initial_panels.max(1);
    let mut stack: Vec<Item<T>> = Vec::with_capacity(64);
    let width = (b - a) / T::of(n0 as f64);
    let panel_tol = opts.abs_tol / T::of(n0 as f64);
    for i in 0..n0 {
        let pa = a + width * T::of(i as f64);
        let pb = if i + 1 == n0 { b } else { a + width * T::of((i + 1) as f64) };
        let pm = (pa + pb) / two;
        let (fa, fm, fb) = (eval(pa)?, eval(pm)?, eval(pb)?);
        let s = simpson(pb - pa, fa, fm, fb);
        stack.push(Item { a: pa, m: pm, b: pb, fa, fm, fb, s, tol: panel_tol, depth: 0 });
    }

    let fifteen = T::of(15.0);
    let mut total = T::zero();
    let mut err_total = T::zero();
    while let Some(it) = stack.pop() {
        let ml = (it.a + it.m) / two;
        let mr = (it.m + it.b) / two;
        let (fml, fmr) = (eval(ml)?, eval(mr)?);
        let sl = simpson(it.m - it.a, it.fa, fml, it.fm);
        let sr = simpson(it.b - it.m, it.fm, fmr, it.fb);
        let diff = sl + sr - it.s;
        if diff.abs() <= fifteen * it.tol || (it.b - it.a) <= T::epsilon() * it.a.abs().max(T::one())
        {
            total += sl + sr + diff / fifteen;
            err_total += diff.abs() / fifteen;
        } else if it.depth >= opts.max_depth {
            return Err(Error::Numeric(format!(
                "quadrature did not converge on [{:e}, {:e}] at depth {} (local error {:e}, target {:e})",
                it.a, it.b, it.depth, diff.abs(), it.tol
            )));
        } else {
            let half_tol = it.tol / two;
            stack.push(Item {
                a: it.a, m: ml, b: it.m,
                fa: it.fa, fm: fml, fb: it.fm,
                s: sl, tol: half_tol, depth: it.depth + 1,
            });
            stack.push(Item {
                a: it.m, m: mr, b: it.b,
                fa: it.fm, fm: fmr, fb: it.fb,
                s: sr, tol: half_tol, depth: it.depth + 1,
            });
        }
    }
    Ok(QuadResult { value: total, err_estimate: err_total, evals })
}

/// Relative-tolerance driver: a coarse pass fixes the scale, then the
/// adaptive pass targets `rel_tol * scale` absolute error.
pub fn integrate_rel<T: Scalar>(f: &dyn Fn(T) -> T, a: T, b: T, rel_tol: T) -> Result<T> {
    if !(b > a) {
        return Ok(T::zero());
    }
    // coarse midpoint scan for the scale
    let n = 64;
    let w = (b - a) / T::of(n as f64);
    let mut scale = T::zero();
    for i in 0..n {
        let x = a + w * T::of(i as f64 + 0.5);
        scale += f(x).abs() * w;
    }
    if scale == T::zero() {
        scale = T::one();
    }
    let opts = QuadOptions::with_abs_tol(rel_tol * scale);
    adaptive_simpson(f, a, b, opts).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let f = |x: f64| 3.0 * x * x;
        let r = integrate_rel(&f, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(r, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn oscillatory() {
        let f = |x: f64| (10.0 * x).sin();
        let r = integrate_rel(&f, 0.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(r, (1.0 - (10.0f64).cos()) / 10.0, epsilon = 1e-9);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // ∫_0^1 x^{-0.7} dx = 1/0.3; the adaptive splitter has to dig in
        let f = |x: f64| if x == 0.0 { 0.0 } else { x.powf(-0.7) };
        let r = integrate_rel(&f, 1e-12, 1.0, 1e-6).unwrap();
        assert_relative_eq!(r, (1.0 - 1e-12f64.powf(0.3)) / 0.3, max_relative = 1e-4);
    }

    #[test]
    fn nan_reported() {
        let f = |x: f64| (x - 0.5).ln();
        let err = integrate_rel(&f, 0.0, 1.0, 1e-8).unwrap_err();
        assert!(matches!(err, crate::Error::Numeric(_)));
    }
}
