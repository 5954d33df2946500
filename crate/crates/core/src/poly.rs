//! Polynomial root finding (Durand–Kerner) for the CARMA autoregressive
//! polynomial. Degrees here are small (p ≲ 10).

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Evaluate a monic polynomial `z^p + c[0] z^{p-1} + … + c[p-1]` at `z`.
pub fn eval_monic<T: Scalar>(c: &[T], z: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::one(), T::zero());
    for &ck in c {
        acc = acc * z + Complex::new(ck, T::zero());
    }
    acc
}

/// Derivative of the monic polynomial at `z`.
pub fn eval_monic_derivative<T: Scalar>(c: &[T], z: Complex<T>) -> Complex<T> {
    let p = c.len();
    let mut acc = Complex::new(T::of_usize(p + 1 - 1), T::zero());
    // derivative coefficients: (p) z^{p-1} + (p-1) c0 z^{p-2} + ... + c[p-2]
    for (i, &ck) in c.iter().take(p.saturating_sub(1)).enumerate() {
        let coef = T::of_usize(p - 1 - i);
        acc = acc * z + Complex::new(coef * ck, T::zero());
    }
    acc
}

/// Evaluate a polynomial given low-to-high coefficients `b[0] + b[1] z + …`.
pub fn eval_low_to_high<T: Scalar>(b: &[T], z: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for &bk in b.iter().rev() {
        acc = acc * z + Complex::new(bk, T::zero());
    }
    acc
}

/// Roots of the monic polynomial with coefficients `c` (highest degree
/// first, leading 1 implied) by Durand–Kerner iteration.
pub fn roots_monic<T: Scalar>(c: &[T]) -> Result<Vec<Complex<T>>> {
    let p = c.len();
    if p == 0 {
        return Ok(Vec::new());
    }
    if p == 1 {
        return Ok(vec![Complex::new(-c[0], T::zero())]);
    }
    let radius = T::one() + c.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let mut z: Vec<Complex<T>> = (0..p)
        .map(|k| {
            let theta = T::of(2.0) * T::PI() * (T::of_usize(k) + T::of(0.35))
                / T::of_usize(p);
            Complex::from_polar(radius, theta)
        })
        .collect();
    let tol = T::of(1e-14) * radius.max(T::one());
    for _iter in 0..500 {
        let mut max_step = T::zero();
        for i in 0..p {
            let num = eval_monic(c, z[i]);
            let mut den = Complex::new(T::one(), T::zero());
            for j in 0..p {
                if j != i {
                    den = den * (z[i] - z[j]);
                }
            }
            if den.norm() == T::zero() {
                den = Complex::new(T::of(1e-30), T::zero());
            }
            let step = num / den;
            z[i] = z[i] - step;
            max_step = max_step.max(step.norm());
        }
        if max_step < tol {
            // scrub tiny imaginary parts of (numerically) real roots
            for zi in z.iter_mut() {
                if zi.im.abs() < tol {
                    zi.im = T::zero();
                }
            }
            return Ok(z);
        }
    }
    Err(Error::Numeric(
        "Durand-Kerner iteration did not converge for the polynomial roots".into(),
    ))
}
