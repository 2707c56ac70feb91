//! Bracketing root finder: Illinois-modified regula falsi interleaved with
//! bisection, so the bracket at least halves every second iteration.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_ITERATIONS: usize = 400;

pub fn find_root<T, G>(mut g: G, lo: T, hi: T, tol: T) -> Result<T>
where
    T: Real,
    G: FnMut(T) -> T,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = g(a);
    let mut fb = g(b);
    if !(fa.is_finite() && fb.is_finite()) || fa * fb > T::zero() {
        return Err(Error::InvalidBracket { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    let half = T::c(0.5);
    let mut side = 0i8;
    for it in 0..MAX_ITERATIONS {
        let width = b - a;
        if width <= tol {
            return Ok(a + half * width);
        }
        let x = if it % 2 == 0 {
            let s = (a * fb - b * fa) / (fb - fa);
            if s > a && s < b { s } else { a + half * width }
        } else {
            a + half * width
        };
        let fx = g(x);
        if fx.abs() <= tol || fx == T::zero() {
            return Ok(x);
        }
        if (fx < T::zero()) == (fa < T::zero()) {
            a = x;
            fa = fx;
            if side == -1 {
                fb = fb * half;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa = fa * half;
            }
            side = 1;
        }
    }
    Err(Error::RootNotConverged(MAX_ITERATIONS))
}
