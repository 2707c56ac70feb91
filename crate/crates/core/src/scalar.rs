//! Scalar abstraction shared by the closed-form fields, quadrature and the
//! radial solvers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// floating point: f32 or f64
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Constant from an `f64` literal.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest absolute tolerance worth asking of an iterative kernel.
    #[inline]
    fn tol_floor() -> Self {
        Self::epsilon() * Self::c(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `|x|^e`, using repeated multiplication when `e` is a small integer.
#[inline]
pub fn abs_pow<T: Real>(x: T, e: T) -> T {
    let ax = x.abs();
    if e.fract() == T::zero() && e >= T::zero() && e <= T::c(16.0) {
        ax.powi(e.to_i32().unwrap_or(0))
    } else {
        ax.powf(e)
    }
}

/// Surface area of the unit sphere in `R^n` (the 0-sphere has "area" 2).
pub fn unit_sphere_area<T: Real>(n: usize) -> T {
    // 2 pi^{n/2} / Gamma(n/2), with Gamma at integers and half-integers by recurrence
    let half_gamma = |m: usize| -> f64 {
        // Gamma(m/2)
        let (mut g, mut x) = if m.is_multiple_of(2) { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
        let target = m as f64 / 2.0;
        while x < target - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    if n == 0 {
        return T::zero();
    }
    let v = 2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / half_gamma(n);
    T::c(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert_eq!(unit_sphere_area::<f64>(1), 2.0);
        assert!((unit_sphere_area::<f64>(2) - 2.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(3) - 4.0 * pi).abs() < 1e-13);
        assert!((unit_sphere_area::<f64>(4) - 2.0 * pi * pi).abs() < 1e-13);
        assert!((unit_sphere_area::<f64>(5) - 8.0 * pi * pi / 3.0).abs() < 1e-12);
    }

    #[test]
    fn abs_pow_integer_fast_path_agrees() {
        for &x in &[-2.5f64, -0.3, 0.0, 0.7, 3.0] {
            assert!((abs_pow(x, 2.0) - x.abs().powf(2.0)).abs() < 1e-14);
            assert!((abs_pow(x, 0.5) - x.abs().sqrt()).abs() < 1e-14);
        }
    }
}
