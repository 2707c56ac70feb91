//! Tabulated radial distribution function of a Barenblatt profile and the
//! inverse-transform sampler built on it.

use crate::barenblatt::{BarenblattParams, TimeSlice};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_with, QuadSettings};
use crate::numerics::rng::RngStream;
use crate::numerics::sphere::uniform_direction;
use crate::scalar::Real;

/// Default table resolution.
pub const DEFAULT_CELLS: usize = 4096;

/// Largest tolerated deviation of the raw tabulated mass from one.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// `F(r) = ∫_{|x−y|<r} w(s, x) dx` on a uniform radius grid over `[0, R(s)]`,
/// interpolated by monotone (Fritsch–Carlson limited) cubic Hermite splines.
#[derive(Clone, Debug)]
pub struct RadialCdf<T> {
    s: T,
    radius: T,
    step: T,
    values: Vec<T>,
    slopes: Vec<T>,
    raw_mass: T,
}

impl<T: Real> RadialCdf<T> {
    pub fn new(params: &BarenblattParams<T>, s: T) -> Result<Self> {
        Self::with_cells(params, s, DEFAULT_CELLS)
    }

    pub fn with_cells(params: &BarenblattParams<T>, s: T, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidConfig(format!("radial CDF needs at least 2 cells (got {cells})")));
        }
        let slice = TimeSlice::new(params, s)?;
        let sigma = params.sphere_area();
        let dm1 = (params.d - 1) as i32;
        let radius = slice.radius;
        let step = radius / T::c(cells as f64);
        let shell = |r: T| sigma * r.powi(dm1) * slice.density(r);

        let settings = QuadSettings {
            abs_tol: (T::tol_floor() * T::c(1e-3)).as_f64().max(1e-17),
            rel_tol: T::tol_floor().as_f64().max(1e-14),
            ..QuadSettings::default()
        };
        let mut values = Vec::with_capacity(cells + 1);
        let mut acc = T::zero();
        values.push(acc);
        for i in 0..cells {
            let a = step * T::c(i as f64);
            let b = if i + 1 == cells { radius } else { step * T::c((i + 1) as f64) };
            acc = acc + integrate_with(shell, a, b, &settings)?.value;
            values.push(acc);
        }
        let raw_mass = acc;
        let mass_tol = T::c(MASS_TOLERANCE).max(T::tol_floor() * T::c(16.0));
        if (raw_mass - T::one()).abs() > mass_tol {
            return Err(Error::SolverAbort(format!(
                "tabulated radial mass {} deviates from 1 by more than {MASS_TOLERANCE:e}",
                raw_mass.as_f64()
            )));
        }
        values.iter_mut().for_each(|v| *v = *v / raw_mass);
        values[cells] = T::one();

        let mut slopes: Vec<T> = (0..=cells)
            .map(|i| {
                let r = if i == cells { radius } else { step * T::c(i as f64) };
                shell(r) / raw_mass
            })
            .collect();
        limit_slopes(&values, &mut slopes, step);
        Ok(Self { s, radius, step, values, slopes, raw_mass })
    }

    pub fn time(&self) -> T {
        self.s
    }

    pub fn support_radius(&self) -> T {
        self.radius
    }

    /// Tabulated mass before renormalization.
    pub fn raw_mass(&self) -> T {
        self.raw_mass
    }

    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    pub fn table(&self) -> &[T] {
        &self.values
    }

    fn hermite(&self, i: usize, u: T) -> T {
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        let two = T::c(2.0);
        let three = T::c(3.0);
        let h00 = two * u3 - three * u2 + T::one();
        let h10 = u3 - two * u2 + u;
        let h01 = -two * u3 + three * u2;
        let h11 = u3 - u2;
        h00 * f0 + h10 * m0 + h01 * f1 + h11 * m1
    }

    /// `F(r)`; 0 for `r ≤ 0`, 1 for `r ≥ R(s)`.
    pub fn cdf(&self, r: T) -> T {
        if r <= T::zero() {
            return T::zero();
        }
        if r >= self.radius {
            return T::one();
        }
        let x = r / self.step;
        let i = x.floor().to_usize().unwrap_or(0).min(self.cells() - 1);
        let u = x - T::c(i as f64);
        self.hermite(i, u).max(T::zero()).min(T::one())
    }

    /// Radius with `F(r) = u`, for `u ∈ [0, 1]`.
    pub fn inverse(&self, u: T) -> T {
        if u <= T::zero() {
            return T::zero();
        }
        if u >= T::one() {
            return self.radius;
        }
        // last index with values[i] <= u
        let i = self.values.partition_point(|v| *v <= u).saturating_sub(1).min(self.cells() - 1);
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut x = if self.values[i + 1] > self.values[i] {
            (u - self.values[i]) / (self.values[i + 1] - self.values[i])
        } else {
            T::c(0.5)
        };
        for _ in 0..60 {
            let f = self.hermite(i, x) - u;
            if f.abs() <= T::epsilon() * T::c(4.0) {
                break;
            }
            if f > T::zero() {
                hi = x;
            } else {
                lo = x;
            }
            let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
            let x2 = x * x;
            let dfdx = (T::c(6.0) * x2 - T::c(6.0) * x) * (self.values[i] - self.values[i + 1])
                + (T::c(3.0) * x2 - T::c(4.0) * x + T::one()) * m0
                + (T::c(3.0) * x2 - T::c(2.0) * x) * m1;
            let newton = x - f / dfdx;
            x = if dfdx > T::zero() && newton > lo && newton < hi { newton } else { T::c(0.5) * (lo + hi) };
            if hi - lo <= T::epsilon() {
                break;
            }
        }
        (T::c(i as f64) + x) * self.step
    }
}

/// Fritsch–Carlson limiter: keeps the Hermite interpolant monotone.
fn limit_slopes<T: Real>(values: &[T], slopes: &mut [T], step: T) {
    for i in 0..values.len() - 1 {
        let secant = (values[i + 1] - values[i]) / step;
        if secant <= T::zero() {
            slopes[i] = T::zero();
            slopes[i + 1] = T::zero();
            continue;
        }
        let a = slopes[i] / secant;
        let b = slopes[i + 1] / secant;
        let norm = a * a + b * b;
        if norm > T::c(9.0) {
            let tau = T::c(3.0) / norm.sqrt();
            slopes[i] = tau * a * secant;
            slopes[i + 1] = tau * b * secant;
        }
    }
}

impl RadialCdf<f64> {
    /// One draw of `w^y(s, x) dx` written into `out` (length `d`).
    pub fn sample_into(&self, y: &[f64], rng: &mut RngStream, out: &mut [f64]) {
        let r = self.inverse(rng.uniform());
        uniform_direction(rng, out);
        for (o, c) in out.iter_mut().zip(y) {
            *o = c + r * *o;
        }
    }
}

/// `n` independent draws from `w^y(s, x) dx`, by inverse-CDF radius and a
/// uniformly distributed direction.
pub fn sample_barenblatt(
    params: &BarenblattParams<f64>,
    y: &[f64],
    s: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    if y.len() != params.d {
        return Err(Error::DimensionMismatch { expected: params.d, got: y.len() });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let cdf = RadialCdf::new(params, s)?;
    Ok((0..n)
        .map(|_| {
            let mut x = vec![0.0; params.d];
            cdf.sample_into(y, rng, &mut x);
            x
        })
        .collect())
}
