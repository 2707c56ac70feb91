//! Radial bump test functions `ψ(x) = φ(|x − c| / ρ)`,
//! `φ(s) = exp(1 − 1/(1 − s²))` for `s < 1`, zero otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{sig17, sig17_vec};

/// `φ(s)`.
#[inline]
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - s * s;
    (1.0 - 1.0 / u).exp()
}

/// `φ'(s) / s = −2 φ / (1 − s²)²`, smooth through `s = 0`.
#[inline]
pub fn bump_slope_over_s(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - s * s;
    -2.0 * bump(s) / (u * u)
}

/// `φ''(s)`.
#[inline]
pub fn bump_second(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - s * s;
    let phi = bump(s);
    let slope = -2.0 * s * phi / (u * u);
    -2.0 * phi / (u * u) - 2.0 * s * slope / (u * u) - 8.0 * s * s * phi / (u * u * u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    #[serde(serialize_with = "sig17_vec")]
    pub center: Vec<f64>,
    #[serde(serialize_with = "sig17")]
    pub radius: f64,
}

impl TestFunction {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || center.is_empty() {
            return Err(Error::InvalidConfig(format!("test function needs a center and radius > 0 (got {radius})")));
        }
        Ok(Self { center, radius })
    }

    fn scaled(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / self.radius
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        bump(self.scaled(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let k = bump_slope_over_s(self.scaled(x)) / (self.radius * self.radius);
        x.iter().zip(&self.center).map(|(a, b)| k * (a - b)).collect()
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.laplacian_at(self.scaled(x), x.len())
    }

    /// `Δψ` at scaled distance `s` in dimension `d`.
    #[inline]
    pub fn laplacian_at(&self, s: f64, d: usize) -> f64 {
        (bump_second(s) + (d as f64 - 1.0) * bump_slope_over_s(s)) / (self.radius * self.radius)
    }

    /// `∇ψ · (x − y)` for a point at distance `r` from `y` and `|x − c| = ρ s`,
    /// where `rℓ cos θ = (x − y)·(c − y)`.
    #[inline]
    pub fn slope_along(&self, s: f64, r: f64, r_ell_cos: f64) -> f64 {
        bump_slope_over_s(s) / (self.radius * self.radius) * (r * r - r_ell_cos)
    }
}

/// A named set of test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    pub name: String,
    pub members: Vec<TestFunction>,
}

impl TestFunctionFamily {
    /// Five bumps around `y` scaled to the support radius `r_ref`: three
    /// centered (radii `r_ref/2`, `r_ref`, `1.5 r_ref`) and two off-center.
    pub fn reference(y: &[f64], r_ref: f64) -> Self {
        let shifted = |dx: f64, dy: f64| {
            let mut c = y.to_vec();
            c[0] += dx * r_ref;
            if c.len() > 1 {
                c[1] += dy * r_ref;
            }
            c
        };
        let members = vec![
            TestFunction { center: y.to_vec(), radius: 0.5 * r_ref },
            TestFunction { center: y.to_vec(), radius: r_ref },
            TestFunction { center: y.to_vec(), radius: 1.5 * r_ref },
            TestFunction { center: shifted(0.3, 0.0), radius: 0.6 * r_ref },
            TestFunction { center: shifted(-0.4, 0.35), radius: 0.8 * r_ref },
        ];
        Self { name: "reference_bumps".into(), members }
    }
}
