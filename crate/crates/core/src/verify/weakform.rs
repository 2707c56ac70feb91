//! Weak-form residuals of the Barenblatt family against radial bumps.
//!
//! For a bump `ψ` the two identities checked on `[t₁, t₂]` are
//!
//! ```text
//! ∫ψ w(t₂) − ∫ψ w(t₁) = ∫∫ (a Δψ + b·∇ψ) w          (Fokker–Planck form)
//!                     = −∫∫ a ∇w·∇ψ                  (p-Laplace form)
//! ```
//!
//! with `a = |∇w|^{p−2}`, `b = ∇a`. Space is integrated in polar coordinates
//! about `y`: radius `r` and the angle `θ` between `x − y` and `c − y`, with
//! weight `σ_{d−1} sin^{d−2}θ` (a two-point sum when `d = 1`).

use std::cell::RefCell;

use serde::Serialize;

use super::test_functions::{bump, TestFunction};
use crate::barenblatt::{distance, BarenblattParams, TimeSlice};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_with, QuadSettings};
use crate::scalar::unit_sphere_area;

/// Quadrature tolerances (absolute, relative) per nesting level.
const TIME_TOL: (f64, f64) = (1e-11, 1e-11);
const RADIUS_TOL: (f64, f64) = (1e-12, 1e-12);
const ANGLE_TOL: (f64, f64) = (1e-13, 1e-12);

fn settings(tol: (f64, f64)) -> QuadSettings {
    QuadSettings { abs_tol: tol.0, rel_tol: tol.1, ..QuadSettings::default() }
}

/// What is integrated against `ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    /// `ψ w`
    Mass,
    /// `(a Δψ + sign · b·∇ψ) w`; `sign = −1` injects a fault.
    FokkerPlanck { drift_sign: f64 },
    /// `−a ∇w·∇ψ`
    PLaplace,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual {
    /// `∫ψ w(t₂) − ∫ψ w(t₁)`
    pub lhs: f64,
    /// time integral of the right-hand side
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluates `∫ integrand dx` over the support at one physical time.
struct Space<'a> {
    params: &'a BarenblattParams<f64>,
    psi: &'a TestFunction,
    ell: f64,
    sigma_d: f64,
    sigma_dm1: f64,
    kind: Integrand,
    failure: &'a RefCell<Option<Error>>,
}

impl Space<'_> {
    fn stash<T>(&self, r: Result<T>, fallback: T) -> T {
        r.unwrap_or_else(|e| {
            self.failure.borrow_mut().get_or_insert(e);
            fallback
        })
    }

    /// Integrand at radius `r` (with the fields at that radius) and `rℓ cos θ`.
    #[inline]
    fn point(&self, r: f64, fields: &Fields, r_ell_cos: f64) -> f64 {
        let rho = self.psi.radius;
        let s = (r * r + self.ell * self.ell - 2.0 * r_ell_cos).max(0.0).sqrt() / rho;
        if s >= 1.0 {
            return 0.0;
        }
        match self.kind {
            Integrand::Mass => bump(s) * fields.w,
            Integrand::FokkerPlanck { drift_sign } => {
                let along = self.psi.slope_along(s, r, r_ell_cos);
                (fields.a * self.psi.laplacian_at(s, self.params.d) + drift_sign * fields.drift * along) * fields.w
            }
            Integrand::PLaplace => -fields.a * fields.grad * self.psi.slope_along(s, r, r_ell_cos),
        }
    }

    /// `r^{d−1} ∫_{S^{d−1}} integrand dω` at radius `r`.
    fn shell(&self, slice: &TimeSlice<f64>, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let fields = Fields::at(slice, r);
        let d = self.params.d;
        let rd = r.powi(d as i32 - 1);
        if self.ell == 0.0 {
            return self.sigma_d * rd * self.point(r, &fields, 0.0);
        }
        if d == 1 {
            return rd * (self.point(r, &fields, r * self.ell) + self.point(r, &fields, -r * self.ell));
        }
        // ψ vanishes unless cos θ > (r² + ℓ² − ρ²) / (2 r ℓ)
        let rho = self.psi.radius;
        let c_min = ((r * r + self.ell * self.ell - rho * rho) / (2.0 * r * self.ell)).clamp(-1.0, 1.0);
        if c_min >= 1.0 {
            return 0.0;
        }
        let theta_max = c_min.acos();
        let dm2 = d as i32 - 2;
        let angular = integrate_with(
            |th: f64| self.point(r, &fields, r * self.ell * th.cos()) * th.sin().powi(dm2),
            0.0,
            theta_max,
            &settings(ANGLE_TOL),
        )
        .map(|e| e.value);
        self.sigma_dm1 * rd * self.stash(angular, f64::NAN)
    }

    fn at_time(&self, s: f64) -> f64 {
        let slice = match TimeSlice::new(self.params, s) {
            Ok(sl) => sl,
            Err(e) => return self.stash(Err(e), f64::NAN),
        };
        let lo = (self.ell - self.psi.radius).max(0.0);
        let hi = (self.ell + self.psi.radius).min(slice.radius);
        if hi <= lo {
            return 0.0;
        }
        let v = integrate_with(|r| self.shell(&slice, r), lo, hi, &settings(RADIUS_TOL)).map(|e| e.value);
        self.stash(v, f64::NAN)
    }
}

struct Fields {
    w: f64,
    a: f64,
    drift: f64,
    grad: f64,
}

impl Fields {
    #[inline]
    fn at(slice: &TimeSlice<f64>, r: f64) -> Self {
        Self { w: slice.density(r), a: slice.diffusion(r), drift: slice.drift_factor(r), grad: slice.gradient_factor(r) }
    }
}

fn space_setup<'a>(
    params: &'a BarenblattParams<f64>,
    y: &[f64],
    psi: &'a TestFunction,
    kind: Integrand,
    failure: &'a RefCell<Option<Error>>,
) -> Result<Space<'a>> {
    if y.len() != params.d {
        return Err(Error::DimensionMismatch { expected: params.d, got: y.len() });
    }
    if psi.center.len() != params.d {
        return Err(Error::DimensionMismatch { expected: params.d, got: psi.center.len() });
    }
    let ell = distance(&psi.center, y);
    Ok(Space {
        params,
        psi,
        // centered up to rounding: use the exact radial path
        ell: if ell <= 1e-15 * psi.radius { 0.0 } else { ell },
        sigma_d: unit_sphere_area(params.d),
        sigma_dm1: if params.d >= 2 { unit_sphere_area(params.d - 1) } else { 0.0 },
        kind,
        failure,
    })
}

fn finish(value: f64, failure: RefCell<Option<Error>>) -> Result<f64> {
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(value)
}

/// `∫ ψ w^y(s) dx` at physical time `s`.
pub fn tested_mass(params: &BarenblattParams<f64>, y: &[f64], psi: &TestFunction, s: f64) -> Result<f64> {
    let failure = RefCell::new(None);
    let v = space_setup(params, y, psi, Integrand::Mass, &failure)?.at_time(s);
    finish(v, failure)
}

/// `∫_{t₁}^{t₂} ∫ integrand(w(t + δ)) dx dt`.
pub fn space_time_integral(
    params: &BarenblattParams<f64>,
    y: &[f64],
    delta: f64,
    psi: &TestFunction,
    kind: Integrand,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    let failure = RefCell::new(None);
    let space = space_setup(params, y, psi, kind, &failure)?;
    let est = integrate_with(|t| space.at_time(t + delta), t1, t2, &settings(TIME_TOL));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est?.value)
}

fn residual(
    params: &BarenblattParams<f64>,
    y: &[f64],
    delta: f64,
    psi: &TestFunction,
    kind: Integrand,
    t1: f64,
    t2: f64,
) -> Result<Residual> {
    if !(t1 > 0.0 && t2 > t1) {
        return Err(Error::InvalidConfig(format!("need 0 < t1 < t2 (got {t1}, {t2})")));
    }
    let lhs = tested_mass(params, y, psi, t2 + delta)? - tested_mass(params, y, psi, t1 + delta)?;
    let rhs = space_time_integral(params, y, delta, psi, kind, t1, t2)?;
    Ok(Residual { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// Residual of the Fokker–Planck form; `drift_sign = −1` injects a fault.
pub fn weakform_residual_nonlinear(
    params: &BarenblattParams<f64>,
    y: &[f64],
    psi: &TestFunction,
    t1: f64,
    t2: f64,
    drift_sign: f64,
) -> Result<Residual> {
    residual(params, y, 0.0, psi, Integrand::FokkerPlanck { drift_sign }, t1, t2)
}

/// Residual of the divergence (p-Laplace) form.
pub fn weakform_residual_p_laplace(
    params: &BarenblattParams<f64>,
    y: &[f64],
    psi: &TestFunction,
    t1: f64,
    t2: f64,
) -> Result<Residual> {
    residual(params, y, 0.0, psi, Integrand::PLaplace, t1, t2)
}

/// `|∫ψ w(t) dx − ψ(y)|` for each `t` (physical times).
pub fn initial_trace_errors(params: &BarenblattParams<f64>, y: &[f64], psi: &TestFunction, times: &[f64]) -> Result<Vec<f64>> {
    let at_y = psi.value(y);
    times.iter().map(|&t| Ok((tested_mass(params, y, psi, t)? - at_y).abs())).collect()
}
