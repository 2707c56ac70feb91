//! Radial finite volumes for `∂_t u = div(|∇u|^{p−2}∇u)` and for the linear
//! equation `∂_t u = div(ρ_δ ∇u)` with the frozen coefficient
//! `ρ_δ(t) = |∇w(t + δ)|^{p−2}`.
//!
//! Cells are shells `[r_{i−1/2}, r_{i+1/2}]` of a uniform grid on `[0, R_max]`;
//! both ends carry zero flux. Time stepping is explicit with a step chosen
//! from the current face diffusivities, which keeps the update monotone.

mod class;
mod solver;

pub use class::{class_membership_check, minimal_class_constant};
pub use solver::{
    divergence_form, fokker_planck_form, frozen_face_coefficient, solve_linearized_fpe, solve_plaplace, ClipEvent,
    SolverSettings, Trajectory, POSITIVITY_FLOOR,
};

use crate::barenblatt::{BarenblattParams, TimeSlice};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_with, QuadSettings};
use crate::scalar::{unit_sphere_area, Real};

/// Cell averages `u_i ≥ 0` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialState<T> {
    pub time: T,
    pub values: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid<T> {
    pub d: usize,
    pub r_max: T,
    pub dr: T,
    /// `M + 1` faces, `faces[0] = 0`.
    pub faces: Vec<T>,
    pub centers: Vec<T>,
    pub volumes: Vec<T>,
    /// `σ_d r^{d−1}` at every face.
    pub areas: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    pub fn new(d: usize, cells: usize, r_max: T) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        if cells < 2 {
            return Err(Error::InvalidConfig(format!("a radial grid needs at least 2 cells (got {cells})")));
        }
        if !(r_max > T::zero() && r_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("grid radius must be positive (got {})", r_max.as_f64())));
        }
        let dr = r_max / T::c(cells as f64);
        let sigma: T = unit_sphere_area(d);
        let dd = T::c(d as f64);
        let faces: Vec<T> = (0..=cells).map(|i| if i == cells { r_max } else { dr * T::c(i as f64) }).collect();
        let centers = faces.windows(2).map(|f| T::c(0.5) * (f[0] + f[1])).collect();
        let volumes = faces.windows(2).map(|f| sigma * (f[1].powi(d as i32) - f[0].powi(d as i32)) / dd).collect();
        let areas = faces.iter().map(|f| sigma * f.powi(d as i32 - 1)).collect();
        Ok(Self { d, r_max, dr, faces, centers, volumes, areas })
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn mass(&self, u: &[T]) -> T {
        u.iter().zip(&self.volumes).map(|(a, v)| *a * *v).sum()
    }

    /// `Σ |a_i − b_i| vol_i`.
    pub fn l1_distance(&self, a: &[T], b: &[T]) -> T {
        a.iter().zip(b).zip(&self.volumes).map(|((x, y), v)| (*x - *y).abs() * *v).sum()
    }

    /// Cell averages of a radial function by adaptive quadrature per cell.
    pub fn cell_averages<F: Fn(T) -> T>(&self, f: F) -> Result<Vec<T>> {
        let sigma: T = unit_sphere_area(self.d);
        let dm1 = self.d as i32 - 1;
        let settings = QuadSettings {
            abs_tol: (T::tol_floor() * T::c(1e-2)).as_f64().max(1e-16),
            rel_tol: T::tol_floor().as_f64().max(1e-13),
            ..QuadSettings::default()
        };
        self.faces
            .windows(2)
            .zip(&self.volumes)
            .map(|(face, vol)| {
                let est = integrate_with(|r: T| sigma * r.powi(dm1) * f(r), face[0], face[1], &settings)?;
                Ok(est.value / *vol)
            })
            .collect()
    }

    /// Cell averages of `w(s, ·)`.
    pub fn tabulate_barenblatt(&self, params: &BarenblattParams<T>, s: T) -> Result<Vec<T>> {
        if params.d != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: params.d });
        }
        let slice = TimeSlice::new(params, s)?;
        self.cell_averages(|r| slice.density(r))
    }

    /// Center of the outermost cell with `u > threshold`.
    pub fn support_edge(&self, u: &[T], threshold: T) -> Option<T> {
        u.iter().rposition(|v| *v > threshold).map(|i| self.centers[i])
    }
}
