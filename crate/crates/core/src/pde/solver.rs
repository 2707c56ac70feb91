use std::io::Write;

use serde::Serialize;

use super::{RadialGrid, RadialState};
use crate::barenblatt::BarenblattParams;
use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::scalar::Real;

/// Cells below `−POSITIVITY_FLOOR` abort the solve; values in
/// `(−POSITIVITY_FLOOR, 0)` are clipped to zero and logged.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSettings {
    /// Fraction of the monotonicity limit used as the time step.
    pub cfl: f64,
    /// Constant step instead of the adaptive one; the solve aborts if it
    /// ever exceeds the monotonicity limit.
    pub fixed_dt: Option<f64>,
    pub max_steps: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { cfl: 0.9, fixed_dt: None, max_steps: 200_000_000 }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidConfig(format!("cfl must lie in (0, 1] (got {})", self.cfl)));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidConfig(format!("fixed time step must be positive (got {dt})")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClipEvent {
    pub time: f64,
    pub cell: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub grid: RadialGrid<T>,
    pub states: Vec<RadialState<T>>,
    pub steps: u64,
    pub clip_log: Vec<ClipEvent>,
    /// `|mass(t) / mass(0) − 1|`, maximized over every accepted step.
    pub max_mass_drift: f64,
}

impl<T: Real> Trajectory<T> {
    pub fn times(&self) -> Vec<T> {
        self.states.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &RadialState<T> {
        self.states.last().expect("a trajectory holds its initial state")
    }

    /// CSV `t,r,u`, one row per (snapshot, cell).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r,u")?;
        for s in &self.states {
            let t = fmt17(s.time.as_f64());
            for (r, u) in self.grid.centers.iter().zip(&s.values) {
                writeln!(w, "{t},{},{}", fmt17(r.as_f64()), fmt17(u.as_f64()))?;
            }
        }
        Ok(())
    }
}

/// Face diffusivity model of one solve.
trait Diffusivity<T> {
    /// Fills `flux[j]` (`A_j ×` flux through interior face `j`) and `stiff[j]`
    /// (`A_j ×` derivative of the flux with respect to `Du`) at time `t`.
    fn faces(&mut self, t: T, u: &[T], flux: &mut [T], stiff: &mut [T]);
}

struct PLaplace<T> {
    p_minus_2: T,
    p_minus_1: T,
    int_power: Option<i32>,
    areas: Vec<T>,
    inv_dr: T,
}

impl<T: Real> Diffusivity<T> for PLaplace<T> {
    fn faces(&mut self, _t: T, u: &[T], flux: &mut [T], stiff: &mut [T]) {
        for j in 1..u.len() {
            let du = (u[j] - u[j - 1]) * self.inv_dr;
            let mag = match self.int_power {
                Some(n) => du.abs().powi(n),
                None => du.abs().powf(self.p_minus_2),
            };
            flux[j] = self.areas[j] * mag * du;
            stiff[j] = self.areas[j] * self.p_minus_1 * mag;
        }
    }
}

/// `ρ_δ(t, r) = P(s) (C1 − Q(s) r^γ)_+ r^{(p−2)/(p−1)}` with `s = t + δ`; the
/// radial powers are fixed per face, only `P` and `Q` move with time.
struct Frozen<T> {
    params: BarenblattParams<T>,
    delta: T,
    r_gamma: Vec<T>,
    r_diff: Vec<T>,
    areas: Vec<T>,
    inv_dr: T,
}

impl<T: Real> Frozen<T> {
    fn new(params: &BarenblattParams<T>, delta: T, grid: &RadialGrid<T>) -> Self {
        let p = params.p;
        let gamma = params.radial_power();
        let diff_power = (p - T::c(2.0)) / (p - T::one());
        Self {
            params: params.clone(),
            delta,
            r_gamma: grid.faces.iter().map(|r| r.powf(gamma)).collect(),
            r_diff: grid.faces.iter().map(|r| r.powf(diff_power)).collect(),
            areas: grid.areas.clone(),
            inv_dr: grid.dr.recip(),
        }
    }

    fn coefficient(&self, s: T) -> (T, T) {
        let p = self.params.p;
        let two = T::c(2.0);
        let m = self.params.time_power();
        let prefactor = self.params.gradient_constant().powf(p - two) * s.powf(-(self.params.k + m) * (p - two));
        (prefactor, self.params.q * s.powf(-m))
    }

    fn rho(&self, s: T, j: usize) -> T {
        let (pre, q_s) = self.coefficient(s);
        let g = self.params.c1 - q_s * self.r_gamma[j];
        if g > T::zero() {
            pre * g * self.r_diff[j]
        } else {
            T::zero()
        }
    }
}

impl<T: Real> Diffusivity<T> for Frozen<T> {
    fn faces(&mut self, t: T, u: &[T], flux: &mut [T], stiff: &mut [T]) {
        let (pre, q_s) = self.coefficient(t + self.delta);
        for j in 1..u.len() {
            let g = self.params.c1 - q_s * self.r_gamma[j];
            let rho = if g > T::zero() { pre * g * self.r_diff[j] } else { T::zero() };
            let a = self.areas[j] * rho;
            flux[j] = a * (u[j] - u[j - 1]) * self.inv_dr;
            stiff[j] = a;
        }
    }
}

fn check_initial<T: Real>(grid: &RadialGrid<T>, initial: &RadialState<T>, times: &[T]) -> Result<()> {
    if initial.values.len() != grid.cells() {
        return Err(Error::DimensionMismatch { expected: grid.cells(), got: initial.values.len() });
    }
    if initial.values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::InvalidConfig("initial state must be finite and nonnegative".into()));
    }
    let mut prev = initial.time;
    for &t in times {
        if !(t >= prev) || !t.is_finite() {
            return Err(Error::InvalidConfig("output times must be finite, nondecreasing and not before the initial time".into()));
        }
        prev = t;
    }
    Ok(())
}

fn evolve<T: Real, D: Diffusivity<T>>(
    grid: &RadialGrid<T>,
    initial: &RadialState<T>,
    times: &[T],
    settings: &SolverSettings,
    model: &mut D,
) -> Result<Trajectory<T>> {
    settings.validate()?;
    check_initial(grid, initial, times)?;
    let m = grid.cells();
    let dr = grid.dr;
    let inv_vol: Vec<T> = grid.volumes.iter().map(|v| v.recip()).collect();
    let cfl = T::c(settings.cfl);
    let floor = T::c(POSITIVITY_FLOOR);

    let mut u = initial.values.clone();
    let mut t = initial.time;
    let mass0 = grid.mass(&u).as_f64();
    let mut flux = vec![T::zero(); m + 1];
    let mut stiff = vec![T::zero(); m + 1];
    let mut states = vec![initial.clone()];
    let mut clip_log = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut steps = 0u64;

    for &target in times {
        while t < target {
            model.faces(t, &u, &mut flux, &mut stiff);
            // monotonicity limit: dt * (A⁻D⁻ + A⁺D⁺) / (vol dr) ≤ 1 per cell
            let mut limit = T::infinity();
            for i in 0..m {
                let load = (stiff[i] + stiff[i + 1]) * inv_vol[i];
                if load > T::zero() {
                    limit = limit.min(dr / load);
                }
            }
            let remaining = target - t;
            let dt = match settings.fixed_dt {
                Some(fixed) => {
                    let fixed = T::c(fixed);
                    if fixed > limit * (T::one() + T::c(1e-12)) {
                        return Err(Error::SolverAbort(format!(
                            "fixed step {} exceeds the stability limit {} at t = {}",
                            fixed.as_f64(),
                            limit.as_f64(),
                            t.as_f64()
                        )));
                    }
                    fixed.min(remaining)
                }
                None => {
                    let step = cfl * limit;
                    // avoid a sliver step at the end
                    if step >= remaining * T::c(0.999) {
                        remaining
                    } else {
                        step
                    }
                }
            };
            for i in 0..m {
                u[i] = u[i] + dt * (flux[i + 1] - flux[i]) * inv_vol[i];
                if u[i] < T::zero() {
                    if u[i] < -floor {
                        return Err(Error::SolverAbort(format!(
                            "cell {i} reached {} at t = {}",
                            u[i].as_f64(),
                            (t + dt).as_f64()
                        )));
                    }
                    clip_log.push(ClipEvent { time: (t + dt).as_f64(), cell: i, value: u[i].as_f64() });
                    u[i] = T::zero();
                }
            }
            t = if dt == remaining { target } else { t + dt };
            steps += 1;
            if steps > settings.max_steps {
                return Err(Error::SolverAbort(format!("step budget {} exhausted at t = {}", settings.max_steps, t.as_f64())));
            }
            if mass0 > 0.0 && steps.is_multiple_of(256) {
                max_drift = max_drift.max((grid.mass(&u).as_f64() / mass0 - 1.0).abs());
            }
            if !u.iter().all(|v| v.is_finite()) {
                return Err(Error::SolverAbort(format!("non-finite cell value at t = {}", t.as_f64())));
            }
        }
        if mass0 > 0.0 {
            max_drift = max_drift.max((grid.mass(&u).as_f64() / mass0 - 1.0).abs());
        }
        states.push(RadialState { time: target, values: u.clone() });
    }
    Ok(Trajectory { grid: grid.clone(), states, steps, clip_log, max_mass_drift: max_drift })
}

/// `∂_t u = div(|∇u|^{p−2}∇u)` from `initial` to every time in `times`.
pub fn solve_plaplace<T: Real>(
    grid: &RadialGrid<T>,
    initial: &RadialState<T>,
    p: T,
    times: &[T],
    settings: &SolverSettings,
) -> Result<Trajectory<T>> {
    if !(p > T::c(2.0)) {
        return Err(Error::InvalidExponent(p.as_f64()));
    }
    let pm2 = p - T::c(2.0);
    let int_power = (pm2.fract() == T::zero() && pm2 <= T::c(16.0)).then(|| pm2.to_i32().unwrap_or(0));
    let mut model = PLaplace {
        p_minus_2: pm2,
        p_minus_1: p - T::one(),
        int_power,
        areas: grid.areas.clone(),
        inv_dr: grid.dr.recip(),
    };
    evolve(grid, initial, times, settings, &mut model)
}

/// `∂_t u = div(ρ_δ ∇u)`, equivalently `Δ(ρ_δ u) − div(u ∇ρ_δ)`, with `ρ_δ`
/// evaluated in closed form at the faces.
pub fn solve_linearized_fpe<T: Real>(
    grid: &RadialGrid<T>,
    initial: &RadialState<T>,
    params: &BarenblattParams<T>,
    delta: T,
    times: &[T],
    settings: &SolverSettings,
) -> Result<Trajectory<T>> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidConfig(format!("the frozen coefficient needs delta > 0 (got {})", delta.as_f64())));
    }
    if params.d != grid.d {
        return Err(Error::DimensionMismatch { expected: grid.d, got: params.d });
    }
    let mut model = Frozen::new(params, delta, grid);
    evolve(grid, initial, times, settings, &mut model)
}

/// `ρ_δ(t)` at every face (exposed for diagnostics and tests).
pub fn frozen_face_coefficient<T: Real>(params: &BarenblattParams<T>, delta: T, grid: &RadialGrid<T>, t: T) -> Vec<T> {
    let model = Frozen::new(params, delta, grid);
    (0..grid.faces.len()).map(|j| model.rho(t + delta, j)).collect()
}

/// Cell values of `div(ρ ∇u)` with `ρ` given at faces.
pub fn divergence_form<T: Real>(grid: &RadialGrid<T>, u: &[T], rho_faces: &[T]) -> Vec<T> {
    let m = grid.cells();
    let mut flux = vec![T::zero(); m + 1];
    for j in 1..m {
        flux[j] = grid.areas[j] * rho_faces[j] * (u[j] - u[j - 1]) / grid.dr;
    }
    (0..m).map(|i| (flux[i + 1] - flux[i]) / grid.volumes[i]).collect()
}

/// Cell values of `Δ(ρu) − div(u ∇ρ)` with `ρ` at cell centers and `∂_r ρ`
/// at faces; the face value of `u` is the two-point average.
pub fn fokker_planck_form<T: Real>(grid: &RadialGrid<T>, u: &[T], rho_centers: &[T], drho_faces: &[T]) -> Vec<T> {
    let m = grid.cells();
    let half = T::c(0.5);
    let mut flux = vec![T::zero(); m + 1];
    for j in 1..m {
        let grad = (rho_centers[j] * u[j] - rho_centers[j - 1] * u[j - 1]) / grid.dr;
        flux[j] = grid.areas[j] * (grad - half * (u[j] + u[j - 1]) * drho_faces[j]);
    }
    (0..m).map(|i| (flux[i + 1] - flux[i]) / grid.volumes[i]).collect()
}
