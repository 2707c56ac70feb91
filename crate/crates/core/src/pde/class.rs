//! Membership in the comparison class: `u(t) ≤ C w_δ(t)` cell-wise, unit mass.

use super::{RadialGrid, RadialState};
use crate::error::{Error, Result};
use crate::report::{ReportParams, Stat, VerificationReport};
use crate::scalar::Real;

/// Tolerated deviation of each snapshot's mass from one.
pub const MASS_TOLERANCE: f64 = 1e-8;

/// Smallest `C` with `u_i ≤ C w_i + tol` in every cell of every snapshot;
/// infinite when `u` carries more than `tol` where `w` vanishes.
pub fn minimal_class_constant<T: Real>(candidate: &[RadialState<T>], reference: &[RadialState<T>], tol: f64) -> Result<f64> {
    if candidate.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), got: candidate.len() });
    }
    let mut c: f64 = 0.0;
    for (u, w) in candidate.iter().zip(reference) {
        if u.values.len() != w.values.len() {
            return Err(Error::DimensionMismatch { expected: w.values.len(), got: u.values.len() });
        }
        for (a, b) in u.values.iter().zip(&w.values) {
            let (a, b) = (a.as_f64(), b.as_f64());
            let excess = a - tol;
            if excess <= 0.0 {
                continue;
            }
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            c = c.max(excess / b);
        }
    }
    Ok(c)
}

/// Checks `candidate ∈ 𝒜` against the tabulated `reference = w_δ` with
/// constant `c_bound`; reports the minimal feasible constant.
pub fn class_membership_check<T: Real>(
    grid: &RadialGrid<T>,
    candidate: &[RadialState<T>],
    reference: &[RadialState<T>],
    params: ReportParams,
    c_bound: f64,
    tol: f64,
) -> Result<(VerificationReport, f64)> {
    let c = minimal_class_constant(candidate, reference, tol)?;
    let mass_dev = candidate.iter().map(|s| (grid.mass(&s.values).as_f64() - 1.0).abs()).fold(0.0, f64::max);
    let inputs = serde_json::json!({
        "cells": grid.cells(), "r_max": grid.r_max.as_f64(), "snapshots": candidate.len(), "C": c_bound, "tol": tol,
    });
    let mut report = VerificationReport::new("class_membership", params, None, &inputs);
    report.push(Stat::at_most("minimal_constant", c, c_bound));
    report.push(Stat::at_most("mass_deviation", mass_dev, MASS_TOLERANCE));
    if c.is_infinite() {
        report.note("candidate carries mass where the reference vanishes: no finite constant");
    }
    Ok((report, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barenblatt::BarenblattParams;

    fn setup() -> (RadialGrid<f64>, Vec<RadialState<f64>>) {
        let params = BarenblattParams::derive(2, 4.0).unwrap();
        let grid = RadialGrid::new(2, 400, 2.0).unwrap();
        let states = [0.0, 0.4]
            .iter()
            .map(|&t| RadialState { time: t, values: grid.tabulate_barenblatt(&params, 0.2 + t).unwrap() })
            .collect();
        (grid, states)
    }

    fn rp() -> ReportParams {
        ReportParams::new(2, 4.0, 0.2, &[0.0, 0.0])
    }

    #[test]
    fn exact_solution_has_constant_one() {
        let (grid, w) = setup();
        let (rep, c) = class_membership_check(&grid, &w, &w, rp(), 1.0 + 1e-6, 0.0).unwrap();
        assert!((c - 1.0).abs() < 1e-6);
        assert!(rep.pass);
    }

    #[test]
    fn compressed_mixture_has_finite_constant() {
        let (grid, w) = setup();
        let params = BarenblattParams::derive(2, 4.0).unwrap();
        // half of w_δ plus half of a copy squeezed inward (the law of 0.8 X), renormalized
        let mixed: Vec<RadialState<f64>> = w
            .iter()
            .map(|s| {
                let slice = params.at(0.2 + s.time).unwrap();
                let squeezed = grid.cell_averages(|r| slice.density(r / 0.8) / 0.64).unwrap();
                let mass = grid.mass(&squeezed);
                let values = s.values.iter().zip(&squeezed).map(|(a, b)| 0.5 * a + 0.5 * b / mass).collect();
                RadialState { time: s.time, values }
            })
            .collect();
        let (rep, c) = class_membership_check(&grid, &mixed, &w, rp(), 10.0, 0.0).unwrap();
        assert!(c.is_finite() && c > 1.0, "{c}");
        assert!(rep.pass);
    }

    #[test]
    fn mass_outside_support_fails() {
        let (grid, w) = setup();
        let mut bad = w.clone();
        let last = grid.cells() - 1;
        bad[1].values[last] = 1e-3;
        let (rep, c) = class_membership_check(&grid, &bad, &w, rp(), 1e6, 1e-12).unwrap();
        assert!(c.is_infinite());
        assert!(!rep.pass);
    }
}
