//! Finiteness of `∫₀^T ∫ (|∇w|^{p−2} + |∇(|∇w|^{p−2})|) w dx dt`.
//!
//! Time is split into dyadic pieces `[T 2^{−j−1}, T 2^{−j}]`. For an integrand
//! behaving like `t^α` near zero the piece contributions form a geometric
//! sequence with ratio `2^{−(α+1)}`; once the ratio settles, a ratio below one
//! closes the sum with its geometric tail and a ratio of one or more means the
//! integral diverges.

use serde::Serialize;

use crate::barenblatt::{check_exponents, BarenblattParams, TimeSlice};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_with, QuadSettings};
use crate::report::{ReportParams, Stat, VerificationReport};
use crate::scalar::unit_sphere_area;

const MAX_LEVELS: usize = 400;
const MIN_LEVELS: usize = 8;
/// Ratio considered settled when successive ratios differ by less than this.
const RATIO_SETTLED: f64 = 1e-6;
/// Stop once the geometric tail is this small relative to the running sum.
const TAIL_REL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradedIntegral {
    pub value: f64,
    pub verdict: Verdict,
    pub levels: usize,
    /// Last ratio of successive dyadic contributions.
    pub ratio: f64,
}

/// `∫₀^T f(t) dt` for `f ≥ 0` with a possible singularity at `t = 0`.
pub fn graded_time_integral<F: Fn(f64) -> Result<f64>>(f: F, horizon: f64) -> Result<GradedIntegral> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::NonPositiveTime(horizon));
    }
    let settings = QuadSettings { abs_tol: 0.0, rel_tol: 1e-11, ..QuadSettings::default() };
    let mut failure = None;
    let mut piece = |a: f64, b: f64| -> Result<f64> {
        let est = integrate_with(
            |t| {
                f(t).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    f64::NAN
                })
            },
            a,
            b,
            &settings,
        );
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(est?.value)
    };

    let mut sum = 0.0;
    let mut prev = f64::NAN;
    let mut ratio = f64::NAN;
    let mut upper = horizon;
    for level in 0..MAX_LEVELS {
        let lower = 0.5 * upper;
        let c = piece(lower, upper)?;
        sum += c;
        upper = lower;
        if c == 0.0 {
            // integrand vanishes near zero
            return Ok(GradedIntegral { value: sum, verdict: Verdict::Finite, levels: level + 1, ratio: 0.0 });
        }
        let new_ratio = c / prev;
        let settled = level >= MIN_LEVELS && (new_ratio - ratio).abs() <= RATIO_SETTLED * new_ratio.abs();
        prev = c;
        ratio = new_ratio;
        if settled {
            if ratio >= 1.0 {
                return Ok(GradedIntegral { value: f64::INFINITY, verdict: Verdict::Infinite, levels: level + 1, ratio });
            }
            let tail = c * ratio / (1.0 - ratio);
            if tail <= TAIL_REL * sum {
                return Ok(GradedIntegral { value: sum + tail, verdict: Verdict::Finite, levels: level + 1, ratio });
            }
        }
    }
    if ratio >= 1.0 || !ratio.is_finite() {
        return Ok(GradedIntegral { value: f64::INFINITY, verdict: Verdict::Infinite, levels: MAX_LEVELS, ratio });
    }
    Ok(GradedIntegral { value: sum + prev * ratio / (1.0 - ratio), verdict: Verdict::Finite, levels: MAX_LEVELS, ratio })
}

/// `∫ (a + |b|) w dx` at physical time `s`.
pub fn coefficient_moment(params: &BarenblattParams<f64>, s: f64) -> Result<f64> {
    let slice = TimeSlice::new(params, s)?;
    let d = params.d as i32;
    let sigma: f64 = unit_sphere_area(params.d);
    let settings = QuadSettings { abs_tol: 0.0, rel_tol: 1e-12, ..QuadSettings::default() };
    let est = integrate_with(
        |r: f64| {
            if r <= 0.0 {
                return 0.0;
            }
            let (a, f) = slice.coefficients(r);
            (a + f.abs() * r) * slice.density(r) * r.powi(d - 1)
        },
        0.0,
        slice.radius,
        &settings,
    )?;
    Ok(sigma * est.value)
}

/// Replaces the time integrand by `t^{exponent}` to check that divergence
/// is recognized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFault {
    pub exponent: f64,
}

pub fn integrability_check(
    params: &BarenblattParams<f64>,
    y: &[f64],
    delta: f64,
    horizon: f64,
    fault: Option<ExponentFault>,
) -> Result<(VerificationReport, GradedIntegral)> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be >= 0 (got {delta})")));
    }
    let outcome = match fault {
        None => graded_time_integral(|t| coefficient_moment(params, t + delta), horizon)?,
        Some(f) => graded_time_integral(|t| Ok(t.powf(f.exponent)), horizon)?,
    };
    let inputs = serde_json::json!({ "T": horizon, "fault": fault });
    let mut report =
        VerificationReport::new("integrability", ReportParams::new(params.d, params.p, delta, y), None, &inputs);
    report.push(Stat::flag("finite", outcome.verdict == Verdict::Finite));
    report.push(Stat::at_most("dyadic_ratio", outcome.ratio, 1.0));
    report.note(format!("value = {:e} after {} dyadic levels", outcome.value, outcome.levels));
    for row in check_exponents(params.d, params.p) {
        report.note(format!("{}: {} (lhs = {:.6})", row.name, row.inequality, row.lhs));
    }
    Ok((report, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_laws() {
        for alpha in [-0.9, -0.5, 0.0, 1.0] {
            let g = graded_time_integral(|t: f64| Ok(t.powf(alpha)), 2.0).unwrap();
            let exact = 2f64.powf(alpha + 1.0) / (alpha + 1.0);
            assert_eq!(g.verdict, Verdict::Finite);
            assert!((g.value - exact).abs() < 1e-8 * exact, "alpha {alpha}: {} vs {exact}", g.value);
        }
        for alpha in [-1.0, -1.1, -2.0] {
            let g = graded_time_integral(|t: f64| Ok(t.powf(alpha)), 1.0).unwrap();
            assert_eq!(g.verdict, Verdict::Infinite, "alpha {alpha}");
        }
    }

    #[test]
    fn reference_is_finite_and_monotone_in_horizon() {
        let p = BarenblattParams::derive(2, 4.0).unwrap();
        let y = [0.0, 0.0];
        let (r1, g1) = integrability_check(&p, &y, 0.0, 1.0, None).unwrap();
        let (_, g2) = integrability_check(&p, &y, 0.0, 2.0, None).unwrap();
        assert!(r1.pass, "{r1:?}");
        assert!(g1.value.is_finite() && g2.value >= g1.value);
        let (bad, g) = integrability_check(&p, &y, 0.0, 1.0, Some(ExponentFault { exponent: -1.1 })).unwrap();
        assert_eq!(g.verdict, Verdict::Infinite);
        assert!(!bad.pass);
    }

    #[test]
    fn moment_scales_like_a_power() {
        // the moment is a sum of two powers of s; check positivity and growth toward 0
        let p = BarenblattParams::derive(3, 3.0).unwrap();
        let m1 = coefficient_moment(&p, 1.0).unwrap();
        let m2 = coefficient_moment(&p, 1e-3).unwrap();
        assert!(m1 > 0.0 && m2 > m1);
    }
}
