//! Flow property of the marginal laws and translation covariance.

use serde::Serialize;

use crate::barenblatt::BarenblattParams;
use crate::error::{Error, Result};
use crate::numerics::ks::{critical_two_sample, ks_two_sample, ks_two_sample_2d};
use crate::numerics::rng::derive_seed;
use crate::report::{ReportParams, Stat, VerificationReport};
use crate::sde::{simulate, PathEnsemble, SimConfig};

/// Tolerance for closed-form identities evaluated at probe points.
pub const PROBE_TOL: f64 = 1e-14;
pub const FLOW_KS_TOL: f64 = 0.02;
pub const JOINT_KS_TOL: f64 = 0.03;

pub const PATH_LAW_CAVEAT: &str = "path-law caveat: the laws of the nonlinear process started at y and at 0 \
are not image measures of each other under translation; that statement concerns joint laws on path space and \
is not a falsifiable desk test. This check asserts only the translation covariance of the marginals and of \
the radial two-time law, which do hold for this construction.";

/// Offset added to the composed time in the analytic mode (fault injection).
const DELTA_BUG: f64 = 0.1;

fn rel_mismatch(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Probe points: radii `R/16, …, 1.25 R` along a few fixed directions
/// about `y`.
fn probes(y: &[f64], radius: f64) -> Vec<Vec<f64>> {
    let d = y.len();
    let dirs: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let v: Vec<f64> = (0..d).map(|i| ((i + 1) as f64 * (k as f64 + 0.7)).cos()).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let mut out = Vec::new();
    for j in 1..=20 {
        let r = radius * j as f64 / 16.0;
        for u in &dirs {
            out.push(y.iter().zip(u).map(|(a, b)| a + r * b).collect());
        }
    }
    out
}

/// `μ^{s,ζ}_t` against `μ^{r, μ^{s,ζ}_r}_t` with `ζ = w_δ` at time `s`:
/// both are `w^y` at `δ + t − s`, the right side reached through the
/// intermediate time `r`.
pub fn flow_property_analytic(
    params: &BarenblattParams<f64>,
    y: &[f64],
    delta: f64,
    s: f64,
    r: f64,
    t: f64,
    delta_bug: bool,
) -> Result<VerificationReport> {
    if !(s <= r && r <= t) {
        return Err(Error::InvalidConfig(format!("flow check needs s <= r <= t (got {s}, {r}, {t})")));
    }
    if y.len() != params.d {
        return Err(Error::DimensionMismatch { expected: params.d, got: y.len() });
    }
    let direct = delta + (t - s);
    // the law at r is w(δ + r − s): an offset δ' = δ + r − s for the second leg
    let offset_at_r = delta + (r - s);
    let composed = offset_at_r + (t - r) + if delta_bug { DELTA_BUG } else { 0.0 };
    let radius = params.support_radius(direct.max(composed))?;
    let mut worst: f64 = 0.0;
    for x in probes(y, radius) {
        let a = params.density(y, direct, &x)?;
        let b = params.density(y, composed, &x)?;
        worst = worst.max(rel_mismatch(a, b));
    }
    let inputs = serde_json::json!({ "mode": "analytic", "s": s, "r": r, "t": t, "delta_bug": delta_bug });
    let mut report = VerificationReport::new("flow", ReportParams::new(params.d, params.p, delta, y), None, &inputs);
    report.push(Stat::at_most("analytic_density_mismatch", worst, PROBE_TOL));
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowEnsembleOutcome {
    pub ks: f64,
    pub critical: f64,
    pub paths: usize,
}

/// Runs `config` directly to `t`, restarts it at `r` with fresh noise and
/// compares the radial laws at `t` by a two-sample KS test.
pub fn flow_property_ensemble(config: &SimConfig, r: f64, t: f64) -> Result<(VerificationReport, FlowEnsembleOutcome)> {
    if !(config.t0 <= r && r <= t) {
        return Err(Error::InvalidConfig(format!("flow check needs t0 <= r <= t (got {}, {r}, {t})", config.t0)));
    }
    let mut cfg = config.clone();
    cfg.horizon = t;
    cfg.snapshot_times.retain(|s| *s <= t);
    cfg.snapshot_times.push(r);
    let direct = simulate(&cfg)?;
    let (report, outcome) = flow_from_ensemble(&direct, r)?;
    Ok((report, outcome))
}

/// Same as [`flow_property_ensemble`] on an existing run whose horizon is `t`.
pub fn flow_from_ensemble(direct: &PathEnsemble, r: f64) -> Result<(VerificationReport, FlowEnsembleOutcome)> {
    let cfg = &direct.config;
    let t = cfg.horizon;
    let ri = direct
        .snapshot_index(r)
        .ok_or_else(|| Error::InvalidConfig(format!("no snapshot at restart time {r}")))?;
    let ti = direct.snapshots.len() - 1;
    let restarted = direct.restart(ri, t)?;
    let a = direct.radii(ti);
    let b = restarted.radii(restarted.snapshots.len() - 1);
    let ks = ks_two_sample(&a, &b);
    let critical = critical_two_sample(a.len(), b.len());
    let inputs = serde_json::json!({ "mode": "ensemble", "config": cfg, "r": r, "t": t });
    let mut report = VerificationReport::new(
        "flow",
        ReportParams::new(cfg.params.d, cfg.params.p, cfg.delta0, &cfg.center),
        Some(cfg.seed),
        &inputs,
    );
    report.push(Stat::at_most("restart_ks", ks, FLOW_KS_TOL));
    report.note(format!("99% two-sample critical value {critical:.5} at N = {}", a.len()));
    Ok((report, FlowEnsembleOutcome { ks, critical, paths: a.len() }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationFault {
    /// Measures the centered run's radii about `y` instead of the origin.
    WrongCenter,
}

/// Marginal covariance `w^y(t, x) = w⁰(t, x − y)` at probe points, then the
/// radial two-time law `(|X(r) − y|, |X(t) − y|)` under a start at `y`
/// against `(|X(r)|, |X(t)|)` under a start at the origin (independent noise).
pub fn translation_noninvariance_check(
    config: &SimConfig,
    r: f64,
    fault: Option<TranslationFault>,
) -> Result<VerificationReport> {
    let params = &config.params;
    let y = &config.center;
    if y.iter().all(|c| *c == 0.0) {
        return Err(Error::InvalidConfig("translation check needs a center y != 0".into()));
    }
    let origin = vec![0.0; params.d];
    let t = config.horizon;
    let s = config.physical_time(t);
    let mut worst: f64 = 0.0;
    for x in probes(y, params.support_radius(s)?) {
        let shifted: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let mut pairs = vec![(params.density(y, s, &x)?, params.density(&origin, s, &shifted)?)];
        pairs.push((params.diffusion_a(y, config.delta0, t, &x)?, params.diffusion_a(&origin, config.delta0, t, &shifted)?));
        let g = params.gradient(y, s, &x)?;
        let g0 = params.gradient(&origin, s, &shifted)?;
        let b = params.drift_b(y, config.delta0, t, &x)?;
        let b0 = params.drift_b(&origin, config.delta0, t, &shifted)?;
        pairs.extend(g.into_iter().zip(g0));
        pairs.extend(b.into_iter().zip(b0));
        for (a, b) in pairs {
            worst = worst.max(rel_mismatch(a, b));
        }
    }

    let mut at_y = config.clone();
    at_y.snapshot_times = vec![r];
    let mut at_0 = at_y.clone();
    at_0.center = origin.clone();
    at_0.seed = derive_seed(config.seed, 0x7472_616e_736c_6174);
    let run_y = simulate(&at_y)?;
    let run_0 = simulate(&at_0)?;
    let joint = |run: &PathEnsemble, center: &[f64]| -> Result<Vec<(f64, f64)>> {
        let ri = run.snapshot_index(r).ok_or_else(|| Error::InvalidConfig(format!("no snapshot at {r}")))?;
        let ti = run.snapshots.len() - 1;
        Ok(run.radii_about(ri, center).into_iter().zip(run.radii_about(ti, center)).collect())
    };
    let a = joint(&run_y, y)?;
    let b = match fault {
        None => joint(&run_0, &origin)?,
        Some(TranslationFault::WrongCenter) => joint(&run_0, y)?,
    };
    let ks2 = ks_two_sample_2d(&a, &b);

    let inputs = serde_json::json!({ "config": config, "r": r, "fault": fault });
    let mut report = VerificationReport::new(
        "translation",
        ReportParams::new(params.d, params.p, config.delta0, y),
        Some(config.seed),
        &inputs,
    );
    report.push(Stat::at_most("marginal_covariance_mismatch", worst, PROBE_TOL));
    report.push(Stat::at_most("radial_joint_ks2d", ks2, JOINT_KS_TOL));
    report.note(PATH_LAW_CAVEAT);
    Ok(report)
}
