//! Named verification suites: each bundles the checks of one area into a list
//! of reports plus CSV traces. `all` runs every suite and shares the expensive
//! runs (the reference ensemble, the nonlinear refinement study) between them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use super::flow::{flow_from_ensemble, flow_property_analytic, translation_noninvariance_check, TranslationFault};
use super::integrability::{integrability_check, ExponentFault, Verdict};
use super::test_functions::{TestFunction, TestFunctionFamily};
use super::weakform::{initial_trace_errors, weakform_residual_nonlinear, weakform_residual_p_laplace};
use crate::barenblatt::{check_exponents, BarenblattParams, DiffusionConvention};
use crate::error::{Error, Result};
use crate::io::{fmt17, sig17, sig17_opt, sig17_vec, write_csv_row};
use crate::numerics::ks::{critical_one_sample, ks_one_sample};
use crate::numerics::quadrature::{integrate_with, QuadSettings};
use crate::numerics::radial_cdf::sample_barenblatt;
use crate::numerics::rng::{derive_seed, RngStream};
use crate::pde::{
    class_membership_check, frozen_face_coefficient, solve_linearized_fpe, solve_plaplace, RadialGrid, RadialState,
    SolverSettings, Trajectory,
};
use crate::report::{ReportParams, Stat, VerificationReport};
use crate::scalar::unit_sphere_area;
use crate::sde::markov::{continue_bins, BinShift, StreamsSetting};
use crate::sde::{simulate, PathEnsemble, SimConfig};

pub const NORMALIZATION_TOL: f64 = 1e-8;
pub const FD_TOL: f64 = 1e-5;
pub const SAMPLER_KS_TOL: f64 = 0.006;
pub const MARGINAL_KS_TOL: f64 = 0.015;
pub const LEAKAGE_FACTOR: f64 = 1.05;
pub const LEAKAGE_TOL: f64 = 0.01;
pub const LITERAL_KS_MIN: f64 = 0.1;
pub const WEAKFORM_TOL: f64 = 1e-5;
pub const FORMS_AGREE_TOL: f64 = 2e-5;
pub const PDE_L1_TOL: f64 = 5e-3;
pub const PDE_MASS_TOL: f64 = 1e-10;
pub const CLASS_CONSTANT_TOL: f64 = 1e-6;
/// Radius of the PDE domain relative to the final support radius.
const DOMAIN_FACTOR: f64 = 1.25;
const NORMALIZATION_CASES: [(usize, f64); 3] = [(2, 4.0), (3, 4.0), (2, 3.5)];
const NORMALIZATION_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
const FD_PROBES: usize = 1000;
const TRACE_POINTS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Marginals,
    Support,
    Weakform,
    Exponents,
    Integrability,
    Flow,
    Markov,
    Linearized,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Exponents,
        Suite::Integrability,
        Suite::Weakform,
        Suite::Marginals,
        Suite::Support,
        Suite::Flow,
        Suite::Linearized,
        Suite::Markov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Marginals => "marginals",
            Suite::Support => "support",
            Suite::Weakform => "weakform",
            Suite::Exponents => "exponents",
            Suite::Integrability => "integrability",
            Suite::Flow => "flow",
            Suite::Markov => "markov",
            Suite::Linearized => "linearized",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite {s:?}")))
    }
}

/// Everything a suite run depends on. Defaults are the reference
/// configuration (`d = 2`, `p = 4`, center at the origin).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub d: usize,
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    #[serde(serialize_with = "sig17_vec")]
    pub y: Vec<f64>,
    /// Time offset of the PDE studies; `None` uses 0.1 (nonlinear) and 0.2
    /// (linearized). The particle runs always start from the Dirac mass.
    #[serde(default, serialize_with = "sig17_opt")]
    pub delta: Option<f64>,
    #[serde(serialize_with = "sig17")]
    pub t0: f64,
    #[serde(serialize_with = "sig17")]
    pub horizon: f64,
    #[serde(serialize_with = "sig17")]
    pub step: f64,
    pub paths: usize,
    pub markov_paths: usize,
    #[serde(serialize_with = "sig17")]
    pub restart_time: f64,
    #[serde(serialize_with = "sig17")]
    pub markov_r: f64,
    #[serde(serialize_with = "sig17")]
    pub markov_t: f64,
    pub markov_bins: usize,
    /// Finest radial grid; the refinement study also uses `cells/4`, `cells/2`.
    pub cells: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            d: 2,
            p: 4.0,
            y: vec![0.0, 0.0],
            delta: None,
            t0: 0.05,
            horizon: 1.0,
            step: 1e-3,
            paths: 100_000,
            markov_paths: 200_000,
            restart_time: 0.5,
            markov_r: 0.3,
            markov_t: 0.8,
            markov_bins: 5,
            cells: 2000,
            seed: 1,
        }
    }
}

impl SuiteConfig {
    /// Reference configuration in dimension `d` with exponent `p`.
    pub fn reference(d: usize, p: f64) -> Self {
        Self { d, p, y: vec![0.0; d], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: self.y.len() });
        }
        if self.cells < 8 {
            return Err(Error::InvalidConfig(format!("need at least 8 cells (got {})", self.cells)));
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta < self.horizon) {
                return Err(Error::InvalidConfig(format!("delta must lie in (0, T) (got {delta})")));
            }
        }
        if !(self.markov_r < self.markov_t && self.markov_t <= self.horizon) {
            return Err(Error::InvalidConfig("need markov r < t <= T".into()));
        }
        self.sim_config()?.validate()?;
        self.markov_config()?.validate()
    }

    fn params(&self) -> Result<BarenblattParams<f64>> {
        BarenblattParams::derive(self.d, self.p)
    }

    fn report_params(&self, delta: f64) -> ReportParams {
        ReportParams::new(self.d, self.p, delta, &self.y)
    }

    /// The reference particle run: snapshot at the restart time, noise on
    /// the `h/4` grid so the step-halving runs share it.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut c = SimConfig::new(self.params()?, self.y.clone());
        c.t0 = self.t0;
        c.horizon = self.horizon;
        c.step = self.step;
        c.paths = self.paths;
        c.seed = self.seed;
        c.snapshot_times = vec![self.restart_time];
        c.crn_substeps = 4;
        Ok(c)
    }

    fn markov_config(&self) -> Result<SimConfig> {
        let mut c = self.sim_config()?;
        c.paths = self.markov_paths;
        c.horizon = self.markov_t;
        c.snapshot_times = vec![self.markov_r];
        c.crn_substeps = 1;
        c.seed = derive_seed(self.seed, 0x6d61_726b_6f76);
        Ok(c)
    }

    fn nonlinear_delta(&self) -> f64 {
        self.delta.unwrap_or(0.1)
    }

    fn linearized_delta(&self) -> f64 {
        self.delta.unwrap_or(0.2)
    }
}

/// Columns of numbers written as CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Trace {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_csv_row(&mut w, &self.header)?;
        for row in &self.rows {
            write_csv_row(&mut w, &row.iter().map(|v| fmt17(*v)).collect::<Vec<_>>())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub config: SuiteConfig,
    pub reports: Vec<VerificationReport>,
    pub traces: Vec<Trace>,
}

#[derive(Serialize)]
struct Aggregate<'a> {
    suite: Suite,
    pass: bool,
    config: &'a SuiteConfig,
    reports: &'a [VerificationReport],
}

impl SuiteOutcome {
    pub fn pass(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(|r| r.pass)
    }

    pub fn report(&self, check: &str) -> Option<&VerificationReport> {
        self.reports.iter().find(|r| r.check == check)
    }

    /// `{suite, pass, config, reports}`.
    pub fn to_json(&self) -> Result<String> {
        let agg = Aggregate { suite: self.suite, pass: self.pass(), config: &self.config, reports: &self.reports };
        Ok(crate::io::to_json_string(&agg)?)
    }

    /// Overrides a named tolerance in every report that has the statistic;
    /// returns whether any report did.
    pub fn override_tol(&mut self, name: &str, tol: f64) -> bool {
        let mut found = false;
        for r in &mut self.reports {
            found |= r.override_tol(name, tol);
        }
        found
    }
}

/// `C1` from the Beta-function form of the unit-time mass:
/// `C1 = (γ q^{d/γ} / (σ_d B(d/γ, e+1)))^{1/(e + d/γ)}`.
pub fn beta_c1(d: usize, p: f64) -> f64 {
    let params = BarenblattParams::<f64>::from_constants(d, p, 1.0);
    let gamma = p / (p - 1.0);
    let e = (p - 1.0) / (p - 2.0);
    let a = d as f64 / gamma;
    let sigma: f64 = unit_sphere_area(d);
    let log_c = (gamma.ln() + a * params.q.ln() - sigma.ln() - ln_beta(a, e + 1.0)) / (e + a);
    log_c.exp()
}

/// Radial law of `w(s)` in closed form: `I_u(d/γ, e+1)`, `u = q s^{−m} r^γ / C1`.
pub fn beta_radial_cdf(params: &BarenblattParams<f64>, s: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let gamma = params.radial_power();
    let u = params.q * s.powf(-params.time_power()) * r.powf(gamma) / params.c1;
    if u >= 1.0 {
        return 1.0;
    }
    beta_reg(params.d as f64 / gamma, params.profile_power() + 1.0, u)
}

fn radial_mass(params: &BarenblattParams<f64>, s: f64) -> Result<f64> {
    let slice = params.at(s)?;
    let dm1 = params.d as i32 - 1;
    let settings = QuadSettings { abs_tol: 0.0, rel_tol: 1e-13, ..QuadSettings::default() };
    let est = integrate_with(|r: f64| slice.density(r) * r.powi(dm1), 0.0, slice.radius, &settings)?;
    Ok(unit_sphere_area::<f64>(params.d) * est.value)
}

fn case_label(d: usize, p: f64) -> String {
    format!("d{d}_p{p}")
}

/// Unit mass at several times by direct quadrature, and `C1` against its
/// Beta-function form.
pub fn normalization_report(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let mut cases = NORMALIZATION_CASES.to_vec();
    if !cases.contains(&(cfg.d, cfg.p)) {
        cases.push((cfg.d, cfg.p));
    }
    let inputs = serde_json::json!({ "cases": cases, "times": NORMALIZATION_TIMES });
    let mut report = VerificationReport::new("normalization", cfg.report_params(0.0), None, &inputs);
    for (d, p) in cases {
        let params = BarenblattParams::<f64>::derive(d, p)?;
        let mut worst: f64 = 0.0;
        for t in NORMALIZATION_TIMES {
            worst = worst.max((radial_mass(&params, t)? - 1.0).abs());
        }
        let label = case_label(d, p);
        report.push(Stat::at_most(format!("mass_deviation_{label}"), worst, NORMALIZATION_TOL));
        let beta = beta_c1(d, p);
        report.push(Stat::at_most(format!("c1_beta_rel_{label}"), (params.c1 - beta).abs() / beta, NORMALIZATION_TOL));
        if (d, p) == (2, 4.0) {
            let closed = (4.0 / (3.0 * std::f64::consts::PI.powi(2))).cbrt();
            report.push(Stat::at_most(format!("c1_closed_form_rel_{label}"), (params.c1 - closed).abs() / closed, NORMALIZATION_TOL));
        }
    }
    Ok(report)
}

fn fd4(f: impl Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    Ok((f(x - 2.0 * h)? - 8.0 * f(x - h)? + 8.0 * f(x + h)? - f(x + 2.0 * h)?) / (12.0 * h))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Closed-form `∇w` and `b = ∇a` against fourth-order central differences
/// of `w` and `a` at `FD_PROBES` interior points.
pub fn coefficient_fd_report(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let params = cfg.params()?;
    let y = &cfg.y;
    let d = cfg.d;
    let times = [0.3, cfg.horizon];
    let mut rng = RngStream::new(derive_seed(cfg.seed, 0x6664), 0);
    let (mut worst_grad, mut worst_drift): (f64, f64) = (0.0, 0.0);
    for (i, &t) in times.iter().enumerate() {
        let radius = params.support_radius(t)?;
        let h = 1e-5 * radius;
        let count = FD_PROBES / times.len() + usize::from(i < FD_PROBES % times.len());
        for _ in 0..count {
            let r = radius * (0.05 + 0.9 * rng.uniform());
            let mut x = vec![0.0; d];
            crate::numerics::sphere::uniform_direction(&mut rng, &mut x);
            for (xi, yi) in x.iter_mut().zip(y) {
                *xi = yi + r * *xi;
            }
            let grad = params.gradient(y, t, &x)?;
            let drift = params.drift_b(y, 0.0, t, &x)?;
            let mut fd_grad = vec![0.0; d];
            let mut fd_drift = vec![0.0; d];
            for k in 0..d {
                let at = |v: f64| {
                    let mut z = x.clone();
                    z[k] = v;
                    z
                };
                fd_grad[k] = fd4(|v| params.density(y, t, &at(v)), x[k], h)?;
                fd_drift[k] = fd4(|v| params.diffusion_a(y, 0.0, t, &at(v)), x[k], h)?;
            }
            let diff = |a: &[f64], b: &[f64]| norm(&a.iter().zip(b).map(|(u, v)| u - v).collect::<Vec<_>>()) / norm(a);
            worst_grad = worst_grad.max(diff(&grad, &fd_grad));
            worst_drift = worst_drift.max(diff(&drift, &fd_drift));
        }
    }
    let inputs = serde_json::json!({ "probes": FD_PROBES, "times": times, "seed": cfg.seed });
    let mut report = VerificationReport::new("coefficients", cfg.report_params(0.0), Some(cfg.seed), &inputs);
    report.push(Stat::at_most("gradient_fd_rel", worst_grad, FD_TOL));
    report.push(Stat::at_most("drift_fd_rel", worst_drift, FD_TOL));
    Ok(report)
}

/// Exact sampler against the Beta-form radial law.
pub fn sampler_report(cfg: &SuiteConfig) -> Result<VerificationReport> {
    let params = cfg.params()?;
    let n = cfg.paths;
    let mut rng = RngStream::new(derive_seed(cfg.seed, 0x7361_6d70), 0);
    let xs = sample_barenblatt(&params, &cfg.y, cfg.horizon, n, &mut rng)?;
    let radii: Vec<f64> = xs.iter().map(|x| crate::barenblatt::distance(x, &cfg.y)).collect();
    let ks = ks_one_sample(&radii, |r| beta_radial_cdf(&params, cfg.horizon, r));
    let tol = SAMPLER_KS_TOL.max(critical_one_sample(n));
    let inputs = serde_json::json!({ "samples": n, "s": cfg.horizon });
    let mut report = VerificationReport::new("sampler", cfg.report_params(0.0), Some(cfg.seed), &inputs);
    report.push(Stat::at_most("sampler_ks", ks, tol));
    Ok(report)
}

fn marginal_ks(run: &PathEnsemble, index: usize) -> Result<f64> {
    let cfg = &run.config;
    let s = cfg.physical_time(run.snapshots[index].time);
    let radii = run.radii(index);
    Ok(ks_one_sample(&radii, |r| beta_radial_cdf(&cfg.params, s, r)))
}

/// Shared expensive results.
struct Context<'a> {
    cfg: &'a SuiteConfig,
    reference: Option<PathEnsemble>,
    nonlinear: Option<NonlinearStudy>,
}

struct NonlinearStudy {
    report: VerificationReport,
    finest: Trajectory<f64>,
    exact: Vec<f64>,
    radius: f64,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a SuiteConfig) -> Self {
        Self { cfg, reference: None, nonlinear: None }
    }

    fn reference(&mut self) -> Result<&PathEnsemble> {
        if self.reference.is_none() {
            self.reference = Some(simulate(&self.cfg.sim_config()?)?);
        }
        Ok(self.reference.as_ref().expect("set above"))
    }

    fn nonlinear(&mut self) -> Result<&NonlinearStudy> {
        if self.nonlinear.is_none() {
            self.nonlinear = Some(nonlinear_study(self.cfg)?);
        }
        Ok(self.nonlinear.as_ref().expect("set above"))
    }
}

fn sde_marginal(ctx: &mut Context) -> Result<(Vec<VerificationReport>, Trace)> {
    let cfg = ctx.cfg;
    let run = ctx.reference()?;
    let last = run.snapshots.len() - 1;
    let sim = &run.config;
    let ks = marginal_ks(run, last)?;
    let leak = run.leakage_fraction(last, LEAKAGE_FACTOR)?;
    let inputs = serde_json::json!({ "config": sim });
    let params = cfg.report_params(0.0);
    let mut marg = VerificationReport::new("sde_marginal", params.clone(), Some(cfg.seed), &inputs);
    marg.push(Stat::at_most("ks_T", ks, MARGINAL_KS_TOL));
    marg.push(Stat::below("leakage", leak, LEAKAGE_TOL));
    if cfg.d >= 2 {
        let (chi2, critical) = run.angular_chi_square(last, 16)?;
        marg.push(Stat::at_most("angular_chi2", chi2, critical));
    }
    marg.note(format!("one-sample 99% critical value {:.5}", critical_one_sample(run.len())));

    let s = sim.physical_time(sim.horizon);
    let radius = sim.params.support_radius(s)?;
    let emp = run.empirical_radial_cdf(last, &cfg.y);
    let mut trace = Trace::new("marginal_cdf", &["r", "empirical", "analytic"]);
    for i in 0..=TRACE_POINTS {
        let r = 1.1 * radius * i as f64 / TRACE_POINTS as f64;
        trace.rows.push(vec![r, emp.eval(r), beta_radial_cdf(&sim.params, s, r)]);
    }

    // step halving on common noise: h (4 substeps), h/2 (2), h/4 (1)
    let mut ks_levels = vec![ks];
    for (div, sub) in [(2.0, 2), (4.0, 1)] {
        let mut c = sim.clone();
        c.step = sim.step / div;
        c.crn_substeps = sub;
        c.snapshot_times.clear();
        let r = simulate(&c)?;
        ks_levels.push(marginal_ks(&r, r.snapshots.len() - 1)?);
    }
    let noise = critical_one_sample(run.len());
    let inputs = serde_json::json!({ "config": sim, "levels": [1, 2, 4] });
    let mut conv = VerificationReport::new("sde_convergence", params.clone(), Some(cfg.seed), &inputs);
    for (i, k) in ks_levels.iter().enumerate() {
        conv.note(format!("KS at h/{}: {k:.6}", 1 << i));
    }
    conv.push(Stat::at_most("ks_increase_h2", ks_levels[1] - ks_levels[0], noise));
    conv.push(Stat::at_most("ks_increase_h4", ks_levels[2] - ks_levels[1], noise));

    let mut lit = sim.clone();
    lit.convention = DiffusionConvention::Literal;
    lit.snapshot_times.clear();
    let lrun = simulate(&lit)?;
    let lks = marginal_ks(&lrun, lrun.snapshots.len() - 1)?;
    let mut conv_rep = VerificationReport::new("convention", params, Some(cfg.seed), &serde_json::json!({ "config": lit }));
    conv_rep.push(Stat::at_least("literal_ks", lks, LITERAL_KS_MIN));
    conv_rep.note(format!("standard convention KS {ks:.6}; literal convention KS {lks:.6}"));
    Ok((vec![marg, conv, conv_rep], trace))
}

/// Nonlinear radial solve from `w(δ)` to `w(T)` at `cells/4`, `cells/2`,
/// `cells`.
fn nonlinear_study(cfg: &SuiteConfig) -> Result<NonlinearStudy> {
    let params = cfg.params()?;
    let delta = cfg.nonlinear_delta();
    let elapsed = cfg.horizon - delta;
    let radius = params.support_radius(cfg.horizon)?;
    let levels = [cfg.cells / 4, cfg.cells / 2, cfg.cells];
    let inputs = serde_json::json!({ "levels": levels, "elapsed": elapsed, "domain_factor": DOMAIN_FACTOR });
    let mut report = VerificationReport::new("pde_nonlinear", cfg.report_params(delta), None, &inputs);
    let mut errors = Vec::new();
    let mut finest = None;
    for &m in &levels {
        let grid = RadialGrid::new(cfg.d, m, DOMAIN_FACTOR * radius)?;
        let initial = RadialState { time: 0.0, values: grid.tabulate_barenblatt(&params, delta)? };
        let traj = solve_plaplace(&grid, &initial, cfg.p, &[elapsed], &SolverSettings::default())?;
        let exact = grid.tabulate_barenblatt(&params, cfg.horizon)?;
        let err = grid.l1_distance(&traj.last().values, &exact);
        report.push(Stat::at_most(format!("l1_M{m}"), err, PDE_L1_TOL));
        report.push(Stat::at_most(format!("mass_drift_M{m}"), traj.max_mass_drift, PDE_MASS_TOL));
        if !traj.clip_log.is_empty() {
            report.note(format!("M = {m}: {} roundoff clips below zero", traj.clip_log.len()));
        }
        errors.push(err);
        finest = Some((traj, exact));
    }
    for (w, m) in errors.windows(2).zip(&levels[1..]) {
        report.push(Stat::below(format!("l1_ratio_M{m}"), w[1] / w[0], 1.0));
    }
    let (finest, exact) = finest.expect("three levels");
    Ok(NonlinearStudy { report, finest, exact, radius })
}

/// The nonlinear refinement study on its own.
pub fn nonlinear_pde_report(cfg: &SuiteConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    Ok(nonlinear_study(cfg)?.report)
}

/// The particle-marginal checks on their own: `sde_marginal`,
/// `sde_convergence` and `convention`.
pub fn sde_marginal_reports(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    cfg.validate()?;
    Ok(sde_marginal(&mut Context::new(cfg))?.0)
}

fn pde_trace(name: &str, traj: &Trajectory<f64>, exact: &[f64]) -> Trace {
    let mut t = Trace::new(name, &["r", "u", "w"]);
    for ((r, u), w) in traj.grid.centers.iter().zip(&traj.last().values).zip(exact) {
        t.rows.push(vec![*r, *u, *w]);
    }
    t
}

fn run_marginals(ctx: &mut Context, out: &mut SuiteOutcome) -> Result<()> {
    out.reports.push(normalization_report(ctx.cfg)?);
    out.reports.push(coefficient_fd_report(ctx.cfg)?);
    out.reports.push(sampler_report(ctx.cfg)?);
    let (reports, trace) = sde_marginal(ctx)?;
    out.reports.extend(reports);
    out.traces.push(trace);
    let study = ctx.nonlinear()?;
    out.reports.push(study.report.clone());
    out.traces.push(pde_trace("pde_nonlinear", &study.finest, &study.exact));
    Ok(())
}

fn run_support(ctx: &mut Context, out: &mut SuiteOutcome) -> Result<()> {
    let cfg = ctx.cfg;
    let params = cfg.params()?;
    let (mut outside, mut inside_ok): (f64, bool) = (0.0, true);
    for s in [cfg.t0, 0.5 * cfg.horizon, cfg.horizon, 2.0 * cfg.horizon] {
        let slice = params.at(s)?;
        for j in 0..=20 {
            let r = slice.radius * (1.0 + j as f64 / 10.0);
            let (a, b) = slice.coefficients(r);
            if r > slice.radius {
                outside = outside.max(slice.density(r).abs()).max(a.abs()).max(b.abs());
            }
            outside = outside.max(slice.density(r).abs()).max(slice.diffusion(r).abs());
            outside = outside.max(slice.gradient_factor(r).abs());
        }
        inside_ok &= slice.density(slice.radius * (1.0 - 1e-6)) > 0.0;
    }
    let inputs = serde_json::json!({ "factor": LEAKAGE_FACTOR });
    let mut report = VerificationReport::new("support", cfg.report_params(0.0), Some(cfg.seed), &inputs);
    report.push(Stat::at_most("outside_support_max", outside, 0.0));
    report.push(Stat::flag("positive_inside", inside_ok));

    let run = ctx.reference()?;
    let last = run.snapshots.len() - 1;
    report.push(Stat::below("leakage", run.leakage_fraction(last, LEAKAGE_FACTOR)?, LEAKAGE_TOL));
    let max_r = run.radii(last).into_iter().fold(0.0, f64::max);
    report.note(format!(
        "largest particle radius {max_r:.6} vs R(T) = {:.6}",
        run.config.support_radius(run.config.horizon)?
    ));

    let study = ctx.nonlinear()?;
    let grid = &study.finest.grid;
    let edge = grid.support_edge(&study.finest.last().values, 1e-10).unwrap_or(0.0);
    report.push(Stat::at_most("pde_support_edge_error", (edge - study.radius).abs(), 2.0 * grid.dr));
    out.reports.push(report);
    Ok(())
}

fn run_weakform(cfg: &SuiteConfig, out: &mut SuiteOutcome) -> Result<()> {
    let params = cfg.params()?;
    let (t1, t2) = (0.5 * cfg.horizon, cfg.horizon);
    let family = TestFunctionFamily::reference(&cfg.y, params.support_radius(t2)?);
    let inputs = serde_json::json!({ "t1": t1, "t2": t2, "family": &family });
    let mut report = VerificationReport::new("weakform", cfg.report_params(0.0), None, &inputs);
    let mut trace = Trace::new("weakform", &["member", "lhs", "rhs_fokker_planck", "rhs_p_laplace", "fault_residual"]);
    let (mut worst_fp, mut worst_pl, mut worst_gap, mut weakest_fault) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for (i, psi) in family.members.iter().enumerate() {
        let fp = weakform_residual_nonlinear(&params, &cfg.y, psi, t1, t2, 1.0)?;
        let pl = weakform_residual_p_laplace(&params, &cfg.y, psi, t1, t2)?;
        let fault = weakform_residual_nonlinear(&params, &cfg.y, psi, t1, t2, -1.0)?;
        worst_fp = worst_fp.max(fp.residual);
        worst_pl = worst_pl.max(pl.residual);
        worst_gap = worst_gap.max((fp.rhs - pl.rhs).abs());
        weakest_fault = weakest_fault.min(fault.residual);
        trace.rows.push(vec![i as f64, fp.lhs, fp.rhs, pl.rhs, fault.residual]);
    }
    report.push(Stat::at_most("residual_fokker_planck", worst_fp, WEAKFORM_TOL));
    report.push(Stat::at_most("residual_p_laplace", worst_pl, WEAKFORM_TOL));
    report.push(Stat::at_most("forms_gap", worst_gap, FORMS_AGREE_TOL));
    // flipping the drift sign must be detected by the same test functions
    report.push(Stat::at_least("fault_residual_min", weakest_fault, WEAKFORM_TOL));

    // translation symmetry of the residual
    let origin = vec![0.0; cfg.d];
    let mut shift = vec![0.0; cfg.d];
    shift[0] = 0.7;
    if cfg.d > 1 {
        shift[1] = -0.3;
    }
    let c = vec![0.1; cfg.d];
    let rho = 0.8 * params.support_radius(t2)?;
    let at_origin = weakform_residual_nonlinear(&params, &origin, &TestFunction::new(c.clone(), rho)?, t1, t2, 1.0)?;
    let shifted_c: Vec<f64> = c.iter().zip(&shift).map(|(a, b)| a + b).collect();
    let shifted = weakform_residual_nonlinear(&params, &shift, &TestFunction::new(shifted_c, rho)?, t1, t2, 1.0)?;
    report.push(Stat::at_most("translation_symmetry", (at_origin.lhs - shifted.lhs).abs().max((at_origin.rhs - shifted.rhs).abs()), 1e-12));

    // initial trace: ∫ψ w(t) → ψ(y) as t → 0
    let psi = &family.members[1];
    let errs = initial_trace_errors(&params, &cfg.y, psi, &[1e-2, 1e-3, 1e-4])?;
    let listed: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
    report.note(format!("initial trace errors at t = 1e-2, 1e-3, 1e-4: {}", listed.join(", ")));
    report.push(Stat::flag("initial_trace_decreasing", errs.windows(2).all(|w| w[1] < w[0])));
    out.reports.push(report);
    out.traces.push(trace);
    Ok(())
}

/// The exponent grid `d ∈ {1..5}` × `p = 2 + 4j/20`, `j = 1..20`.
pub fn exponent_grid() -> Vec<(usize, f64)> {
    (1..=5).flat_map(|d| (1..=20).map(move |j| (d, 2.0 + 4.0 * j as f64 / 20.0))).collect()
}

fn run_exponents(cfg: &SuiteConfig, out: &mut SuiteOutcome) -> Result<()> {
    let grid = exponent_grid();
    let mut violations = 0usize;
    let mut margin = f64::INFINITY;
    for &(d, p) in &grid {
        for row in check_exponents(d, p) {
            violations += usize::from(!row.holds);
            margin = margin.min(row.lhs + 1.0);
        }
    }
    let inputs = serde_json::json!({ "grid": "d in 1..=5, p = 2 + 4j/20, j = 1..=20" });
    let mut report = VerificationReport::new("exponents", cfg.report_params(0.0), None, &inputs);
    report.push(Stat::at_most("grid_violations", violations as f64, 0.0));
    report.push(Stat::at_least("grid_points", grid.len() as f64, 100.0));
    let own = check_exponents(cfg.d, cfg.p);
    report.push(Stat::at_most("config_violations", own.iter().filter(|r| !r.holds).count() as f64, 0.0));
    for row in own {
        report.note(format!("{}: {} (lhs = {:.6})", row.name, row.inequality, row.lhs));
    }
    report.note(format!("smallest margin over the grid: lhs + 1 = {margin:.6}"));
    out.reports.push(report);
    Ok(())
}

fn run_integrability(cfg: &SuiteConfig, out: &mut SuiteOutcome) -> Result<()> {
    let params = cfg.params()?;
    let (mut report, g1) = integrability_check(&params, &cfg.y, 0.0, cfg.horizon, None)?;
    let (_, g2) = integrability_check(&params, &cfg.y, 0.0, 2.0 * cfg.horizon, None)?;
    let (_, gf) = integrability_check(&params, &cfg.y, 0.0, cfg.horizon, Some(ExponentFault { exponent: -1.1 }))?;
    report.push(Stat::flag("monotone_in_horizon", g2.value >= g1.value));
    report.push(Stat::flag("fault_reported_infinite", gf.verdict == Verdict::Infinite));
    out.reports.push(report);
    Ok(())
}

fn run_flow(ctx: &mut Context, out: &mut SuiteOutcome) -> Result<()> {
    let cfg = ctx.cfg;
    let params = cfg.params()?;
    let delta = cfg.delta.unwrap_or(0.0);
    let triples = [(0.0, cfg.restart_time, cfg.horizon), (0.1, 0.3, 0.9), (0.2, 0.2, 0.7), (0.05, 0.6, 0.6)];
    let inputs = serde_json::json!({ "triples": triples });
    let mut analytic = VerificationReport::new("flow_analytic", cfg.report_params(delta), None, &inputs);
    let (mut worst, mut weakest_bug) = (0.0f64, f64::INFINITY);
    for (s, r, t) in triples {
        let ok = flow_property_analytic(&params, &cfg.y, delta, s, r, t, false)?;
        let bug = flow_property_analytic(&params, &cfg.y, delta, s, r, t, true)?;
        worst = worst.max(ok.stats[0].value);
        weakest_bug = weakest_bug.min(bug.stats[0].value);
    }
    analytic.push(Stat::at_most("analytic_density_mismatch", worst, super::flow::PROBE_TOL));
    analytic.push(Stat::at_least("delta_bug_mismatch", weakest_bug, 1e-3));
    out.reports.push(analytic);

    let run = ctx.reference()?;
    let (ens, _) = flow_from_ensemble(run, cfg.restart_time)?;
    out.reports.push(ens);

    let mut tcfg = cfg.sim_config()?;
    tcfg.snapshot_times.clear();
    tcfg.crn_substeps = 1;
    if tcfg.center.iter().all(|c| *c == 0.0) {
        tcfg.center[0] = 0.5;
    }
    let mut tr = translation_noninvariance_check(&tcfg, cfg.restart_time, None)?;
    let bad = translation_noninvariance_check(&tcfg, cfg.restart_time, Some(TranslationFault::WrongCenter))?;
    let bad_ks = bad.stat("radial_joint_ks2d").map_or(f64::NAN, |s| s.value);
    tr.push(Stat::at_least("wrong_center_ks2d", bad_ks, super::flow::JOINT_KS_TOL));
    out.reports.push(tr);
    Ok(())
}

fn run_markov(cfg: &SuiteConfig, out: &mut SuiteOutcome) -> Result<()> {
    let sim = cfg.markov_config()?;
    let run = simulate(&sim)?;
    let ri = run.snapshot_index(cfg.markov_r).ok_or_else(|| Error::InvalidConfig("missing markov snapshot".into()))?;
    let ti = run.snapshots.len() - 1;
    let fresh = continue_bins(&run, ri, ti, cfg.markov_bins, StreamsSetting::Fresh)?;
    let (report, outcomes) = fresh.evaluate(None);
    let mut trace = Trace::new("markov_bins", &["bin", "lo", "hi", "count", "ks", "critical"]);
    for (b, o) in outcomes.iter().enumerate() {
        trace.rows.push(vec![b as f64, o.lo, o.hi, o.count as f64, o.ks.unwrap_or(f64::NAN), o.critical]);
    }
    out.reports.push(report);

    let inputs = serde_json::json!({ "config": sim, "bins": cfg.markov_bins, "shift": 0.5 });
    let mut sanity = VerificationReport::new("markov_sanity", cfg.report_params(0.0), Some(sim.seed), &inputs);
    let identical = continue_bins(&run, ri, ti, cfg.markov_bins, StreamsSetting::Identical)?;
    let (_, same) = identical.evaluate(None);
    let max_same = same.iter().filter_map(|o| o.ks).fold(0.0, f64::max);
    sanity.push(Stat::at_most("identical_streams_ks", max_same, 0.0));
    match outcomes.iter().position(|o| o.ks.is_some()) {
        Some(bin) => {
            let (_, shifted) = fresh.evaluate(Some(BinShift { bin, shift: 0.5 }));
            let o = &shifted[bin];
            sanity.push(Stat::at_least("shifted_bin_ks_over_critical", o.ks.unwrap_or(0.0) / o.critical, 1.0));
        }
        None => {
            sanity.push(Stat::flag("shifted_bin_ks_over_critical", false));
        }
    }
    out.reports.push(sanity);
    out.traces.push(trace);
    Ok(())
}

fn run_linearized(cfg: &SuiteConfig, out: &mut SuiteOutcome) -> Result<()> {
    let params = cfg.params()?;
    let delta = cfg.linearized_delta();
    let elapsed = cfg.horizon - delta;
    let radius = params.support_radius(cfg.horizon)?;
    let grid = RadialGrid::new(cfg.d, cfg.cells, DOMAIN_FACTOR * radius)?;
    let snaps = 8;
    let times: Vec<f64> = (1..=snaps).map(|i| elapsed * i as f64 / snaps as f64).collect();
    let initial = RadialState { time: 0.0, values: grid.tabulate_barenblatt(&params, delta)? };
    let traj = solve_linearized_fpe(&grid, &initial, &params, delta, &times, &SolverSettings::default())?;
    let exact: Vec<RadialState<f64>> = traj
        .states
        .iter()
        .map(|s| Ok(RadialState { time: s.time, values: grid.tabulate_barenblatt(&params, delta + s.time)? }))
        .collect::<Result<_>>()?;
    let worst = traj
        .states
        .iter()
        .zip(&exact)
        .map(|(u, w)| grid.l1_distance(&u.values, &w.values))
        .fold(0.0, f64::max);
    let inputs = serde_json::json!({ "cells": cfg.cells, "elapsed": elapsed, "snapshots": snaps });
    let mut report = VerificationReport::new("pde_linearized", cfg.report_params(delta), None, &inputs);
    report.push(Stat::at_most("l1_max", worst, PDE_L1_TOL));
    report.push(Stat::at_most("mass_drift", traj.max_mass_drift, PDE_MASS_TOL));
    report.note(format!("{} roundoff clips below zero", traj.clip_log.len()));

    // the frozen coefficient vanishes identically beyond the support
    let mut outside: f64 = 0.0;
    for &t in &times {
        let r_t = params.support_radius(delta + t)?;
        let rho = frozen_face_coefficient(&params, delta, &grid, t);
        for (r, v) in grid.faces.iter().zip(&rho) {
            if *r >= r_t {
                outside = outside.max(v.abs());
            }
        }
    }
    report.push(Stat::at_most("coefficient_outside_support", outside, 0.0));
    // the exact solution moves: the check is not satisfied by a stationary state
    let moved = grid.l1_distance(&exact[0].values, &exact[exact.len() - 1].values);
    report.push(Stat::at_least("solution_motion_l1", moved, 1e-2));
    out.reports.push(report);

    let (mut class, c) = class_membership_check(&grid, &exact, &exact, cfg.report_params(delta), 1.0 + CLASS_CONSTANT_TOL, 0.0)?;
    class.push(Stat::at_least("minimal_constant_lower", c, 1.0 - CLASS_CONSTANT_TOL));
    let numeric = crate::pde::minimal_class_constant(&traj.states, &exact, 1e-8)?;
    class.note(format!("numerical solution: minimal constant {numeric:.6} at cell tolerance 1e-8"));
    out.reports.push(class);
    let mut exact_last = exact.last().expect("snapshots").values.clone();
    exact_last.truncate(grid.cells());
    out.traces.push(pde_trace("pde_linearized", &traj, &exact_last));
    Ok(())
}

/// Runs one suite (or all of them).
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let mut out = SuiteOutcome { suite, config: cfg.clone(), reports: Vec::new(), traces: Vec::new() };
    let mut ctx = Context::new(cfg);
    let list: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    for s in list {
        match s {
            Suite::Marginals => run_marginals(&mut ctx, &mut out)?,
            Suite::Support => run_support(&mut ctx, &mut out)?,
            Suite::Weakform => run_weakform(cfg, &mut out)?,
            Suite::Exponents => run_exponents(cfg, &mut out)?,
            Suite::Integrability => run_integrability(cfg, &mut out)?,
            Suite::Flow => run_flow(&mut ctx, &mut out)?,
            Suite::Markov => run_markov(cfg, &mut out)?,
            Suite::Linearized => run_linearized(cfg, &mut out)?,
            Suite::All => unreachable!("expanded above"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_form_of_c1() {
        for (d, p) in [(2, 4.0), (3, 4.0), (2, 3.5), (1, 5.0), (4, 2.5)] {
            let c = BarenblattParams::<f64>::derive(d, p).unwrap().c1;
            assert!((beta_c1(d, p) - c).abs() < 1e-10 * c, "{d} {p}");
        }
        let closed = (4.0 / (3.0 * std::f64::consts::PI.powi(2))).cbrt();
        assert!((beta_c1(2, 4.0) - closed).abs() < 1e-13);
    }

    #[test]
    fn beta_cdf_is_a_distribution() {
        let params = BarenblattParams::derive(3, 3.0).unwrap();
        let r = params.support_radius(0.7).unwrap();
        assert_eq!(beta_radial_cdf(&params, 0.7, 0.0), 0.0);
        assert_eq!(beta_radial_cdf(&params, 0.7, r * 1.01), 1.0);
        // derivative matches the radial density σ r^{d−1} w
        let slice = params.at(0.7).unwrap();
        let x = 0.4 * r;
        let h = 1e-6;
        let fd = (beta_radial_cdf(&params, 0.7, x + h) - beta_radial_cdf(&params, 0.7, x - h)) / (2.0 * h);
        let exact = unit_sphere_area::<f64>(3) * x * x * slice.density(x);
        assert!((fd - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH.into_iter().chain([Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn exponent_grid_has_hundred_points() {
        let g = exponent_grid();
        assert_eq!(g.len(), 100);
        assert!(g.iter().all(|&(d, p)| d <= 5 && p > 2.0 && p <= 6.0));
    }

    fn quick() -> SuiteConfig {
        SuiteConfig { paths: 4000, markov_paths: 6000, cells: 200, step: 4e-3, t0: 0.052, horizon: 0.852,
            restart_time: 0.452, markov_r: 0.252, markov_t: 0.652, ..SuiteConfig::default() }
    }

    #[test]
    fn cheap_suites_pass() {
        let cfg = quick();
        for s in [Suite::Exponents, Suite::Integrability, Suite::Weakform] {
            let out = run_suite(s, &cfg).unwrap();
            assert!(out.pass(), "{s}: {:#?}", out.reports);
        }
        let out = run_suite(Suite::Linearized, &SuiteConfig { cells: 400, ..SuiteConfig::default() }).unwrap();
        assert!(out.pass(), "{:#?}", out.reports);
    }

    #[test]
    fn normalization_and_coefficients() {
        let cfg = SuiteConfig::default();
        let n = normalization_report(&cfg).unwrap();
        assert!(n.pass, "{n:#?}");
        let c = coefficient_fd_report(&cfg).unwrap();
        assert!(c.pass, "{c:#?}");
    }

    #[test]
    fn tolerance_override_turns_support_into_failure() {
        let cfg = SuiteConfig { cells: 200, ..quick() };
        let mut out = run_suite(Suite::Support, &cfg).unwrap();
        assert!(out.pass(), "{:#?}", out.reports);
        assert!(out.override_tol("leakage", 0.0));
        assert!(!out.pass());
        assert!(out.to_json().unwrap().contains("\"suite\": \"support\""));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SuiteConfig { y: vec![0.0], ..SuiteConfig::default() };
        assert!(run_suite(Suite::Exponents, &cfg).is_err());
        let cfg = SuiteConfig { markov_t: 2.0, ..SuiteConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
