use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pbrownian::io::{fmt17, to_json_string, write_csv_row};
use pbrownian::pde::{solve_linearized_fpe, solve_plaplace, RadialGrid, RadialState, SolverSettings, Trajectory};
use pbrownian::sde::{simulate, with_threads, PathEnsemble};
use pbrownian::verify::{run_suite, Suite, SuiteConfig};
use pbrownian::{check_exponents, BarenblattParams, DiffusionConvention, Error, SimConfig};
use serde::{Deserialize, Serialize};

use crate::args::{Convention, ModelArgs, OutputArgs, PdeArgs, PdeKind, Recorded, SimulateArgs, SuiteArg, VerifyArgs};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const OUT_ENV: &str = "PBROWNIAN_OUT";
const DEFAULT_OUT_ROOT: &str = "pbrownian-out";

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite { .. } | Error::SolverAbort(_) | Error::Quadrature { .. } | Error::RootNotConverged(_) => {
                EXIT_NUMERICAL
            }
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(format!("json error: {e}"))
    }
}

type CliResult<T> = Result<T, Failure>;

/// Everything needed to re-run a command byte-identically. The output
/// directory and the thread count are deliberately absent.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub code_version: String,
    pub command: String,
    pub args: serde_json::Value,
    pub outputs: Vec<String>,
    pub exit_code: i32,
    #[serde(default)]
    pub diagnostics: Option<String>,
}

impl Manifest {
    fn new(recorded: &Recorded) -> CliResult<Self> {
        let tagged = serde_json::to_value(recorded)?;
        Ok(Self {
            tool: "pbrownian".into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            command: tagged["command"].as_str().unwrap_or_default().to_owned(),
            args: tagged["args"].clone(),
            outputs: Vec::new(),
            exit_code: EXIT_PASS,
            diagnostics: None,
        })
    }

    pub fn recorded(&self) -> CliResult<Recorded> {
        let bad = |e: serde_json::Error| Failure::usage(format!("manifest args do not match command {:?}: {e}", self.command));
        Ok(match self.command.as_str() {
            "simulate" => Recorded::Simulate(serde_json::from_value(self.args.clone()).map_err(bad)?),
            "verify" => Recorded::Verify(serde_json::from_value(self.args.clone()).map_err(bad)?),
            "pde" => Recorded::Pde(serde_json::from_value(self.args.clone()).map_err(bad)?),
            other => return Err(Failure::usage(format!("manifest records unknown command {other:?}"))),
        })
    }
}

/// Output directory with the no-overwrite rule.
struct OutDir {
    path: PathBuf,
    manifest: Manifest,
}

impl OutDir {
    fn prepare(recorded: &Recorded, output: &OutputArgs) -> CliResult<Self> {
        let path = match &output.out {
            Some(p) => p.clone(),
            None => {
                let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
                root.join(recorded.name())
            }
        };
        if path.exists() {
            if !path.is_dir() {
                return Err(Failure::usage(format!("{} exists and is not a directory", path.display())));
            }
            let occupied = fs::read_dir(&path)?.next().is_some();
            if occupied && !output.force {
                return Err(Failure::usage(format!(
                    "{} is not empty; refusing to overwrite (pass --force)",
                    path.display()
                )));
            }
        }
        fs::create_dir_all(&path)?;
        Ok(Self { path, manifest: Manifest::new(recorded)? })
    }

    fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        self.manifest.outputs.push(name.to_owned());
        Ok(BufWriter::new(File::create(self.path.join(name))?))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut w = self.create(name)?;
        w.write_all(to_json_string(value)?.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Writes manifest.json and returns the exit code.
    fn finish(mut self, exit_code: i32, diagnostics: Option<String>) -> CliResult<i32> {
        self.manifest.exit_code = exit_code;
        self.manifest.diagnostics = diagnostics;
        self.manifest.outputs.sort();
        let text = to_json_string(&self.manifest)?;
        fs::write(self.path.join("manifest.json"), text)?;
        Ok(exit_code)
    }

    /// Records a numerical abort in the manifest.
    fn abort(self, failure: Failure) -> CliResult<i32> {
        if failure.code == EXIT_NUMERICAL {
            eprintln!("error: {}", failure.message);
            let msg = failure.message.clone();
            self.finish(EXIT_NUMERICAL, Some(msg))
        } else {
            Err(failure)
        }
    }
}

pub fn params(model: &ModelArgs) -> CliResult<i32> {
    let params = BarenblattParams::<f64>::derive(model.d, model.p)?;
    #[derive(Serialize)]
    struct Out<'a> {
        params: &'a BarenblattParams<f64>,
        exponents: Vec<pbrownian::ExponentCheck>,
    }
    let out = Out { params: &params, exponents: check_exponents(model.d, model.p) };
    print!("{}", to_json_string(&out)?);
    Ok(EXIT_PASS)
}

/// Runs a replayable command into its output directory.
pub fn execute(recorded: &Recorded, output: &OutputArgs, threads: Option<usize>) -> CliResult<i32> {
    match recorded {
        Recorded::Simulate(a) => run_simulate(recorded, a, output, threads),
        Recorded::Verify(a) => run_verify(recorded, a, output, threads),
        Recorded::Pde(a) => run_pde(recorded, a, output, threads),
    }
}

pub fn replay(manifest: &Path, output: &OutputArgs, threads: Option<usize>) -> CliResult<i32> {
    let text = fs::read_to_string(manifest)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", manifest.display())))?;
    let m: Manifest = serde_json::from_str(&text)?;
    let recorded = m.recorded()?;
    execute(&recorded, output, threads)
}

fn center(y: &[f64], d: usize) -> CliResult<Vec<f64>> {
    if y.is_empty() {
        return Ok(vec![0.0; d]);
    }
    if y.len() != d {
        return Err(Failure::usage(format!("--y has {} components but d = {d}", y.len())));
    }
    Ok(y.to_vec())
}

fn sim_config(a: &SimulateArgs) -> CliResult<SimConfig> {
    let params = BarenblattParams::derive(a.model.d, a.model.p)?;
    let mut c = SimConfig::new(params, center(&a.y, a.model.d)?);
    c.delta0 = a.delta0;
    c.t0 = a.t0;
    c.horizon = a.horizon;
    c.step = a.h;
    c.paths = a.paths;
    c.seed = a.seed;
    c.snapshot_times = a.snapshots.clone();
    c.convention = match a.convention {
        Convention::Standard => DiffusionConvention::Standard,
        Convention::Literal => DiffusionConvention::Literal,
    };
    c.drift_cap = a.drift_cap;
    c.crn_substeps = a.crn_substeps;
    c.record_paths = a.record_paths;
    c.validate()?;
    Ok(c)
}

fn write_paths<W: Write>(run: &PathEnsemble, mut w: W) -> std::io::Result<()> {
    let Some(paths) = &run.paths else { return Ok(()) };
    let d = run.dim();
    let mut header = vec!["t".to_string(), "path_id".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    write_csv_row(&mut w, &header)?;
    for (path, id) in paths.iter().zip(&run.path_ids) {
        for (i, x) in path.chunks(d).enumerate() {
            let t = run.config.time_of(run.start_step + i as u64);
            let mut row = vec![fmt17(t), id.to_string()];
            row.extend(x.iter().map(|v| fmt17(*v)));
            write_csv_row(&mut w, &row)?;
        }
    }
    Ok(())
}

fn run_simulate(recorded: &Recorded, a: &SimulateArgs, output: &OutputArgs, threads: Option<usize>) -> CliResult<i32> {
    let config = sim_config(a)?;
    let mut out = OutDir::prepare(recorded, output)?;
    let run = match with_threads(threads, || simulate(&config))? {
        Ok(r) => r,
        Err(e) => return out.abort(e.into()),
    };
    let mut w = out.create("ensemble.csv")?;
    run.write_csv(&mut w)?;
    w.flush()?;
    out.write_json("ensemble.json", &run.metadata())?;
    if run.paths.is_some() {
        let mut w = out.create("paths.csv")?;
        write_paths(&run, &mut w)?;
        w.flush()?;
    }
    let last = run.snapshots.len() - 1;
    let leak = run.leakage_fraction(last, 1.05)?;
    println!(
        "simulated {} paths to t = {} ({} snapshots); leakage beyond 1.05 R: {:.4}%; wrote {}",
        run.len(),
        config.horizon,
        run.snapshots.len(),
        100.0 * leak,
        out.path.display()
    );
    out.finish(EXIT_PASS, None)
}

fn suite_of(s: SuiteArg) -> Suite {
    match s {
        SuiteArg::Marginals => Suite::Marginals,
        SuiteArg::Support => Suite::Support,
        SuiteArg::Weakform => Suite::Weakform,
        SuiteArg::Exponents => Suite::Exponents,
        SuiteArg::Integrability => Suite::Integrability,
        SuiteArg::Flow => Suite::Flow,
        SuiteArg::Markov => Suite::Markov,
        SuiteArg::Linearized => Suite::Linearized,
        SuiteArg::All => Suite::All,
    }
}

fn suite_config(a: &VerifyArgs) -> CliResult<SuiteConfig> {
    let mut c = SuiteConfig::reference(a.model.d, a.model.p);
    c.y = center(&a.y, a.model.d)?;
    c.delta = a.delta;
    if let Some(v) = a.t0 {
        c.t0 = v;
    }
    if let Some(v) = a.horizon {
        c.horizon = v;
    }
    if let Some(v) = a.h {
        c.step = v;
    }
    if let Some(v) = a.paths {
        c.paths = v;
    }
    if let Some(v) = a.markov_paths {
        c.markov_paths = v;
    }
    if let Some(v) = a.cells {
        c.cells = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    c.validate()?;
    Ok(c)
}

fn parse_tolerances(items: &[String]) -> CliResult<Vec<(String, f64)>> {
    items
        .iter()
        .map(|s| {
            let (name, value) = s.split_once('=').ok_or_else(|| Failure::usage(format!("--tol expects NAME=VALUE (got {s:?})")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("--tol {name}: {value:?} is not a number")))?;
            Ok((name.trim().to_owned(), v))
        })
        .collect()
}

fn run_verify(recorded: &Recorded, a: &VerifyArgs, output: &OutputArgs, threads: Option<usize>) -> CliResult<i32> {
    let config = suite_config(a)?;
    let tolerances = parse_tolerances(&a.tol)?;
    let suite = suite_of(a.suite);
    let mut out = OutDir::prepare(recorded, output)?;
    let mut outcome = match with_threads(threads, || run_suite(suite, &config))? {
        Ok(o) => o,
        Err(e) => return out.abort(e.into()),
    };
    for (name, tol) in &tolerances {
        if !outcome.override_tol(name, *tol) {
            return Err(Failure::usage(format!("--tol {name}: no statistic of that name in suite {suite}")));
        }
    }
    for trace in &outcome.traces {
        let mut w = out.create(&format!("{}.csv", trace.name))?;
        trace.write_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = out.create("report.json")?;
    w.write_all(outcome.to_json()?.as_bytes())?;
    w.flush()?;
    for r in &outcome.reports {
        println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.check);
        for s in r.failures() {
            println!("    {} = {:e} (bound {:?} {:e})", s.name, s.value, s.bound, s.tol);
        }
    }
    let code = if outcome.pass() { EXIT_PASS } else { EXIT_CHECK_FAILED };
    println!("suite {suite}: {}", if code == EXIT_PASS { "pass" } else { "FAIL" });
    out.finish(code, None)
}

#[derive(Serialize)]
struct PdeSummary {
    kind: PdeKind,
    params: BarenblattParams<f64>,
    delta: f64,
    elapsed: f64,
    cells: usize,
    r_max: f64,
    steps: u64,
    clip_events: usize,
    max_mass_drift: f64,
    /// L¹ distance to the closed form at each output time.
    l1_errors: Vec<(f64, f64)>,
    l1_error_final: f64,
    l1_error_max: f64,
    support_edge: Option<f64>,
    support_radius: f64,
}

fn run_pde(recorded: &Recorded, a: &PdeArgs, output: &OutputArgs, threads: Option<usize>) -> CliResult<i32> {
    let params = BarenblattParams::<f64>::derive(a.model.d, a.model.p)?;
    let delta = a.delta.unwrap_or(match a.kind {
        PdeKind::Nonlinear => 0.1,
        PdeKind::Linearized => 0.2,
    });
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Failure::usage(format!("--delta must be > 0 (got {delta})")));
    }
    let elapsed = a.horizon.unwrap_or(1.0 - delta);
    if !(elapsed > 0.0 && elapsed.is_finite()) {
        return Err(Failure::usage(format!("--T must be > 0 (got {elapsed})")));
    }
    if a.snapshots == 0 {
        return Err(Failure::usage("--snapshots must be at least 1"));
    }
    let radius = params.support_radius(delta + elapsed)?;
    let r_max = a.r_max.unwrap_or(1.25 * radius);
    let grid = RadialGrid::new(a.model.d, a.cells, r_max)?;
    let settings = SolverSettings { cfl: a.cfl, ..SolverSettings::default() };
    let times: Vec<f64> = (1..=a.snapshots).map(|i| elapsed * i as f64 / a.snapshots as f64).collect();
    let initial = RadialState { time: 0.0, values: grid.tabulate_barenblatt(&params, delta)? };

    let mut out = OutDir::prepare(recorded, output)?;
    let solved: pbrownian::Result<Trajectory<f64>> = with_threads(threads, || match a.kind {
        PdeKind::Nonlinear => solve_plaplace(&grid, &initial, a.model.p, &times, &settings),
        PdeKind::Linearized => solve_linearized_fpe(&grid, &initial, &params, delta, &times, &settings),
    })?;
    let traj = match solved {
        Ok(t) => t,
        Err(e) => return out.abort(e.into()),
    };
    let mut l1_errors = Vec::new();
    for s in &traj.states {
        let exact = grid.tabulate_barenblatt(&params, delta + s.time)?;
        l1_errors.push((s.time, grid.l1_distance(&s.values, &exact)));
    }
    let summary = PdeSummary {
        kind: a.kind,
        params: params.clone(),
        delta,
        elapsed,
        cells: a.cells,
        r_max,
        steps: traj.steps,
        clip_events: traj.clip_log.len(),
        max_mass_drift: traj.max_mass_drift,
        l1_error_final: l1_errors.last().map_or(0.0, |e| e.1),
        l1_error_max: l1_errors.iter().map(|e| e.1).fold(0.0, f64::max),
        l1_errors,
        support_edge: grid.support_edge(&traj.last().values, 1e-10),
        support_radius: radius,
    };
    let mut w = out.create("trajectory.csv")?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    let sidecar = serde_json::json!({
        "kind": a.kind, "params": &params, "delta": delta, "elapsed": elapsed,
        "grid": { "d": grid.d, "cells": grid.cells(), "r_max": r_max, "dr": grid.dr },
        "settings": &settings, "clip_log": &traj.clip_log,
    });
    out.write_json("trajectory.json", &sidecar)?;
    out.write_json("summary.json", &summary)?;
    println!(
        "{:?} solve: {} steps, L1 error at T = {:.3e} (max {:.3e}), mass drift {:.1e}; wrote {}",
        a.kind,
        traj.steps,
        summary.l1_error_final,
        summary.l1_error_max,
        summary.max_mass_drift,
        out.path.display()
    );
    out.finish(EXIT_PASS, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_map_to_abort_code() {
        assert_eq!(Failure::from(Error::NonFinite { path: 3, step: 7 }).code, EXIT_NUMERICAL);
        assert_eq!(Failure::from(Error::SolverAbort("negative mass".into())).code, EXIT_NUMERICAL);
        assert_eq!(Failure::from(Error::RootNotConverged(50)).code, EXIT_NUMERICAL);
        assert_eq!(Failure::from(Error::InvalidExponent(2.0)).code, EXIT_USAGE);
        assert_eq!(Failure::from(Error::InvalidConfig("paths = 0".into())).code, EXIT_USAGE);
    }
}
