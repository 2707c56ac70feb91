//! Two-time conditional consistency.
//!
//! Paths of a direct run are grouped by their radius at time `r`. For every
//! group, the radii at time `t` are compared (two-sample KS) with those of a
//! second run started at `r` from the same positions. Since the conditional
//! kernel is realized by the same time-inhomogeneous dynamics, this checks
//! that the scheme is Markov in the sense used by the particle picture: the
//! future depends on the past only through the present position.

use serde::Serialize;

use super::{simulate_from, PathEnsemble};
use crate::error::{Error, Result};
use crate::numerics::ks::{critical_two_sample, ks_two_sample};
use crate::report::{ReportParams, Stat, VerificationReport};

/// Bins with fewer paths are skipped (and noted).
pub const MIN_BIN_PATHS: usize = 100;

/// Adds `shift` to the time-`t` radii of the direct paths in one bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinShift {
    pub bin: usize,
    pub shift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarkovSettings {
    pub bins: usize,
    pub streams: StreamsSetting,
    pub fault: Option<BinShift>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamsSetting {
    Fresh,
    Identical,
}

impl Default for MarkovSettings {
    fn default() -> Self {
        Self { bins: 5, streams: StreamsSetting::Fresh, fault: None }
    }
}

/// Per-bin outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct BinOutcome {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` when skipped.
    pub ks: Option<f64>,
    pub critical: f64,
}

/// Direct and continued time-`t` radii, grouped by radial bin at time `r`.
#[derive(Clone, Debug)]
pub struct Conditional {
    pub r_time: f64,
    pub t_time: f64,
    pub radius: f64,
    /// Per bin: `(direct, continued)` radii at time `t`.
    pub bins: Vec<(Vec<f64>, Vec<f64>)>,
    pub outside: usize,
    pub streams: StreamsSetting,
    params: ReportParams,
    seed: u64,
    paths: usize,
    step: f64,
}

/// Groups paths by radius at snapshot `r_index` and continues every path of
/// an occupied bin from its time-`r` position to snapshot `t_index`.
pub fn continue_bins(ensemble: &PathEnsemble, r_index: usize, t_index: usize, bins: usize, streams: StreamsSetting) -> Result<Conditional> {
    let snaps = &ensemble.snapshots;
    if r_index >= snaps.len() || t_index >= snaps.len() || snaps[r_index].time >= snaps[t_index].time {
        return Err(Error::InvalidConfig(format!(
            "need snapshots r < t (got indices {r_index}, {t_index} of {})",
            snaps.len()
        )));
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("at least one radial bin is required".into()));
    }
    let cfg = &ensemble.config;
    let d = cfg.params.d;
    let (r_time, t_time) = (snaps[r_index].time, snaps[t_index].time);
    let radius = cfg.support_radius(r_time)?;
    let width = radius / bins as f64;
    let r_radii = ensemble.radii(r_index);
    let t_radii = ensemble.radii(t_index);

    // bin membership at time r; paths outside [0, R] belong to no bin
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins];
    let mut outside = 0usize;
    for (i, &rr) in r_radii.iter().enumerate() {
        if rr > radius {
            outside += 1;
            continue;
        }
        members[((rr / width) as usize).min(bins - 1)].push(i);
    }

    // one continuation for every path in an occupied bin
    let selected: Vec<usize> = members.iter().filter(|m| m.len() >= MIN_BIN_PATHS).flatten().copied().collect();
    let mut start = Vec::with_capacity(selected.len() * d);
    for &i in &selected {
        start.extend_from_slice(ensemble.position(r_index, i));
    }
    let ids: Vec<u64> = selected.iter().map(|&i| ensemble.path_ids[i]).collect();
    let mut config = cfg.clone();
    config.horizon = t_time;
    config.snapshot_times.clear();
    config.record_paths = false;
    let epoch = match streams {
        StreamsSetting::Identical => ensemble.noise_epoch,
        StreamsSetting::Fresh => ensemble.noise_epoch + 1,
    };
    let mut continued = vec![f64::NAN; ensemble.len()];
    if !selected.is_empty() {
        let fresh = simulate_from(&config, snaps[r_index].step, &start, ids, epoch)?;
        let radii = fresh.radii(fresh.snapshots.len() - 1);
        for (j, &i) in selected.iter().enumerate() {
            continued[i] = radii[j];
        }
    }
    let grouped = members
        .iter()
        .map(|m| {
            if m.len() < MIN_BIN_PATHS {
                (m.iter().map(|&i| t_radii[i]).collect(), Vec::new())
            } else {
                (m.iter().map(|&i| t_radii[i]).collect(), m.iter().map(|&i| continued[i]).collect())
            }
        })
        .collect();
    Ok(Conditional {
        r_time,
        t_time,
        radius,
        bins: grouped,
        outside,
        streams,
        params: ReportParams::new(d, cfg.params.p, cfg.delta0, &cfg.center),
        seed: cfg.seed,
        paths: ensemble.len(),
        step: cfg.step,
    })
}

impl Conditional {
    /// Per-bin two-sample KS at the 99% level; `fault` shifts the direct
    /// radii of one bin.
    pub fn evaluate(&self, fault: Option<BinShift>) -> (VerificationReport, Vec<BinOutcome>) {
        let n_bins = self.bins.len();
        let width = self.radius / n_bins as f64;
        let inputs = serde_json::json!({
            "r": self.r_time, "t": self.t_time, "paths": self.paths, "bins": n_bins,
            "streams": self.streams, "fault": fault, "step": self.step,
        });
        let mut report = VerificationReport::new("markov", self.params.clone(), Some(self.seed), &inputs);
        let mut outcomes = Vec::with_capacity(n_bins);
        let mut tested = 0;
        for (b, (direct, cont)) in self.bins.iter().enumerate() {
            let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
            let n = direct.len();
            let critical = critical_two_sample(n.max(1), n.max(1));
            if n < MIN_BIN_PATHS {
                report.note(format!("bin {b} [{lo:.4}, {hi:.4}] skipped: {n} paths < {MIN_BIN_PATHS}"));
                outcomes.push(BinOutcome { lo, hi, count: n, ks: None, critical });
                continue;
            }
            let shift = fault.filter(|f| f.bin == b).map_or(0.0, |f| f.shift);
            let shifted: Vec<f64> = direct.iter().map(|v| v + shift).collect();
            let ks = ks_two_sample(&shifted, cont);
            report.push(Stat::at_most(format!("ks_bin_{b}"), ks, critical));
            outcomes.push(BinOutcome { lo, hi, count: n, ks: Some(ks), critical });
            tested += 1;
        }
        if self.outside > 0 {
            report.note(format!("{} paths beyond R at time r belong to no bin", self.outside));
        }
        report.push(Stat::at_least("bins_tested", tested as f64, 1.0));
        (report, outcomes)
    }
}

pub fn conditional_consistency_test(
    ensemble: &PathEnsemble,
    r_index: usize,
    t_index: usize,
    settings: &MarkovSettings,
) -> Result<(VerificationReport, Vec<BinOutcome>)> {
    let cond = continue_bins(ensemble, r_index, t_index, settings.bins, settings.streams)?;
    Ok(cond.evaluate(settings.fault))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barenblatt::BarenblattParams;
    use crate::sde::{simulate, SimConfig};

    fn ensemble(paths: usize) -> PathEnsemble {
        let mut c = SimConfig::new(BarenblattParams::derive(2, 4.0).unwrap(), vec![0.0, 0.0]);
        c.paths = paths;
        c.step = 1e-2;
        c.horizon = 0.45;
        c.snapshot_times = vec![0.25];
        c.seed = 5;
        simulate(&c).unwrap()
    }

    #[test]
    fn identical_streams_give_zero() {
        let e = ensemble(2000);
        let s = MarkovSettings { streams: StreamsSetting::Identical, ..Default::default() };
        let (rep, bins) = conditional_consistency_test(&e, 1, 2, &s).unwrap();
        assert!(rep.pass);
        assert!(bins.iter().filter_map(|b| b.ks).all(|k| k == 0.0));
    }

    #[test]
    fn shifted_bin_fails_and_sparse_bins_are_skipped() {
        let e = ensemble(3000);
        let (ok, bins) = conditional_consistency_test(&e, 1, 2, &MarkovSettings { bins: 12, ..Default::default() }).unwrap();
        assert!(bins.iter().any(|b| b.ks.is_none()));
        assert!(!ok.notes.is_empty());
        let target = bins.iter().position(|b| b.ks.is_some()).unwrap();
        let s = MarkovSettings { bins: 12, fault: Some(BinShift { bin: target, shift: 0.5 }), ..Default::default() };
        let (bad, _) = conditional_consistency_test(&e, 1, 2, &s).unwrap();
        assert!(!bad.stat(&format!("ks_bin_{target}")).unwrap().pass);
        assert!(!bad.pass);
    }

    #[test]
    fn rejects_reversed_times() {
        let e = ensemble(10);
        assert!(conditional_consistency_test(&e, 2, 1, &MarkovSettings::default()).is_err());
    }
}
