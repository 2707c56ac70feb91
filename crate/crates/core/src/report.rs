//! Pass/fail records emitted by every check.
//!
//! Reports are pure functions of their inputs: there is no wall-clock field,
//! so two runs over identical inputs serialize to identical bytes.

use serde::{Deserialize, Serialize};

use crate::io::{digest, sig17, sig17_vec};

/// How a statistic is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Bound {
    pub fn holds(self, value: f64, tol: f64) -> bool {
        match self {
            Self::AtMost => value <= tol,
            Self::Below => value < tol,
            Self::AtLeast => value >= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub name: String,
    #[serde(serialize_with = "sig17")]
    pub value: f64,
    #[serde(serialize_with = "sig17")]
    pub tol: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Stat {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound, tol: f64) -> Self {
        // NaN never passes
        let pass = !value.is_nan() && bound.holds(value, tol);
        Self { name: name.into(), value, tol, bound, pass }
    }

    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self::new(name, value, Bound::AtMost, tol)
    }

    pub fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self::new(name, value, Bound::Below, tol)
    }

    pub fn at_least(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self::new(name, value, Bound::AtLeast, tol)
    }

    /// A boolean condition recorded as `value ∈ {0, 1} >= 1`.
    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        Self::at_least(name, if holds { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub d: usize,
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    #[serde(serialize_with = "sig17")]
    pub delta: f64,
    #[serde(serialize_with = "sig17_vec")]
    pub y: Vec<f64>,
}

impl ReportParams {
    pub fn new(d: usize, p: f64, delta: f64, y: &[f64]) -> Self {
        Self { d, p, delta, y: y.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub params: ReportParams,
    pub stats: Vec<Stat>,
    pub seed: Option<u64>,
    pub pass: bool,
    pub inputs_digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// Empty report; `inputs` is anything that identifies the run beyond the
    /// parameters (tolerances, sizes, probe sets) and feeds the digest.
    pub fn new<I: Serialize>(check: &str, params: ReportParams, seed: Option<u64>, inputs: &I) -> Self {
        let key = serde_json::json!({ "check": check, "params": &params, "seed": seed, "inputs": inputs });
        Self {
            check: check.to_owned(),
            params,
            stats: Vec::new(),
            seed,
            pass: false,
            inputs_digest: digest(key.to_string().as_bytes()),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, stat: Stat) -> &mut Self {
        self.stats.push(stat);
        self.pass = self.stats.iter().all(|s| s.pass);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    pub fn stat(&self, name: &str) -> Option<&Stat> {
        self.stats.iter().find(|s| s.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Stat> {
        self.stats.iter().filter(|s| !s.pass)
    }

    /// Overrides the tolerance of the named statistic and re-evaluates it.
    /// Returns whether the statistic exists.
    pub fn override_tol(&mut self, name: &str, tol: f64) -> bool {
        let mut found = false;
        for s in self.stats.iter_mut().filter(|s| s.name == name) {
            *s = Stat::new(s.name.clone(), s.value, s.bound, tol);
            found = true;
        }
        self.pass = !self.stats.is_empty() && self.stats.iter().all(|s| s.pass);
        found
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        crate::io::to_json_string(self)
    }
}
