//! JSON run reports.

use crate::error::{Error, Result};
use crate::experiments::{MetricsReport, Method, RscCell, ScenarioKind, SummaryRow};
use crate::global_solver::{BoundKind, SolveResult, SolveStatus};
use crate::model::ProblemInstance;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const SCHEMA: &str = "fcgo.run_report.v1";

pub const STATUSES: [&str; 6] = ["Certified", "GapLimit", "TimeLimit", "NodeLimit", "Local", "Completed"];

/// Nonzero entries of a vector as (index, value) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn from_dense(v: &[f64]) -> Self {
        SparseVector { dim: v.len(), entries: v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).collect() }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Versions {
    pub fcgo: String,
    pub schema: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions { fcgo: env!("CARGO_PKG_VERSION").into(), schema: SCHEMA.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub lambda: f64,
    pub method: Method,
    pub objective: f64,
    pub status: Option<SolveStatus>,
    pub certified_gap: Option<f64>,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapRecord {
    pub rep: usize,
    pub mipgo_objective: f64,
    pub status: SolveStatus,
    pub certified_gap: f64,
    pub best_local: f64,
    pub best_local_method: Method,
    pub time_ms: f64,
}

/// Command-specific part of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Details {
    Solve { bound: BoundKind, big_m_used: f64, kkt_residual: Option<f64> },
    Local { method: String, init: String, iterations: usize },
    Enumeration { leaves: usize, binaries: usize },
    Export { mps: String, sidecar: String, columns: usize, rows: usize, binaries: usize, objective_offset: f64 },
    Statistical { scenario: ScenarioKind, replicates: Vec<ReplicateRecord>, summary: Vec<SummaryRow>, excluded: Vec<usize> },
    Gap { scenario: ScenarioKind, records: Vec<GapRecord> },
    Rsc { cells: Vec<RscCell> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema: String,
    pub command: Vec<String>,
    pub status: String,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: Option<usize>,
    /// Wall time of the command.
    pub time_ms: f64,
    pub beta: Option<SparseVector>,
    pub seed: u64,
    pub instance_digest: Option<String>,
    pub versions: Versions,
    pub details: Option<Details>,
}

/// SHA-256 of the instance serialization, as lowercase hex.
pub fn instance_digest(inst: &ProblemInstance) -> String {
    let bytes = serde_json::to_vec(inst).expect("instance serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunReport {
    pub fn new(command: Vec<String>, seed: u64, status: impl Into<String>) -> Self {
        RunReport {
            schema: SCHEMA.into(),
            command,
            status: status.into(),
            objective: None,
            lower_bound: None,
            gap: None,
            nodes: None,
            time_ms: 0.0,
            beta: None,
            seed,
            instance_digest: None,
            versions: Versions::default(),
            details: None,
        }
    }

    pub fn from_solve(command: Vec<String>, seed: u64, inst: &ProblemInstance, r: &SolveResult) -> Self {
        let mut rep = RunReport::new(command, seed, r.status.to_string());
        rep.objective = Some(r.objective);
        rep.lower_bound = Some(r.lower_bound);
        rep.gap = Some(r.gap);
        rep.nodes = Some(r.nodes_explored);
        rep.beta = Some(SparseVector::from_dense(&r.beta_hat[..inst.beta_dim()]));
        rep.instance_digest = Some(instance_digest(inst));
        rep.details = Some(Details::Solve { bound: r.bound, big_m_used: r.big_m_used, kkt_residual: r.kkt.as_ref().map(|k| k.residual) });
        rep
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Data(format!("report schema: {m}")));
        if self.schema != SCHEMA {
            return bad(format!("unknown schema {:?}", self.schema));
        }
        if self.command.is_empty() {
            return bad("empty command".into());
        }
        if !STATUSES.contains(&self.status.as_str()) {
            return bad(format!("unknown status {:?}", self.status));
        }
        for (name, v) in [("objective", self.objective), ("lower_bound", self.lower_bound), ("gap", self.gap), ("time_ms", Some(self.time_ms))] {
            if v.is_some_and(|x| !x.is_finite()) {
                return bad(format!("{name} is not finite"));
            }
        }
        if self.gap.is_some_and(|g| g < 0.0) || self.time_ms < 0.0 {
            return bad("negative gap or time".into());
        }
        if let Some(b) = &self.beta {
            if b.entries.windows(2).any(|w| w[0].0 >= w[1].0) {
                return bad("beta indices must increase".into());
            }
            if b.entries.iter().any(|&(i, v)| i >= b.dim || !v.is_finite()) {
                return bad("beta entry out of range or not finite".into());
            }
        }
        if let Some(d) = &self.instance_digest {
            if d.len() != 64 || !d.bytes().all(|c| c.is_ascii_digit() || (b'a'..=b'f').contains(&c)) {
                return bad("digest must be 64 lowercase hex digits".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let s = serde_json::to_string_pretty(self)?;
        // non-finite nested values serialize as null and fail here
        Self::from_json(&s)?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(text).map_err(|e| Error::Data(format!("report schema: {e}")))?;
        r.validate()?;
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn zero_times(v: &mut Value) {
    match v {
        Value::Object(m) => {
            for (k, x) in m.iter_mut() {
                if k == "time_ms" {
                    *x = Value::Null;
                } else {
                    zero_times(x);
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(zero_times),
        _ => {}
    }
}

/// Report JSON with every `time_ms` field nulled, for comparing runs.
pub fn without_timing(json: &str) -> Result<String> {
    let mut v: Value = serde_json::from_str(json)?;
    zero_times(&mut v);
    Ok(serde_json::to_string(&v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut r = RunReport::new(vec!["fcgo".into(), "solve".into()], 7, "Certified");
        r.objective = Some(1.0);
        r.lower_bound = Some(1.0 - 1e-12);
        r.gap = Some(1e-12);
        r.nodes = Some(3);
        r.time_ms = 1.5;
        r.beta = Some(SparseVector::from_dense(&[0.0, 0.1 + 0.2, 0.0, -1e-300]));
        r.instance_digest = Some("ab".repeat(32));
        r
    }

    #[test]
    fn lossless_round_trip() {
        let r = sample();
        assert_eq!(RunReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn unknown_fields_and_statuses_rejected() {
        let j = sample().to_json().unwrap();
        assert!(RunReport::from_json(&j.replacen('{', "{\"extra\": 1,", 1)).is_err());
        assert!(RunReport::from_json(&j.replace("Certified", "Done")).is_err());
        let mut r = sample();
        r.beta = Some(SparseVector { dim: 2, entries: vec![(1, 1.0), (0, 1.0)] });
        assert!(r.to_json().is_err());
    }

    #[test]
    fn timing_masked() {
        let a = sample();
        let mut b = sample();
        b.time_ms = 99.0;
        assert_eq!(without_timing(&a.to_json().unwrap()).unwrap(), without_timing(&b.to_json().unwrap()).unwrap());
    }
}
