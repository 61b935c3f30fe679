//! Proof certificates: key-value records grouped by stage, the reduction
//! cell lines, and the solution table. Wall times go to a sidecar so the
//! body is byte-stable for a fixed configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::{invalid, Result};
use crate::lucas::SolutionRecord;
use crate::search::{results_csv, write_atomic};

pub const CERTIFICATE_FILE: &str = "certificate.txt";
pub const CELLS_FILE: &str = "cells.csv";
pub const SOLUTIONS_FILE: &str = "solutions.csv";
pub const TIMINGS_FILE: &str = "timings.txt";
pub const CELLS_HEADER: &str = "k,a,l,m,campaign,q_index,epsilon,w_bound,status";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageRecord {
    pub stage: String,
    pub fields: Vec<(String, String)>,
}

impl StageRecord {
    pub fn new(stage: impl Into<String>) -> Self {
        StageRecord { stage: stage.into(), fields: Vec::new() }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.fields.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = format!("[{}]\n", self.stage);
        for (k, v) in &self.fields {
            writeln!(s, "{k} = {v}").expect("string write");
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct ProofCertificate {
    pub tool_version: String,
    pub precision_start: u32,
    pub precision_cap: u32,
    pub stages: Vec<StageRecord>,
    pub cells: Vec<String>,
    pub solutions: Vec<SolutionRecord>,
    pub timings: Vec<(String, Duration)>,
}

impl ProofCertificate {
    pub fn new(precision_start: u32, precision_cap: u32) -> Self {
        ProofCertificate {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            precision_start,
            precision_cap,
            stages: Vec::new(),
            cells: Vec::new(),
            solutions: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn add_stage(&mut self, record: StageRecord, elapsed: Duration) {
        let label = match record.get("k") {
            Some(k) => format!("{} k={k}", record.stage),
            None => record.stage.clone(),
        };
        self.timings.push((label, elapsed));
        self.stages.push(record);
    }

    fn ks_with(&self, stage: &str) -> Vec<u32> {
        self.stages
            .iter()
            .filter(|s| s.stage == stage)
            .filter_map(|s| s.get("k").and_then(|k| k.parse().ok()))
            .collect()
    }

    pub fn campaign_ks(&self) -> Vec<u32> {
        self.ks_with("campaigns")
    }

    pub fn verified_ks(&self) -> Vec<u32> {
        self.ks_with("verify")
    }

    /// The `k > 650` contradiction was recorded.
    pub fn excludes_large_k(&self) -> bool {
        self.stages.iter().any(|s| s.stage == "k-reduce" && s.get("contradiction") == Some("true"))
    }

    /// Every `k <= 650` has campaign and sweep records and larger `k` are
    /// excluded.
    pub fn is_complete(&self) -> bool {
        let (c, v) = (self.campaign_ks(), self.verified_ks());
        self.excludes_large_k() && (2..=650).all(|k| c.contains(&k) && v.contains(&k))
    }

    pub fn body(&self) -> String {
        let mut s = String::new();
        writeln!(s, "tool_version = {}", self.tool_version).expect("string write");
        writeln!(s, "precision_start = {}", self.precision_start).expect("string write");
        writeln!(s, "precision_cap = {}", self.precision_cap).expect("string write");
        writeln!(s, "complete = {}", self.is_complete()).expect("string write");
        for st in &self.stages {
            s.push('\n');
            s.push_str(&st.render());
        }
        s
    }

    pub fn cells_csv(&self) -> String {
        let mut s = format!("{CELLS_HEADER}\n");
        for c in &self.cells {
            s.push_str(c);
            s.push('\n');
        }
        s
    }

    pub fn timings_text(&self) -> String {
        self.timings.iter().map(|(l, d)| format!("{l}\t{:.3}s\n", d.as_secs_f64())).collect()
    }
}

/// Write the certificate files into `dir`, returning their paths.
pub fn emit_certificate(cert: &ProofCertificate, dir: &Path) -> Result<Vec<PathBuf>> {
    if cert.stages.is_empty() {
        return invalid("a certificate needs at least one completed stage");
    }
    fs::create_dir_all(dir)?;
    let files = [
        (CERTIFICATE_FILE, cert.body()),
        (CELLS_FILE, cert.cells_csv()),
        (SOLUTIONS_FILE, results_csv(&cert.solutions)?),
        (TIMINGS_FILE, cert.timings_text()),
    ];
    let mut out = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ProofCertificate {
        let mut c = ProofCertificate::new(64, 16384);
        let mut s = StageRecord::new("campaigns");
        s.push("k", 3).push("n_bound", 219);
        c.add_stage(s, Duration::from_millis(5));
        c.cells.push("3,1,,,1,99,1.0e-1,214,ok".into());
        c
    }

    #[test]
    fn empty_certificate_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_certificate(&ProofCertificate::new(64, 128), dir.path()).is_err());
    }

    #[test]
    fn body_is_stable_and_timings_are_separate() {
        let dir = tempfile::tempdir().unwrap();
        let a = sample();
        let mut b = sample();
        b.timings[0].1 = Duration::from_secs(9);
        emit_certificate(&a, dir.path()).unwrap();
        let first = fs::read(dir.path().join(CERTIFICATE_FILE)).unwrap();
        emit_certificate(&b, dir.path()).unwrap();
        assert_eq!(first, fs::read(dir.path().join(CERTIFICATE_FILE)).unwrap());
        assert!(fs::read_to_string(dir.path().join(TIMINGS_FILE)).unwrap().contains("campaigns k=3"));
        assert!(!String::from_utf8(first).unwrap().contains("9.000"));
    }

    #[test]
    fn completeness() {
        let c = sample();
        assert!(!c.is_complete());
        assert_eq!(c.campaign_ks(), vec![3]);
        assert!(c.body().contains("[campaigns]\nk = 3\n"));
    }
}
