//! Deterministic text and CSV reports shared by all validators.

use crate::chart::IndexSet;
use crate::linalg::Q;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// A semi-decision found nothing at the sampled resolution.
    NoFailure,
}

impl Status {
    pub fn ok(self) -> bool {
        !matches!(self, Status::Fail)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NoFailure => "NO-FAILURE-AT-RESOLUTION",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub label: String,
    pub chart: Option<IndexSet>,
    pub coords: Vec<Q>,
}

impl Witness {
    pub fn new(label: impl Into<String>, chart: Option<IndexSet>, coords: Vec<Q>) -> Self {
        Witness { label: label.into(), chart, coords }
    }
}

pub fn fmt_point(x: &[Q]) -> String {
    let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(", "))
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.chart {
            Some(c) => write!(f, "{} in U_{} at {}", self.label, c, fmt_point(&self.coords)),
            None => write!(f, "{} at {}", self.label, fmt_point(&self.coords)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub status: Status,
    pub details: Vec<String>,
    pub witnesses: Vec<Witness>,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, status: Status) -> Self {
        CheckReport { check: check.into(), status, details: vec![], witnesses: vec![] }
    }

    pub fn pass(check: impl Into<String>) -> Self {
        Self::new(check, Status::Pass)
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.details.push(d.into());
        self
    }

    pub fn push(&mut self, d: impl Into<String>) {
        self.details.push(d.into());
    }

    pub fn fail_with(&mut self, d: impl Into<String>, w: Vec<Witness>) {
        self.status = Status::Fail;
        self.details.push(d.into());
        self.witnesses.extend(w);
    }

    pub fn ok(&self) -> bool {
        self.status.ok()
    }

    pub fn text(&self) -> String {
        let mut s = format!("== {} ==\nstatus: {}\n", self.check, self.status);
        for d in &self.details {
            s.push_str(d);
            s.push('\n');
        }
        for w in &self.witnesses {
            s.push_str(&format!("witness {w}\n"));
        }
        s
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.witnesses
            .iter()
            .map(|w| {
                let chart = w.chart.map(|c| c.to_string()).unwrap_or_default();
                let coords: Vec<String> = w.coords.iter().map(|v| v.to_string()).collect();
                format!("{},{},\"{}\",\"{}\"", self.check, w.label, chart, coords.join(" "))
            })
            .collect()
    }
}

/// A sequence of check reports.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<CheckReport>,
}

impl Report {
    pub fn add(&mut self, c: CheckReport) {
        self.checks.push(c);
    }

    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok())
    }

    pub fn text(&self) -> String {
        self.checks.iter().map(|c| c.text()).collect::<Vec<_>>().join("\n")
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("check,label,chart,coordinates\n");
        for c in &self.checks {
            for r in c.csv_rows() {
                s.push_str(&r);
                s.push('\n');
            }
        }
        s
    }
}
