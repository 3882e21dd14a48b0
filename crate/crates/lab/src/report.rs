//! In-memory experiment report.

use serde::Serialize;
use slq_core::stats::{summarize, SampleSet, QUANTILE_LEVELS};

use crate::LabError;

/// One raw observation: a replication's observable at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawRow {
    pub recipe: &'static str,
    pub n: u64,
    pub replication: usize,
    pub observable: String,
    pub time: f64,
    pub value: f64,
    pub seed: u64,
}

/// One aggregate statistic. Only means carry a confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub recipe: &'static str,
    pub n: u64,
    pub observable: String,
    pub stat: String,
    pub value: f64,
    pub lo95: Option<f64>,
    pub hi95: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "==")]
    Equal,
}

/// A declared threshold and whether the run met it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::Below => value < threshold,
            Relation::AtMost => value <= threshold,
            Relation::Equal => value == threshold,
        };
        Check { name: name.into(), value, relation, threshold, pass }
    }

    /// A yes/no property recorded as 1 (holds) or 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, Relation::Equal, 1.0)
    }
}

/// Empirical distributions drawn on one set of axes.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfPanel {
    pub title: String,
    pub sets: Vec<SampleSet>,
}

/// `y` against `n`, one polyline per series.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePanel {
    pub title: String,
    pub y_label: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub recipe: &'static str,
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggregateRow>,
    pub checks: Vec<Check>,
    pub ecdfs: Vec<EcdfPanel>,
    pub curves: Vec<CurvePanel>,
    /// Trajectories whose event log failed re-verification.
    pub invariant_violations: usize,
}

impl ExperimentReport {
    pub fn new(recipe: &'static str) -> Self {
        ExperimentReport {
            recipe,
            raw: Vec::new(),
            aggregate: Vec::new(),
            checks: Vec::new(),
            ecdfs: Vec::new(),
            curves: Vec::new(),
            invariant_violations: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn stat(&self, n: u64, observable: &str, stat: &str) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|r| r.n == n && r.observable == observable && r.stat == stat)
            .map(|r| r.value)
    }

    pub fn push_stat(&mut self, n: u64, observable: &str, stat: &str, value: f64) {
        self.aggregate.push(AggregateRow {
            recipe: self.recipe,
            n,
            observable: observable.into(),
            stat: stat.into(),
            value,
            lo95: None,
            hi95: None,
        });
    }

    /// Mean with its interval, variance and the standard quantiles.
    pub fn push_summary(&mut self, n: u64, set: &SampleSet) -> Result<(), LabError> {
        let s = summarize(set)?;
        self.aggregate.push(AggregateRow {
            recipe: self.recipe,
            n,
            observable: set.label.clone(),
            stat: "mean".into(),
            value: s.mean,
            lo95: Some(s.ci95.0),
            hi95: Some(s.ci95.1),
        });
        self.push_stat(n, &set.label, "variance", s.variance);
        for (level, q) in QUANTILE_LEVELS.iter().zip(s.quantiles) {
            self.push_stat(n, &set.label, &format!("q{:02}", (level * 100.0).round() as u32), q);
        }
        Ok(())
    }
}
