//! Experiment configuration: a flat JSON object with exactly these fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slq_core::arrivals::PatternKind;
use slq_core::model::ModelData;

use crate::LabError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    HwCounterexample,
    HwVsSde,
    ConventionalLimit,
    Ssc,
    LossDecay,
    ArrivalScaling,
    SkorohodProps,
}

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Recipe::HwCounterexample,
        Recipe::HwVsSde,
        Recipe::ConventionalLimit,
        Recipe::Ssc,
        Recipe::LossDecay,
        Recipe::ArrivalScaling,
        Recipe::SkorohodProps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::HwCounterexample => "hw-counterexample",
            Recipe::HwVsSde => "hw-vs-sde",
            Recipe::ConventionalLimit => "conventional-limit",
            Recipe::Ssc => "ssc",
            Recipe::LossDecay => "loss-decay",
            Recipe::ArrivalScaling => "arrival-scaling",
            Recipe::SkorohodProps => "skorohod-props",
        }
    }

    /// Stable code mixed into every seed family of the recipe.
    pub fn code(self) -> u64 {
        Recipe::ALL.iter().position(|r| *r == self).unwrap() as u64 + 1
    }
}

impl std::str::FromStr for Recipe {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| LabError::Config(format!("unknown recipe {s:?}")))
    }
}

/// Arrival model override. Without one, Halfin–Whitt recipes use the
/// deterministic pattern selected by `k` and the conventional recipe uses
/// Poisson arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    Pattern,
    Poisson,
    /// Unit-mean gaps of the given law, accelerated by `acceleration` (by
    /// default the class arrival rate of the `n`-th system).
    Renewal {
        dist: String,
        scv: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        acceleration: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub recipe: Recipe,
    pub model: ModelData,
    pub n_list: Vec<u64>,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_k")]
    pub k: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub replications: usize,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn default_a() -> f64 {
    0.3
}
fn default_k() -> u8 {
    1
}
fn default_grid() -> usize {
    2048
}
fn default_dt() -> f64 {
    1e-4
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Defaults for everything but the recipe, the model, the sizes and the
    /// replication count.
    pub fn new(recipe: Recipe, model: ModelData, n_list: Vec<u64>, replications: usize) -> Self {
        ExperimentConfig {
            recipe,
            model,
            n_list,
            a: default_a(),
            k: default_k(),
            source: None,
            horizon: 1.0,
            replications,
            grid_size: default_grid(),
            dt: default_dt(),
            seed: DEFAULT_SEED,
            output_dir: default_out(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn pattern_kind(&self) -> Result<PatternKind, LabError> {
        Ok(PatternKind::from_k(self.k)?)
    }

    /// Number of limit-law samples drawn against `replications` system runs.
    pub fn limit_paths(&self) -> usize {
        10 * self.replications
    }

    pub fn check(&self) -> Result<(), LabError> {
        let fail = |m: String| Err(LabError::Config(m));
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return fail("n_list must hold positive sizes".into());
        }
        if !(self.horizon > 0.0) {
            return fail(format!("T = {} must be positive", self.horizon));
        }
        if self.grid_size < 2 {
            return fail("grid_size must be at least 2".into());
        }
        if !(self.dt > 0.0) {
            return fail(format!("dt = {} must be positive", self.dt));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return fail(format!("a = {} outside (0, 1)", self.a));
        }
        self.pattern_kind()?;
        self.model.validate().into_result()?;
        Ok(())
    }
}
