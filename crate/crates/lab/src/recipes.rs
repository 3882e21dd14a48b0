//! The named experiments.
//!
//! Every replication owns a generator seeded with
//! `replication_seed(root, family, index)` where
//! `family = code(recipe) << 56 ^ variant << 48 ^ n`. The variant separates
//! the streams of one recipe: 0 for the configured system, 1 for the
//! mirrored pattern, 2 for limit-law samples. Limit-law rows carry `n = 0`.

use slq_core::arrivals::{scaling_check, ArrivalSource, Pattern, PatternKind};
use slq_core::conv_sim::{conv_limit_params, run_conventional, service_shapes, ConvConfig};
use slq_core::hw_sim::{run_hw, HwArrivals, HwConfig};
use slq_core::limits::{
    conv_limit_terminal, gamma_halfspace, gamma_interval, gamma_interval_regulated, hw_limit_terminal,
    ConvLimitParams, HwLimitParams,
};
use slq_core::model::{derive, InitialLaw, Regime};
use slq_core::path::{uniform_grid, GridPath};
use slq_core::rng::{replication_seed, stream_rng, Randomness, StreamRng};
use slq_core::scaling::{conv_scale, diffusion_scale_hw, ssc_deviation_hw};
use slq_core::stats::{ks_distance, loss_decay_table, summarize, SampleSet};

use crate::config::{ExperimentConfig, Recipe, SourceSpec};
use crate::pool::Workers;
use crate::report::{Check, CurvePanel, EcdfPanel, ExperimentReport, RawRow, Relation};
use crate::LabError;

/// Declared pass thresholds.
pub mod thresholds {
    /// Largest p-value at which the two patterns count as distinguishable.
    pub const KS_P_DISTINCT: f64 = 0.01;
    /// Largest KS statistic between mirrored coordinates of the two patterns.
    pub const KS_MIRROR: f64 = 0.07;
    /// Largest KS statistic between a scaled system and its limit law.
    pub const KS_LIMIT: f64 = 0.1;
    /// Largest mean scaled loss of the spread class at the largest `n`.
    pub const LOSS_MEAN: f64 = 0.01;
    /// Deviation level of the state-space-collapse diagnostic.
    pub const SSC_LEVEL: f64 = 0.1;
    /// Largest fraction of replications above `SSC_LEVEL` at the largest `n`.
    pub const SSC_FRACTION: f64 = 0.05;
    /// Lipschitz and modulus constant of the half-space map in two dimensions.
    pub const HALFSPACE_C: f64 = 1.0 + std::f64::consts::SQRT_2;
    /// Float slack on the half-space boundary identity.
    pub const BOUNDARY_SLACK: f64 = 1e-9;
}

use thresholds::*;

const VARIANT_SYSTEM: u64 = 0;
const VARIANT_MIRROR: u64 = 1;
const VARIANT_LIMIT: u64 = 2;

pub fn family(recipe: Recipe, variant: u64, n: u64) -> u64 {
    (recipe.code() << 56) ^ (variant << 48) ^ n
}

/// Runs `cfg` on a pool of `workers` threads.
pub fn run_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentReport, LabError> {
    run_experiment(cfg, &Workers::new(workers)?)
}

pub fn run_experiment(cfg: &ExperimentConfig, workers: &Workers) -> Result<ExperimentReport, LabError> {
    cfg.check()?;
    let mut ctx = Ctx { cfg, workers, report: ExperimentReport::new(cfg.recipe.name()) };
    match cfg.recipe {
        Recipe::HwCounterexample => ctx.hw_counterexample()?,
        Recipe::HwVsSde => ctx.hw_vs_sde()?,
        Recipe::ConventionalLimit => ctx.conventional_limit()?,
        Recipe::Ssc => ctx.ssc()?,
        Recipe::LossDecay => ctx.loss_decay()?,
        Recipe::ArrivalScaling => ctx.arrival_scaling()?,
        Recipe::SkorohodProps => ctx.skorohod_props()?,
    }
    Ok(ctx.report)
}

struct HwOutcome {
    seed: u64,
    x: Vec<f64>,
    r: Vec<f64>,
    ssc: f64,
    verified: bool,
    /// Batch-class losses away from the batch epochs.
    off_batch_losses: usize,
    /// Full scaled path, kept for the first replication only.
    path: Option<GridPath>,
}

struct ConvOutcome {
    seed: u64,
    workload: f64,
    x: Vec<f64>,
    ssc: f64,
    verified: bool,
    path: Option<GridPath>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    workers: &'a Workers,
    report: ExperimentReport,
}

fn sorted_sizes(cfg: &ExperimentConfig) -> Vec<u64> {
    let mut v = cfg.n_list.clone();
    v.sort_unstable();
    v.dedup();
    v
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Strictly decreasing, except that a run of zeros counts as decreasing.
fn decreasing_to_zero(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

impl Ctx<'_> {
    fn seed(&self, variant: u64, n: u64, rep: usize) -> u64 {
        replication_seed(self.cfg.seed, family(self.cfg.recipe, variant, n), rep as u64)
    }

    fn grid(&self) -> Result<Vec<f64>, LabError> {
        Ok(uniform_grid(self.cfg.horizon, self.cfg.grid_size)?)
    }

    fn raw(&mut self, n: u64, replication: usize, observable: &str, time: f64, value: f64, seed: u64) {
        self.report.raw.push(RawRow {
            recipe: self.report.recipe,
            n,
            replication,
            observable: observable.into(),
            time,
            value,
            seed,
        });
    }

    fn check(&mut self, c: Check) {
        self.report.checks.push(c);
    }

    fn hw_arrivals(&self, n: u64, kind: PatternKind) -> Result<HwArrivals, LabError> {
        let cfg = self.cfg;
        let params = derive(&cfg.model, n, cfg.a, Regime::HalfinWhitt)?;
        let sources = match &cfg.source {
            None | Some(SourceSpec::Pattern) => return Ok(HwArrivals::Pattern(kind)),
            Some(spec) => rate_sources(spec, &params.lambda_n)?,
        };
        Ok(HwArrivals::Sources(sources))
    }

    fn run_hw_batch(&self, n: u64, kind: PatternKind, variant: u64) -> Result<Vec<HwOutcome>, LabError> {
        let cfg = self.cfg;
        let params = derive(&cfg.model, n, cfg.a, Regime::HalfinWhitt)?;
        let hw_cfg = HwConfig::from_params(&params);
        let arrivals = self.hw_arrivals(n, kind)?;
        let pattern = match arrivals {
            HwArrivals::Pattern(k) => Some(Pattern::new(&params, k)?),
            HwArrivals::Sources(_) => None,
        };
        let grid = self.grid()?;
        self.workers.map(cfg.replications, |rep| {
            let seed = self.seed(variant, n, rep);
            let mut rng = stream_rng(seed);
            let traj = run_hw(&cfg.model, n, cfg.a, &arrivals, cfg.horizon, &mut rng)?;
            let verified = traj.verify(&hw_cfg).is_ok();
            let off_batch_losses = pattern.map_or(0, |p| {
                traj.loss_times(p.kind().batch_class()).iter().filter(|&&t| !p.is_batch_time(t)).count()
            });
            let scaled = diffusion_scale_hw(&traj, &params, &grid)?;
            Ok(HwOutcome {
                seed,
                x: scaled.x.terminal().to_vec(),
                r: scaled.r.terminal().to_vec(),
                ssc: ssc_deviation_hw(&scaled.x, &scaled.q)?,
                verified,
                off_batch_losses,
                path: (rep == 0).then_some(scaled.x),
            })
        })
    }

    /// Raw rows of a Halfin–Whitt batch: the first replication's path on the
    /// grid, terminal values for the rest.
    fn hw_rows(&mut self, n: u64, suffix: &str, outcomes: &[HwOutcome]) {
        let t = self.cfg.horizon;
        self.report.invariant_violations += outcomes.iter().filter(|o| !o.verified).count();
        for (rep, o) in outcomes.iter().enumerate() {
            if let Some(path) = &o.path {
                for (j, &s) in path.times().iter().enumerate().take(path.len() - 1) {
                    for (i, v) in path.value(j).iter().enumerate() {
                        self.raw(n, rep, &format!("x{}{suffix}", i + 1), s, *v, o.seed);
                    }
                }
            }
            for (i, v) in o.x.iter().enumerate() {
                self.raw(n, rep, &format!("x{}{suffix}", i + 1), t, *v, o.seed);
            }
            for (i, v) in o.r.iter().enumerate() {
                self.raw(n, rep, &format!("r{}{suffix}", i + 1), t, *v, o.seed);
            }
            self.raw(n, rep, &format!("ssc{suffix}"), t, o.ssc, o.seed);
        }
    }

    fn coordinate_set(label: String, outcomes: &[HwOutcome], i: usize) -> SampleSet {
        SampleSet::new(label, outcomes.iter().map(|o| o.x[i]).collect())
    }

    fn ks(&mut self, n: u64, a: &SampleSet, b: &SampleSet) -> Result<(f64, f64), LabError> {
        let r = ks_distance(a, b)?;
        let label = format!("{}~{}", a.label, b.label);
        self.report.push_stat(n, &label, "ks", r.statistic);
        self.report.push_stat(n, &label, "ks_p", r.p_value);
        Ok((r.statistic, r.p_value))
    }

    fn violation_check(&mut self) {
        let v = self.report.invariant_violations as f64;
        self.check(Check::new("invariant_violations", v, Relation::Equal, 0.0));
    }

    fn hw_counterexample(&mut self) -> Result<(), LabError> {
        let sizes = sorted_sizes(self.cfg);
        let last = *sizes.last().unwrap();
        for &n in &sizes {
            let one = self.run_hw_batch(n, PatternKind::K1, VARIANT_SYSTEM)?;
            let two = self.run_hw_batch(n, PatternKind::K2, VARIANT_MIRROR)?;
            self.hw_rows(n, "_k1", &one);
            self.hw_rows(n, "_k2", &two);
            let sets = [
                Self::coordinate_set("x1_k1".into(), &one, 0),
                Self::coordinate_set("x2_k1".into(), &one, 1),
                Self::coordinate_set("x1_k2".into(), &two, 0),
                Self::coordinate_set("x2_k2".into(), &two, 1),
            ];
            if self.cfg.replications < 2 {
                continue;
            }
            for s in &sets {
                self.report.push_summary(n, s)?;
            }
            let (_, p) = self.ks(n, &sets[0], &sets[2])?;
            let (mirror, _) = self.ks(n, &sets[0], &sets[3])?;
            if n == last {
                self.check(Check::new("ks_p x1 k=1 vs k=2", p, Relation::Below, KS_P_DISTINCT));
                self.check(Check::new("ks x1 k=1 vs x2 k=2", mirror, Relation::Below, KS_MIRROR));
                self.report.ecdfs.push(EcdfPanel {
                    title: format!("X1(T), n = {n}"),
                    sets: vec![sets[0].clone(), sets[2].clone()],
                });
                self.report.ecdfs.push(EcdfPanel {
                    title: format!("mirrored coordinates, n = {n}"),
                    sets: vec![sets[0].clone(), sets[3].clone()],
                });
            }
        }
        self.violation_check();
        Ok(())
    }

    fn hw_limit_samples(&mut self, kind: PatternKind) -> Result<Vec<Vec<f64>>, LabError> {
        let cfg = self.cfg;
        let base = HwLimitParams::from_model(&cfg.model, kind.batch_class());
        let samples = self.workers.map(cfg.limit_paths(), |rep| {
            let seed = self.seed(VARIANT_LIMIT, 0, rep);
            let mut rng = stream_rng(seed);
            let mut p = base.clone();
            p.x0 = initial_point(&cfg.model.initial, p.num_classes(), &mut rng);
            Ok((seed, hw_limit_terminal(&p, cfg.dt, cfg.horizon, &mut rng)?))
        })?;
        for (rep, (seed, x)) in samples.iter().enumerate() {
            for (i, v) in x.iter().enumerate() {
                self.raw(0, rep, &format!("x{}_limit", i + 1), cfg.horizon, *v, *seed);
            }
        }
        Ok(samples.into_iter().map(|(_, x)| x).collect())
    }

    fn hw_vs_sde(&mut self) -> Result<(), LabError> {
        let kind = self.cfg.pattern_kind()?;
        let limit = self.hw_limit_samples(kind)?;
        let classes = self.cfg.model.num_classes();
        let limit_sets: Vec<SampleSet> = (0..classes)
            .map(|i| SampleSet::new(format!("x{}_limit", i + 1), limit.iter().map(|x| x[i]).collect()))
            .collect();
        for s in &limit_sets {
            self.report.push_summary(0, s)?;
        }
        let sizes = sorted_sizes(self.cfg);
        let last = *sizes.last().unwrap();
        for &n in &sizes {
            let out = self.run_hw_batch(n, kind, VARIANT_SYSTEM)?;
            self.hw_rows(n, "", &out);
            if self.cfg.replications < 2 {
                continue;
            }
            for (i, lim) in limit_sets.iter().enumerate() {
                let sim = Self::coordinate_set(format!("x{}", i + 1), &out, i);
                self.report.push_summary(n, &sim)?;
                let (d, _) = self.ks(n, &sim, lim)?;
                if n == last {
                    self.check(Check::new(format!("ks x{} vs limit", i + 1), d, Relation::AtMost, KS_LIMIT));
                    self.report.ecdfs.push(EcdfPanel {
                        title: format!("X{}(T), n = {n}, against the reflected SDE", i + 1),
                        sets: vec![sim, lim.clone()],
                    });
                }
            }
        }
        self.violation_check();
        Ok(())
    }

    fn ssc(&mut self) -> Result<(), LabError> {
        let kind = self.cfg.pattern_kind()?;
        let sizes = sorted_sizes(self.cfg);
        let mut fractions = Vec::new();
        for &n in &sizes {
            let out = self.run_hw_batch(n, kind, VARIANT_SYSTEM)?;
            self.hw_rows(n, "", &out);
            let frac = out.iter().filter(|o| o.ssc > SSC_LEVEL).count() as f64 / out.len() as f64;
            self.report.push_stat(n, "ssc", "fraction_above_level", frac);
            if out.len() >= 2 {
                self.report.push_summary(n, &SampleSet::new("ssc", out.iter().map(|o| o.ssc).collect()))?;
            }
            fractions.push((n as f64, frac));
        }
        let last = fractions.last().unwrap().1;
        self.check(Check::new("ssc fraction above level", last, Relation::Below, SSC_FRACTION));
        let ys: Vec<f64> = fractions.iter().map(|p| p.1).collect();
        if ys.len() > 1 {
            self.check(Check::holds("ssc fraction decreasing", decreasing_to_zero(&ys)));
        }
        self.report.curves.push(CurvePanel {
            title: format!("fraction of runs with collapse deviation > {SSC_LEVEL}"),
            y_label: "fraction".into(),
            series: vec![("ssc".into(), fractions)],
        });
        self.violation_check();
        Ok(())
    }

    fn loss_decay(&mut self) -> Result<(), LabError> {
        let kind = self.cfg.pattern_kind()?;
        let spread = kind.spread_class();
        let label = format!("r{}", spread + 1);
        let mut runs = Vec::new();
        let mut off_batch = 0;
        for &n in &sorted_sizes(self.cfg) {
            let out = self.run_hw_batch(n, kind, VARIANT_SYSTEM)?;
            self.hw_rows(n, "", &out);
            off_batch += out.iter().map(|o| o.off_batch_losses).sum::<usize>();
            runs.push((n, SampleSet::new(label.clone(), out.iter().map(|o| o.r[spread]).collect())));
        }
        if self.cfg.replications >= 2 {
            let table = loss_decay_table(&runs)?;
            for (n, set) in &runs {
                self.report.push_summary(*n, set)?;
            }
            let last = table.rows.last().unwrap().mean;
            self.check(Check::holds("loss means decreasing", table.decreasing));
            self.check(Check::new("loss mean at largest n", last, Relation::Below, LOSS_MEAN));
            self.report.curves.push(CurvePanel {
                title: format!("mean scaled class-{} losses at T", spread + 1),
                y_label: "mean".into(),
                series: vec![(label, table.rows.iter().map(|r| (r.n as f64, r.mean)).collect())],
            });
        }
        self.check(Check::new("batch-class losses off batch epochs", off_batch as f64, Relation::Equal, 0.0));
        self.violation_check();
        Ok(())
    }

    fn conv_sources(&self, n: u64) -> Result<Vec<ArrivalSource>, LabError> {
        let cfg = self.cfg;
        let params = derive(&cfg.model, n, cfg.a, Regime::Conventional)?;
        match &cfg.source {
            Some(SourceSpec::Pattern) => Ok(vec![ArrivalSource::Pattern(Pattern::new(&params, cfg.pattern_kind()?)?)]),
            None => rate_sources(&SourceSpec::Poisson, &params.lambda_n),
            Some(spec) => rate_sources(spec, &params.lambda_n),
        }
    }

    fn conventional_limit(&mut self) -> Result<(), LabError> {
        let cfg = self.cfg;
        let shapes = service_shapes(&cfg.model)?;
        let consts = conv_limit_params(&cfg.model)?;
        let lp = ConvLimitParams::new(&consts, cfg.model.beta);
        for (stat, v) in [("alpha", consts.alpha), ("m_tilde", consts.m_tilde), ("a_tilde", consts.a_tilde)] {
            self.report.push_stat(0, "limit", stat, v);
        }
        let limit = self.workers.map(cfg.limit_paths(), |rep| {
            let seed = self.seed(VARIANT_LIMIT, 0, rep);
            Ok((seed, conv_limit_terminal(&lp, cfg.dt, cfg.horizon, &mut stream_rng(seed))?))
        })?;
        for (rep, (seed, v)) in limit.iter().enumerate() {
            self.raw(0, rep, "workload_limit", cfg.horizon, *v, *seed);
        }
        let limit_set = SampleSet::new("workload_limit", limit.iter().map(|p| p.1).collect());
        if limit_set.len() >= 2 {
            self.report.push_summary(0, &limit_set)?;
        }

        let grid = self.grid()?;
        let sizes = sorted_sizes(cfg);
        let last = *sizes.last().unwrap();
        let mut medians = Vec::new();
        for &n in &sizes {
            let conv_cfg = ConvConfig::from_model(&cfg.model, n, &shapes)?;
            let sources = self.conv_sources(n)?;
            let out = self.workers.map(cfg.replications, |rep| {
                let seed = self.seed(VARIANT_SYSTEM, n, rep);
                let mut rng = stream_rng(seed);
                let traj = run_conventional(&cfg.model, n, &shapes, sources.clone(), cfg.horizon, &mut rng)?;
                let scaled = conv_scale(&traj, &cfg.model, n, &grid)?;
                Ok(ConvOutcome {
                    seed,
                    workload: scaled.workload.terminal()[0],
                    x: scaled.x.terminal().to_vec(),
                    ssc: scaled.ssc,
                    verified: traj.verify(&conv_cfg).is_ok(),
                    path: (rep == 0).then_some(scaled.workload),
                })
            })?;
            self.report.invariant_violations += out.iter().filter(|o| !o.verified).count();
            for (rep, o) in out.iter().enumerate() {
                if let Some(path) = &o.path {
                    for (&s, v) in path.times().iter().zip(path.component(0)).take(path.len() - 1) {
                        self.raw(n, rep, "workload", s, v, o.seed);
                    }
                }
                self.raw(n, rep, "workload", cfg.horizon, o.workload, o.seed);
                for (i, v) in o.x.iter().enumerate() {
                    self.raw(n, rep, &format!("x{}", i + 1), cfg.horizon, *v, o.seed);
                }
                self.raw(n, rep, "ssc", cfg.horizon, o.ssc, o.seed);
            }
            if out.len() < 2 {
                continue;
            }
            let sim = SampleSet::new("workload", out.iter().map(|o| o.workload).collect());
            let ssc = SampleSet::new("ssc", out.iter().map(|o| o.ssc).collect());
            self.report.push_summary(n, &sim)?;
            self.report.push_summary(n, &ssc)?;
            medians.push((n as f64, summarize(&ssc)?.median()));
            let (d, _) = self.ks(n, &sim, &limit_set)?;
            if n == last {
                self.check(Check::new("ks workload vs limit", d, Relation::AtMost, KS_LIMIT));
                self.report.ecdfs.push(EcdfPanel {
                    title: format!("scaled workload at T, n = {n}, against reflected BM"),
                    sets: vec![sim, limit_set.clone()],
                });
            }
        }
        if medians.len() > 1 {
            let ys: Vec<f64> = medians.iter().map(|p| p.1).collect();
            self.check(Check::holds("collapse median decreasing", strictly_decreasing(&ys)));
            self.report.curves.push(CurvePanel {
                title: "median of max_ij sup_t |X_i - X_j|".into(),
                y_label: "median".into(),
                series: vec![("ssc".into(), medians)],
            });
        }
        self.violation_check();
        Ok(())
    }

    fn arrival_scaling(&mut self) -> Result<(), LabError> {
        let cfg = self.cfg;
        let kind = cfg.pattern_kind()?;
        let step = cfg.horizon / (cfg.grid_size - 1) as f64;
        let is_pattern = matches!(cfg.source, None | Some(SourceSpec::Pattern));
        let reps = if is_pattern { 1 } else { cfg.replications };
        let classes = cfg.model.num_classes();
        let mut clt: Vec<Vec<(f64, f64)>> = vec![Vec::new(); classes];
        for &n in &sorted_sizes(cfg) {
            let params = derive(&cfg.model, n, cfg.a, Regime::HalfinWhitt)?;
            let sources = match self.hw_arrivals(n, kind)? {
                HwArrivals::Pattern(k) => vec![ArrivalSource::Pattern(Pattern::new(&params, k)?); classes],
                HwArrivals::Sources(s) => s,
            };
            let out = self.workers.map(reps, |rep| {
                let seed = self.seed(VARIANT_SYSTEM, n, rep);
                let mut rng = stream_rng(seed);
                let devs = (0..classes)
                    .map(|i| {
                        scaling_check(
                            &sources[i],
                            i,
                            cfg.model.lambda[i],
                            params.lambda_n[i],
                            n,
                            cfg.horizon,
                            step,
                            &mut rng,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((seed, devs))
            })?;
            for (rep, (seed, devs)) in out.iter().enumerate() {
                for (i, d) in devs.iter().enumerate() {
                    self.raw(n, rep, &format!("lln{}", i + 1), cfg.horizon, d.lln, *seed);
                    self.raw(n, rep, &format!("clt{}", i + 1), cfg.horizon, d.clt, *seed);
                }
            }
            for i in 0..classes {
                let worst = out.iter().map(|(_, d)| d[i].clt).fold(0.0, f64::max);
                let lln = out.iter().map(|(_, d)| d[i].lln).fold(0.0, f64::max);
                self.report.push_stat(n, &format!("clt{}", i + 1), "max", worst);
                self.report.push_stat(n, &format!("lln{}", i + 1), "max", lln);
                clt[i].push((n as f64, worst));
            }
        }
        if is_pattern {
            for (i, series) in clt.iter().enumerate() {
                let ys: Vec<f64> = series.iter().map(|p| p.1).collect();
                if ys.len() > 1 {
                    self.check(Check::holds(format!("clt{} strictly decreasing", i + 1), strictly_decreasing(&ys)));
                }
                let within = series.iter().all(|&(n, d)| d <= n.powf(cfg.a - 0.5) + 2.0 / n.sqrt());
                self.check(Check::holds(format!("clt{} within n^(a-1/2) + 2/sqrt(n)", i + 1), within));
            }
        }
        self.report.curves.push(CurvePanel {
            title: "sup-grid CLT deviation of the arrival counts".into(),
            y_label: "deviation".into(),
            series: clt.into_iter().enumerate().map(|(i, s)| (format!("class {}", i + 1), s)).collect(),
        });
        Ok(())
    }

    fn skorohod_props(&mut self) -> Result<(), LabError> {
        let cfg = self.cfg;
        let len = cfg.grid_size;
        let out = self.workers.map(cfg.replications, |rep| {
            let seed = self.seed(VARIANT_SYSTEM, 0, rep);
            Ok((seed, skorohod_trial(&mut stream_rng(seed), cfg.horizon, len)?))
        })?;
        let mut worst = SkorohodTrial::default();
        for (rep, (seed, t)) in out.iter().enumerate() {
            self.raw(0, rep, "lipschitz_ratio", cfg.horizon, t.lipschitz, *seed);
            self.raw(0, rep, "modulus_ratio", cfg.horizon, t.modulus, *seed);
            self.raw(0, rep, "comparison_excess", cfg.horizon, t.comparison_excess, *seed);
            worst.lipschitz = worst.lipschitz.max(t.lipschitz);
            worst.modulus = worst.modulus.max(t.modulus);
            worst.comparison_excess = worst.comparison_excess.max(t.comparison_excess);
            worst.complementarity += t.complementarity;
        }
        self.report.push_stat(0, "lipschitz_ratio", "max", worst.lipschitz);
        self.report.push_stat(0, "modulus_ratio", "max", worst.modulus);
        self.report.push_stat(0, "comparison_excess", "max", worst.comparison_excess);
        self.report.push_stat(0, "complementarity", "violations", worst.complementarity as f64);
        self.check(Check::new("halfspace lipschitz ratio", worst.lipschitz, Relation::AtMost, HALFSPACE_C));
        self.check(Check::new("halfspace modulus ratio", worst.modulus, Relation::AtMost, HALFSPACE_C));
        self.check(Check::new("interval comparison excess", worst.comparison_excess, Relation::AtMost, 0.0));
        self.check(Check::new("complementarity violations", worst.complementarity as f64, Relation::Equal, 0.0));
        Ok(())
    }
}

/// One stream per class at the `n`-th system's rates.
fn rate_sources(spec: &SourceSpec, rates: &[f64]) -> Result<Vec<ArrivalSource>, LabError> {
    rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            Ok(match spec {
                SourceSpec::Poisson => ArrivalSource::poisson(i, rate)?,
                SourceSpec::Renewal { dist, scv, acceleration } => {
                    ArrivalSource::renewal_from_tag(i, dist, *scv, acceleration.unwrap_or(rate))?
                }
                SourceSpec::Pattern => unreachable!("pattern sources are not per-class"),
            })
        })
        .collect()
}

fn initial_point<R: Randomness + ?Sized>(law: &InitialLaw, classes: usize, rng: &mut R) -> Vec<f64> {
    match law {
        InitialLaw::Deterministic { value } if value.is_empty() => vec![0.0; classes],
        InitialLaw::Deterministic { value } => value.clone(),
        InitialLaw::Gaussian { mean, variance } => {
            mean.iter().zip(variance).map(|(m, v)| m + v.sqrt() * rng.standard_normal()).collect()
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct SkorohodTrial {
    lipschitz: f64,
    modulus: f64,
    /// `sup |G_a1 - G_a2| - (a2 - a1)`, positive only on a violation.
    comparison_excess: f64,
    complementarity: usize,
}

fn gaussian_walk(rng: &mut StreamRng, times: &[f64], dim: usize) -> Result<GridPath, LabError> {
    let scale = 1.0 / (times.len() as f64).sqrt();
    let mut cur = vec![0.0; dim];
    Ok(GridPath::from_fn(times.to_vec(), dim, |_, _, row| {
        for (c, v) in cur.iter_mut().zip(row.iter_mut()) {
            *c += scale * rng.standard_normal();
            *v = *c;
        }
    })?)
}

/// Walk on the lattice `2^-10 Z`, where the interval map is exact.
fn dyadic_walk(rng: &mut StreamRng, times: &[f64]) -> Result<GridPath, LabError> {
    let scale = 1024.0 / (times.len() as f64).sqrt();
    let mut cur = 0.0;
    let values = times
        .iter()
        .map(|_| {
            cur += (scale * rng.standard_normal()).round() / 1024.0;
            cur
        })
        .collect();
    Ok(GridPath::scalar(times.to_vec(), values)?)
}

fn skorohod_trial(rng: &mut StreamRng, horizon: f64, len: usize) -> Result<SkorohodTrial, LabError> {
    let times = uniform_grid(horizon, len)?;
    let f = gaussian_walk(rng, &times, 2)?;
    let g = gaussian_walk(rng, &times, 2)?;
    let beta = 0.5 * rng.uniform();
    let (yf, lf) = gamma_halfspace(&f, beta, 0)?;
    let (yg, lg) = gamma_halfspace(&g, beta, 0)?;
    let input = f.sup_distance(&g)?;
    let lipschitz = if input > 0.0 { yf.sup_distance(&yg)? / input } else { 0.0 };
    let modulus = [horizon / 8.0, horizon / 4.0]
        .iter()
        .map(|&th| {
            let w = f.modulus(th);
            if w > 0.0 {
                yf.modulus(th) / w
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);

    let mut complementarity = 0;
    for (y, l) in [(&yf, &lf), (&yg, &lg)] {
        for j in 0..y.len() {
            let s: f64 = y.value(j).iter().sum();
            let grew = l.value(j)[0] > if j == 0 { 0.0 } else { l.value(j - 1)[0] };
            if s > beta + BOUNDARY_SLACK || (grew && (s - beta).abs() > BOUNDARY_SLACK) {
                complementarity += 1;
            }
        }
    }

    let psi = dyadic_walk(rng, &times)?;
    let draw = |rng: &mut StreamRng| ((rng.uniform() * 64.0).floor() + 1.0) / 64.0;
    let (mut a1, mut a2) = (draw(rng), draw(rng));
    if a1 > a2 {
        std::mem::swap(&mut a1, &mut a2);
    }
    let gap = gamma_interval(&psi, a1)?.sup_distance(&gamma_interval(&psi, a2)?)?;
    let comparison_excess = gap - (a2 - a1);

    let r = gamma_interval_regulated(&psi, a2)?;
    for j in 0..psi.len() {
        let phi = r.phi.value(j)[0];
        let prev = |p: &GridPath| if j == 0 { 0.0 } else { p.value(j - 1)[0] };
        let (dl, du) = (r.lower.value(j)[0] - prev(&r.lower), r.upper.value(j)[0] - prev(&r.upper));
        if !(0.0..=a2).contains(&phi) || dl < 0.0 || du < 0.0 || (dl > 0.0 && phi != 0.0) || (du > 0.0 && phi != a2) {
            complementarity += 1;
        }
    }
    Ok(SkorohodTrial { lipschitz, modulus, comparison_excess, complementarity })
}
