//! Single-server, `N`-class system in conventional heavy traffic.
//!
//! The server is non-idling and non-preemptive: it finishes the job in hand,
//! then starts the head of the longest queue. Class `i` jobs take i.i.d. times
//! with mean `1 / (n mu_n[i])`. An arrival is lost when its class already has
//! `buffers[i]` customers in the system.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::arrivals::{ArrivalPlan, ArrivalSource};
use crate::distribution::TimeDistribution;
use crate::model::{derive, slq_select, ModelData, Regime};
use crate::rng::Randomness;
use crate::{Error, Result};

/// Relative slack allowed when comparing accumulated busy time to the clock.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvConfig {
    /// Per-class service laws, already at their `n`-th system means.
    pub service: Vec<TimeDistribution>,
    /// Per-class caps on the number in system.
    pub buffers: Vec<u64>,
}

impl ConvConfig {
    /// Rescales the shapes in `dists` to mean `1 / (n mu_n[i])` and takes the
    /// conventional buffers of the `n`-th system.
    pub fn from_model(model: &ModelData, n: u64, dists: &[TimeDistribution]) -> Result<Self> {
        let params = derive(model, n, 0.25, Regime::Conventional)?;
        if dists.len() != params.num_classes() {
            return Err(Error::InvalidParameter(format!(
                "{} service laws for {} classes",
                dists.len(),
                params.num_classes()
            )));
        }
        let service = dists
            .iter()
            .zip(&params.mu_n)
            .map(|(d, mu)| d.with_mean(1.0 / (n as f64 * mu)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConvConfig { service, buffers: params.buffers })
    }

    pub fn num_classes(&self) -> usize {
        self.service.len()
    }
}

/// Service shapes matching the model's `gamma_sq`: deterministic at 0,
/// exponential at 1, gamma otherwise.
pub fn service_shapes(model: &ModelData) -> Result<Vec<TimeDistribution>> {
    model.gamma_sq.iter().map(|&g| TimeDistribution::for_scv(1.0, g)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvState {
    pub t: f64,
    pub x: Vec<u64>,
    pub in_service: Option<usize>,
    /// Completion time of the job in service.
    pub completes_at: f64,
    /// Cumulative time spent serving each class.
    pub busy_time: Vec<f64>,
    pub e: Vec<u64>,
    pub r: Vec<u64>,
    pub d: Vec<u64>,
}

impl ConvState {
    pub fn empty(classes: usize) -> Self {
        ConvState {
            t: 0.0,
            x: vec![0; classes],
            in_service: None,
            completes_at: f64::INFINITY,
            busy_time: vec![0.0; classes],
            e: vec![0; classes],
            r: vec![0; classes],
            d: vec![0; classes],
        }
    }

    pub fn idle_time(&self) -> f64 {
        self.t - self.busy_time.iter().sum::<f64>()
    }

    /// Moves the clock to `t`, charging elapsed time to the class in service.
    fn advance(&mut self, t: f64) {
        if let Some(i) = self.in_service {
            self.busy_time[i] += t - self.t;
        }
        self.t = t;
    }

    fn start<R: Randomness + ?Sized>(&mut self, class: usize, cfg: &ConvConfig, rng: &mut R) {
        self.in_service = Some(class);
        self.completes_at = self.t + cfg.service[class].sample(rng);
    }

    pub fn check(&self, cfg: &ConvConfig) -> Result<()> {
        check_row(self.t, &self.x, self.in_service, &self.busy_time, &self.e, &self.r, &self.d, cfg)
    }
}

#[allow(clippy::too_many_arguments)]
fn check_row(
    t: f64,
    x: &[u64],
    in_service: Option<usize>,
    busy: &[f64],
    e: &[u64],
    r: &[u64],
    d: &[u64],
    cfg: &ConvConfig,
) -> Result<()> {
    let fail = |what: String| Err(Error::InvariantViolation { time: t, what });
    for i in 0..x.len() {
        if x[i] > cfg.buffers[i] {
            return fail(format!("class {i} has {} > {} in system", x[i], cfg.buffers[i]));
        }
        if x[i] + d[i] + r[i] != e[i] {
            return fail(format!("balance fails for class {i}"));
        }
    }
    match in_service {
        None if x.iter().any(|&v| v > 0) => return fail("server idles with customers present".into()),
        Some(i) if x[i] == 0 => return fail(format!("serving empty class {i}")),
        _ => {}
    }
    let total: f64 = busy.iter().sum();
    if total > t * (1.0 + TIME_SLACK) + TIME_SLACK {
        return fail(format!("busy time {total} exceeds clock"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvEvent {
    Arrival { class: usize },
    Completion { class: usize },
}

/// Read-only view of one logged state.
#[derive(Debug, Clone, Copy)]
pub struct ConvSnapshot<'a> {
    pub t: f64,
    counts: &'a [u64],
    pub busy_time: &'a [f64],
    pub in_service: Option<usize>,
}

impl<'a> ConvSnapshot<'a> {
    fn part(&self, k: usize) -> &'a [u64] {
        let n = self.busy_time.len();
        &self.counts[k * n..(k + 1) * n]
    }
    pub fn x(&self) -> &'a [u64] {
        self.part(0)
    }
    pub fn e(&self) -> &'a [u64] {
        self.part(1)
    }
    pub fn r(&self) -> &'a [u64] {
        self.part(2)
    }
    pub fn d(&self) -> &'a [u64] {
        self.part(3)
    }
    pub fn idle_time(&self) -> f64 {
        self.t - self.busy_time.iter().sum::<f64>()
    }
}

/// Event log of one run; snapshot 0 is the empty initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTrajectory {
    classes: usize,
    horizon: f64,
    times: Vec<f64>,
    events: Vec<ConvEvent>,
    counts: Vec<u64>,
    busy: Vec<f64>,
    serving: Vec<Option<usize>>,
}

impl ConvTrajectory {
    fn start(state: &ConvState, horizon: f64) -> Self {
        let mut t = ConvTrajectory {
            classes: state.x.len(),
            horizon,
            times: Vec::new(),
            events: Vec::new(),
            counts: Vec::new(),
            busy: Vec::new(),
            serving: Vec::new(),
        };
        t.push(state);
        t
    }

    fn push(&mut self, s: &ConvState) {
        for part in [&s.x, &s.e, &s.r, &s.d] {
            self.counts.extend_from_slice(part);
        }
        self.busy.extend_from_slice(&s.busy_time);
        self.serving.push(s.in_service);
    }

    fn record(&mut self, event: ConvEvent, s: &ConvState) {
        self.times.push(s.t);
        self.events.push(event);
        self.push(s);
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn event(&self, i: usize) -> (f64, ConvEvent) {
        (self.times[i], self.events[i])
    }

    pub fn snapshot(&self, i: usize) -> ConvSnapshot<'_> {
        let n = self.classes;
        ConvSnapshot {
            t: if i == 0 { 0.0 } else { self.times[i - 1] },
            counts: &self.counts[4 * n * i..4 * n * (i + 1)],
            busy_time: &self.busy[n * i..n * (i + 1)],
            in_service: self.serving[i],
        }
    }

    /// Right-continuous state at `t`. Counts are exact; `busy_time` is as of
    /// the last event at or before `t`.
    pub fn state_at(&self, t: f64) -> ConvSnapshot<'_> {
        self.snapshot(self.times.partition_point(|&s| s <= t))
    }

    pub fn terminal(&self) -> ConvSnapshot<'_> {
        self.snapshot(self.events.len())
    }

    /// Re-checks every logged state, plus: idle time never decreases and
    /// grows only while the system is empty, and losses happen only at
    /// arrivals that find their class at its cap.
    pub fn verify(&self, cfg: &ConvConfig) -> Result<()> {
        for i in 0..=self.events.len() {
            let s = self.snapshot(i);
            check_row(s.t, s.x(), s.in_service, s.busy_time, s.e(), s.r(), s.d(), cfg)?;
            if i == 0 {
                continue;
            }
            let p = self.snapshot(i - 1);
            let fail = |what: &str| Err(Error::InvariantViolation { time: s.t, what: what.into() });
            if s.t < p.t {
                return fail("event times out of order");
            }
            let grew = s.idle_time() - p.idle_time();
            let slack = TIME_SLACK * s.t.max(1.0);
            if grew < -slack {
                return fail("idle time decreased");
            }
            if grew > slack && p.x().iter().any(|&v| v > 0) {
                return fail("idle time grew while customers were present");
            }
            for c in 0..self.classes {
                if s.r()[c] > p.r()[c] {
                    let at_cap = p.x()[c] == cfg.buffers[c];
                    if !(at_cap && self.events[i - 1] == (ConvEvent::Arrival { class: c })) {
                        return fail("loss without a full buffer");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs an initially empty system until `horizon`. Completions are processed
/// before arrivals scheduled at the same instant.
pub fn simulate_conventional<R: Randomness + ?Sized>(
    cfg: &ConvConfig,
    sources: Vec<ArrivalSource>,
    horizon: f64,
    rng: &mut R,
) -> Result<ConvTrajectory> {
    let mut state = ConvState::empty(cfg.num_classes());
    let mut plan = ArrivalPlan::new(sources);
    let mut traj = ConvTrajectory::start(&state, horizon);
    loop {
        let arrival = plan.peek(rng);
        let event = match arrival {
            Some(a) if a.time < state.completes_at && a.time <= horizon => {
                plan.pop(rng);
                if a.class >= cfg.num_classes() {
                    return Err(Error::InvalidParameter(format!("no class {}", a.class)));
                }
                state.advance(a.time);
                for _ in 0..a.multiplicity {
                    state.e[a.class] += 1;
                    if state.x[a.class] < cfg.buffers[a.class] {
                        state.x[a.class] += 1;
                        if state.in_service.is_none() {
                            state.start(a.class, cfg, rng);
                        }
                    } else {
                        state.r[a.class] += 1;
                    }
                }
                ConvEvent::Arrival { class: a.class }
            }
            _ if state.completes_at <= horizon => {
                let class = state.in_service.expect("finite completion implies a job in service");
                state.advance(state.completes_at);
                state.x[class] -= 1;
                state.d[class] += 1;
                state.in_service = None;
                state.completes_at = f64::INFINITY;
                if let Some(next) = slq_select(&state.x, rng.uniform()) {
                    state.start(next, cfg, rng);
                }
                ConvEvent::Completion { class }
            }
            _ => break,
        };
        state.check(cfg)?;
        traj.record(event, &state);
    }
    Ok(traj)
}

/// One replication of the `n`-th conventional system.
pub fn run_conventional<R: Randomness + ?Sized>(
    model: &ModelData,
    n: u64,
    dists: &[TimeDistribution],
    sources: Vec<ArrivalSource>,
    horizon: f64,
    rng: &mut R,
) -> Result<ConvTrajectory> {
    let cfg = ConvConfig::from_model(model, n, dists)?;
    simulate_conventional(&cfg, sources, horizon, rng)
}

/// Parameters of the one-dimensional limit: `alpha = (sum 1/mu_i)^{-1}`,
/// drift `m_tilde = alpha sum lambda_hat_i / mu_i` and variance
/// `A_tilde = alpha^2 sum (lambda_i / mu_i^2)(sigma_i^2 + gamma_i^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvLimitConstants {
    pub alpha: f64,
    pub m_tilde: f64,
    pub a_tilde: f64,
}

pub fn conv_limit_params(model: &ModelData) -> Result<ConvLimitConstants> {
    model.validate().into_result()?;
    let alpha = 1.0 / model.mu.iter().map(|m| 1.0 / m).sum::<f64>();
    let m_tilde = alpha * model.lambda_hat.iter().zip(&model.mu).map(|(l, m)| l / m).sum::<f64>();
    let a_tilde = alpha
        * alpha
        * (0..model.num_classes())
            .map(|i| model.lambda[i] / (model.mu[i] * model.mu[i]) * (model.sigma_sq[i] + model.gamma_sq[i]))
            .sum::<f64>();
    Ok(ConvLimitConstants { alpha, m_tilde, a_tilde })
}
