//! The `n`-server, `N`-class system under SLQ with equal finite buffers.
//!
//! Arrivals enter service when a server is free, otherwise wait in their
//! class buffer if it holds fewer than `buffer` customers, and are lost
//! otherwise. A freed server takes the head of the longest buffer.
//!
//! Service is exponential with class rate `mu_n[i]`. Instead of one clock per
//! server the simulator draws the time to the next departure as an exponential
//! with rate `sum_i mu_n[i] psi[i]` and picks the class in proportion to
//! `mu_n[i] psi[i]`; the draw is discarded and redrawn after every event.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::arrivals::{ArrivalPlan, ArrivalSource, Pattern, PatternKind};
use crate::model::{derive, slq_select, DerivedParams, InitialLaw, ModelData, Regime};
use crate::rng::Randomness;
use crate::{Error, Result};

/// Server pool, service rates and the common buffer size.
#[derive(Debug, Clone, PartialEq)]
pub struct HwConfig {
    pub servers: u64,
    pub service_rates: Vec<f64>,
    pub buffer: u64,
}

impl HwConfig {
    pub fn from_params(params: &DerivedParams) -> Self {
        HwConfig {
            servers: params.n,
            service_rates: params.mu_n.clone(),
            buffer: params.buffers[0],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.service_rates.len()
    }
}

/// Queue contents and cumulative counters.
///
/// `b` counts every entry into service, whether straight from an arrival or
/// from a buffer, so that `q = q0 + e - b - r` and `psi = psi0 + b - d`.
#[derive(Debug, Clone, PartialEq)]
pub struct HwState {
    pub t: f64,
    pub q: Vec<u64>,
    pub psi: Vec<u64>,
    pub q0: Vec<u64>,
    pub psi0: Vec<u64>,
    pub e: Vec<u64>,
    pub b: Vec<u64>,
    pub r: Vec<u64>,
    pub d: Vec<u64>,
}

impl HwState {
    /// Empty buffers with `psi0` customers in service.
    pub fn new(psi0: Vec<u64>) -> Self {
        let n = psi0.len();
        Self::with_queues(vec![0; n], psi0)
    }

    pub fn with_queues(q0: Vec<u64>, psi0: Vec<u64>) -> Self {
        let n = psi0.len();
        HwState {
            t: 0.0,
            q: q0.clone(),
            psi: psi0.clone(),
            q0,
            psi0,
            e: vec![0; n],
            b: vec![0; n],
            r: vec![0; n],
            d: vec![0; n],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.q.len()
    }

    pub fn busy(&self) -> u64 {
        self.psi.iter().sum()
    }

    pub fn queued(&self) -> u64 {
        self.q.iter().sum()
    }

    pub fn x(&self, class: usize) -> u64 {
        self.q[class] + self.psi[class]
    }

    /// Buffer cap, server capacity, non-idling and both balance equations.
    pub fn check(&self, cfg: &HwConfig) -> Result<()> {
        check_row(self.t, &self.q, &self.psi, &self.q0, &self.psi0, &self.e, &self.b, &self.r, &self.d, cfg)
    }
}

#[allow(clippy::too_many_arguments)]
fn check_row(
    t: f64,
    q: &[u64],
    psi: &[u64],
    q0: &[u64],
    psi0: &[u64],
    e: &[u64],
    b: &[u64],
    r: &[u64],
    d: &[u64],
    cfg: &HwConfig,
) -> Result<()> {
    let fail = |what: String| Err(Error::InvariantViolation { time: t, what });
    let busy: u64 = psi.iter().sum();
    if busy > cfg.servers {
        return fail(format!("{busy} customers in service with {} servers", cfg.servers));
    }
    if q.iter().any(|&x| x > 0) && busy != cfg.servers {
        return fail(format!("idle server while buffers hold {q:?}"));
    }
    for i in 0..q.len() {
        if q[i] > cfg.buffer {
            return fail(format!("buffer {i} holds {} > {}", q[i], cfg.buffer));
        }
        if q[i] + b[i] + r[i] != q0[i] + e[i] {
            return fail(format!("queue balance fails for class {i}"));
        }
        if psi[i] + d[i] != psi0[i] + b[i] {
            return fail(format!("service balance fails for class {i}"));
        }
    }
    Ok(())
}

/// Admits `multiplicity` simultaneous class arrivals one at a time.
pub fn handle_arrival(state: &mut HwState, class: usize, multiplicity: u64, cfg: &HwConfig) -> Result<()> {
    if class >= state.num_classes() {
        return Err(Error::InvalidParameter(format!("no class {class}")));
    }
    for _ in 0..multiplicity {
        if state.busy() < cfg.servers {
            state.psi[class] += 1;
            state.b[class] += 1;
        } else if state.q[class] < cfg.buffer {
            state.q[class] += 1;
        } else {
            state.r[class] += 1;
        }
    }
    state.e[class] += multiplicity;
    Ok(())
}

/// Completes one class service and lets the freed server take the head of
/// the longest buffer. A uniform is drawn only when some buffer is non-empty.
pub fn handle_departure<R: Randomness + ?Sized>(
    state: &mut HwState,
    class: usize,
    cfg: &HwConfig,
    rng: &mut R,
) -> Result<()> {
    let _ = cfg;
    if state.psi.get(class).copied().unwrap_or(0) == 0 {
        return Err(Error::NoSuchCustomer(class));
    }
    state.psi[class] -= 1;
    state.d[class] += 1;
    if state.queued() > 0 {
        if let Some(j) = slq_select(&state.q, rng.uniform()) {
            state.q[j] -= 1;
            state.psi[j] += 1;
            state.b[j] += 1;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HwEvent {
    Arrival { class: usize, multiplicity: u64 },
    Departure { class: usize },
}

/// Read-only view of one logged state.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    row: &'a [u64],
    classes: usize,
}

impl<'a> Snapshot<'a> {
    fn part(&self, k: usize) -> &'a [u64] {
        &self.row[k * self.classes..(k + 1) * self.classes]
    }
    pub fn q(&self) -> &'a [u64] {
        self.part(0)
    }
    pub fn psi(&self) -> &'a [u64] {
        self.part(1)
    }
    pub fn e(&self) -> &'a [u64] {
        self.part(2)
    }
    pub fn b(&self) -> &'a [u64] {
        self.part(3)
    }
    pub fn r(&self) -> &'a [u64] {
        self.part(4)
    }
    pub fn d(&self) -> &'a [u64] {
        self.part(5)
    }
    pub fn x(&self, class: usize) -> u64 {
        self.q()[class] + self.psi()[class]
    }
}

const PARTS: usize = 6;

/// Full event log of one run. Snapshot 0 is the initial state; snapshot `i`
/// is the state right after event `i - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HwTrajectory {
    classes: usize,
    horizon: f64,
    q0: Vec<u64>,
    psi0: Vec<u64>,
    times: Vec<f64>,
    events: Vec<HwEvent>,
    rows: Vec<u64>,
}

impl HwTrajectory {
    fn start(state: &HwState, horizon: f64) -> Self {
        let mut t = HwTrajectory {
            classes: state.num_classes(),
            horizon,
            q0: state.q0.clone(),
            psi0: state.psi0.clone(),
            times: Vec::new(),
            events: Vec::new(),
            rows: Vec::new(),
        };
        t.push_row(state);
        t
    }

    fn push_row(&mut self, s: &HwState) {
        for part in [&s.q, &s.psi, &s.e, &s.b, &s.r, &s.d] {
            self.rows.extend_from_slice(part);
        }
    }

    fn record(&mut self, event: HwEvent, s: &HwState) {
        self.times.push(s.t);
        self.events.push(event);
        self.push_row(s);
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial_in_service(&self) -> &[u64] {
        &self.psi0
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn event(&self, i: usize) -> (f64, HwEvent) {
        (self.times[i], self.events[i])
    }

    pub fn event_times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshot(&self, i: usize) -> Snapshot<'_> {
        let w = PARTS * self.classes;
        Snapshot { row: &self.rows[i * w..(i + 1) * w], classes: self.classes }
    }

    /// Right-continuous state at `t`.
    pub fn state_at(&self, t: f64) -> Snapshot<'_> {
        self.snapshot(self.times.partition_point(|&s| s <= t))
    }

    pub fn terminal(&self) -> Snapshot<'_> {
        self.snapshot(self.events.len())
    }

    /// Times at which a class customer was lost.
    pub fn loss_times(&self, class: usize) -> Vec<f64> {
        (0..self.events.len())
            .filter(|&i| self.snapshot(i + 1).r()[class] > self.snapshot(i).r()[class])
            .map(|i| self.times[i])
            .collect()
    }

    /// Re-checks every logged state: invariants, ordering, and that each event
    /// changes only the counters it should.
    pub fn verify(&self, cfg: &HwConfig) -> Result<()> {
        let n = self.classes;
        let mut last = 0.0;
        for i in 0..=self.events.len() {
            let t = if i == 0 { 0.0 } else { self.times[i - 1] };
            if t < last || t > self.horizon {
                return Err(Error::InvariantViolation { time: t, what: "event times out of order".into() });
            }
            last = t;
            let s = self.snapshot(i);
            check_row(t, s.q(), s.psi(), &self.q0, &self.psi0, s.e(), s.b(), s.r(), s.d(), cfg)?;
            if i == 0 {
                continue;
            }
            let p = self.snapshot(i - 1);
            let (de, dd): (u64, u64) = (0..n).fold((0, 0), |(a, b), c| {
                (a + s.e()[c] - p.e()[c], b + s.d()[c] - p.d()[c])
            });
            let ok = match self.events[i - 1] {
                HwEvent::Arrival { class, multiplicity } => {
                    de == multiplicity && s.e()[class] - p.e()[class] == multiplicity && dd == 0
                }
                HwEvent::Departure { class } => de == 0 && dd == 1 && s.d()[class] == p.d()[class] + 1,
            };
            if !ok {
                return Err(Error::InvariantViolation { time: t, what: "event/counter mismatch".into() });
            }
        }
        Ok(())
    }
}

/// Runs the system from `state` until `horizon`.
pub fn simulate_hw<R: Randomness + ?Sized>(
    cfg: &HwConfig,
    mut state: HwState,
    sources: Vec<ArrivalSource>,
    horizon: f64,
    rng: &mut R,
) -> Result<HwTrajectory> {
    if cfg.service_rates.len() != state.num_classes() {
        return Err(Error::InvalidParameter("class count mismatch".into()));
    }
    state.check(cfg)?;
    let mut plan = ArrivalPlan::new(sources);
    let mut traj = HwTrajectory::start(&state, horizon);

    loop {
        let total: f64 = cfg.service_rates.iter().zip(&state.psi).map(|(m, &p)| m * p as f64).sum();
        let departure = if total > 0.0 { state.t + rng.exponential(total) } else { f64::INFINITY };
        let arrival = plan.peek(rng);

        let event = match arrival {
            Some(a) if a.time <= departure && a.time <= horizon => {
                plan.pop(rng);
                state.t = a.time;
                handle_arrival(&mut state, a.class, a.multiplicity, cfg)?;
                HwEvent::Arrival { class: a.class, multiplicity: a.multiplicity }
            }
            _ if departure <= horizon => {
                state.t = departure;
                let class = pick_class(&cfg.service_rates, &state.psi, total, rng);
                handle_departure(&mut state, class, cfg, rng)?;
                HwEvent::Departure { class }
            }
            _ => break,
        };
        state.check(cfg)?;
        traj.record(event, &state);
    }
    Ok(traj)
}

fn pick_class<R: Randomness + ?Sized>(rates: &[f64], psi: &[u64], total: f64, rng: &mut R) -> usize {
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, (m, &p)) in rates.iter().zip(psi).enumerate() {
        if p == 0 {
            continue;
        }
        acc += m * p as f64;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

/// Initial occupancy of the servers: `round(n rho_i + sqrt(n) x0_i)` clamped to
/// `[0, n]`, scaled down proportionally if the total exceeds `n`.
pub fn initial_in_service<R: Randomness + ?Sized>(
    model: &ModelData,
    params: &DerivedParams,
    rng: &mut R,
) -> Vec<u64> {
    let nf = params.n as f64;
    let sn = params.sqrt_n();
    let classes = params.num_classes();
    let x0: Vec<f64> = match &model.initial {
        InitialLaw::Deterministic { value } if value.is_empty() => vec![0.0; classes],
        InitialLaw::Deterministic { value } => value.clone(),
        InitialLaw::Gaussian { mean, variance } => mean
            .iter()
            .zip(variance)
            .map(|(m, v)| m + libm::sqrt(*v) * rng.standard_normal())
            .collect(),
    };
    let raw: Vec<u64> = params
        .rho
        .iter()
        .zip(&x0)
        .map(|(r, x)| libm::round(nf * r + sn * x).clamp(0.0, nf) as u64)
        .collect();
    let total: u64 = raw.iter().sum();
    if total <= params.n {
        return raw;
    }
    raw.iter()
        .map(|&v| ((v as u128 * params.n as u128) / total as u128) as u64)
        .collect()
}

/// Arrival model of a Halfin–Whitt run.
#[derive(Debug, Clone, PartialEq)]
pub enum HwArrivals {
    /// The deterministic pattern whose batch class is `k`.
    Pattern(PatternKind),
    Sources(Vec<ArrivalSource>),
}

/// One replication of the `n`-th system on `[0, horizon]`, starting with empty
/// buffers and servers filled from the initial law.
pub fn run_hw<R: Randomness + ?Sized>(
    model: &ModelData,
    n: u64,
    a: f64,
    arrivals: &HwArrivals,
    horizon: f64,
    rng: &mut R,
) -> Result<HwTrajectory> {
    let params = derive(model, n, a, Regime::HalfinWhitt)?;
    let cfg = HwConfig::from_params(&params);
    let sources = match arrivals {
        HwArrivals::Pattern(kind) => vec![ArrivalSource::Pattern(Pattern::new(&params, *kind)?)],
        HwArrivals::Sources(s) => s.clone(),
    };
    let psi0 = initial_in_service(model, &params, rng);
    simulate_hw(&cfg, HwState::new(psi0), sources, horizon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::ArrivalEvent;
    use crate::rng::stream_rng;

    /// Replays fixed uniforms and exponential variates.
    struct Scripted {
        uniforms: Vec<f64>,
        exps: Vec<f64>,
    }

    impl Randomness for Scripted {
        fn uniform(&mut self) -> f64 {
            if self.uniforms.is_empty() { 0.0 } else { self.uniforms.remove(0) }
        }
        fn exponential(&mut self, _rate: f64) -> f64 {
            if self.exps.is_empty() { f64::INFINITY } else { self.exps.remove(0) }
        }
        fn standard_normal(&mut self) -> f64 {
            0.0
        }
        fn gamma(&mut self, _: f64, _: f64) -> f64 {
            unimplemented!()
        }
    }

    fn cfg(servers: u64, buffer: u64) -> HwConfig {
        HwConfig { servers, service_rates: vec![2.0, 2.0], buffer }
    }

    #[test]
    fn batch_arrival_trace() {
        let c = cfg(1, 1);
        let mut s = HwState::new(vec![0, 0]);
        handle_arrival(&mut s, 0, 3, &c).unwrap();
        assert_eq!(s.psi, vec![1, 0]);
        assert_eq!(s.q, vec![1, 0]);
        assert_eq!(s.r, vec![1, 0]);
        assert_eq!(s.b, vec![1, 0]);
        assert_eq!(s.e, vec![3, 0]);
        s.check(&c).unwrap();
    }

    #[test]
    fn free_server_and_full_buffer() {
        let c = cfg(2, 3);
        let mut s = HwState::new(vec![1, 0]);
        handle_arrival(&mut s, 1, 1, &c).unwrap();
        assert_eq!(s.psi, vec![1, 1]);
        assert_eq!(s.b, vec![0, 1]);

        let mut s = HwState::with_queues(vec![0, 3], vec![1, 1]);
        handle_arrival(&mut s, 1, 1, &c).unwrap();
        assert_eq!(s.r, vec![0, 1]);
        assert_eq!(s.q, vec![0, 3]);
        s.check(&c).unwrap();
    }

    #[test]
    fn departure_serves_longest_queue() {
        let c = HwConfig { servers: 3, service_rates: vec![2.0, 2.0], buffer: 5 };
        let mut s = HwState::with_queues(vec![3, 1], vec![2, 1]);
        let mut rng = Scripted { uniforms: vec![0.9], exps: vec![] };
        handle_departure(&mut s, 1, &c, &mut rng).unwrap();
        assert_eq!(s.psi, vec![3, 0]);
        assert_eq!(s.q, vec![2, 1]);
        s.check(&c).unwrap();
    }

    #[test]
    fn departure_without_queue() {
        let c = cfg(1, 1);
        let mut s = HwState::new(vec![1, 0]);
        handle_departure(&mut s, 0, &c, &mut stream_rng(0)).unwrap();
        assert_eq!(s.psi, vec![0, 0]);
        assert_eq!(s.b, vec![0, 0]);
        assert_eq!(s.d, vec![1, 0]);
        assert_eq!(handle_departure(&mut s, 0, &c, &mut stream_rng(0)), Err(Error::NoSuchCustomer(0)));
    }

    #[test]
    fn departure_tie_break() {
        let c = cfg(2, 5);
        let mut s = HwState::with_queues(vec![2, 2], vec![1, 1]);
        let mut rng = Scripted { uniforms: vec![0.1], exps: vec![] };
        handle_departure(&mut s, 1, &c, &mut rng).unwrap();
        assert_eq!(s.q, vec![1, 2]);
        assert_eq!(s.psi, vec![2, 0]);
    }

    #[test]
    fn null_system_stays_empty() {
        let c = cfg(5, 2);
        let src = ArrivalSource::poisson(0, 0.0).unwrap();
        let t = simulate_hw(&c, HwState::new(vec![0, 0]), vec![src], 10.0, &mut stream_rng(1)).unwrap();
        assert_eq!(t.num_events(), 0);
        let s = t.terminal();
        assert!(s.q().iter().chain(s.psi()).chain(s.e()).chain(s.d()).all(|&v| v == 0));
    }

    #[test]
    fn scripted_service_time() {
        let c = HwConfig { servers: 1, service_rates: vec![2.0, 2.0], buffer: 1 };
        let src = ArrivalSource::scripted(vec![ArrivalEvent { time: 0.5, class: 0, multiplicity: 1 }]).unwrap();
        let mut rng = Scripted { uniforms: vec![], exps: vec![0.2] };
        let t = simulate_hw(&c, HwState::new(vec![0, 0]), vec![src], 1.0, &mut rng).unwrap();
        assert_eq!(t.num_events(), 2);
        assert_eq!(t.event(1), (0.7, HwEvent::Departure { class: 0 }));
        assert_eq!(t.state_at(1.0).d(), &[1, 0]);
        assert_eq!(t.state_at(0.69).d(), &[0, 0]);
        t.verify(&c).unwrap();
    }

    #[test]
    fn symmetric_run_keeps_invariants() {
        let model = ModelData::symmetric_pair(1.0);
        for k in [PatternKind::K1, PatternKind::K2] {
            let t = run_hw(&model, 400, 0.3, &HwArrivals::Pattern(k), 1.0, &mut stream_rng(5)).unwrap();
            let p = derive(&model, 400, 0.3, Regime::HalfinWhitt).unwrap();
            t.verify(&HwConfig::from_params(&p)).unwrap();
            assert!(t.num_events() > 1000);
            // conservation
            let s = t.terminal();
            for i in 0..2 {
                assert_eq!(s.e()[i] + t.initial_in_service()[i], s.q()[i] + s.psi()[i] + s.r()[i] + s.d()[i]);
            }
        }
    }

    #[test]
    fn batch_class_losses_only_at_batch_times() {
        let model = ModelData::symmetric_pair(0.5);
        let p = derive(&model, 400, 0.3, Regime::HalfinWhitt).unwrap();
        let pat = Pattern::new(&p, PatternKind::K1).unwrap();
        let mut losses = 0;
        for seed in 0..20 {
            let t = run_hw(&model, 400, 0.3, &HwArrivals::Pattern(PatternKind::K1), 1.0, &mut stream_rng(seed)).unwrap();
            for at in t.loss_times(0) {
                assert!(pat.is_batch_time(at), "loss at {at}");
                losses += 1;
            }
        }
        assert!(losses > 0, "expected some class-1 losses at n=400");
    }

    #[test]
    fn replay_is_bit_identical() {
        let model = ModelData::symmetric_pair(0.5);
        let arr = HwArrivals::Pattern(PatternKind::K2);
        let a = run_hw(&model, 900, 0.3, &arr, 1.0, &mut stream_rng(9)).unwrap();
        let b = run_hw(&model, 900, 0.3, &arr, 1.0, &mut stream_rng(9)).unwrap();
        assert_eq!(a, b);
        let bits = |t: &HwTrajectory| t.event_times().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn initial_occupancy() {
        let mut model = ModelData::symmetric_pair(1.0);
        let p = derive(&model, 400, 0.3, Regime::HalfinWhitt).unwrap();
        assert_eq!(initial_in_service(&model, &p, &mut stream_rng(0)), vec![200, 200]);
        // 220 + 190 > 400, so both shrink by 400/410.
        model.initial = InitialLaw::Deterministic { value: vec![1.0, -0.5] };
        assert_eq!(initial_in_service(&model, &p, &mut stream_rng(0)), vec![214, 185]);
        model.initial = InitialLaw::Deterministic { value: vec![-1.0, -0.5] };
        assert_eq!(initial_in_service(&model, &p, &mut stream_rng(0)), vec![180, 190]);
        model.initial = InitialLaw::Gaussian { mean: vec![0.0, 0.0], variance: vec![1.0, 1.0] };
        let v = initial_in_service(&model, &p, &mut stream_rng(0));
        assert!(v.iter().sum::<u64>() <= 400);
    }

    #[test]
    fn poisson_arrivals_run() {
        let model = ModelData::symmetric_pair(1.0);
        let srcs = vec![ArrivalSource::poisson(0, 400.0).unwrap(), ArrivalSource::poisson(1, 400.0).unwrap()];
        let t = run_hw(&model, 400, 0.3, &HwArrivals::Sources(srcs), 1.0, &mut stream_rng(3)).unwrap();
        let p = derive(&model, 400, 0.3, Regime::HalfinWhitt).unwrap();
        t.verify(&HwConfig::from_params(&p)).unwrap();
    }
}
