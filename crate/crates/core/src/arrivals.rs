//! Arrival streams.
//!
//! [`Pattern`] is the deterministic two-class construction that selects the
//! reflection direction of the Halfin–Whitt limit. On each period `(0, tau]`
//! with `tau = m / n`, the "batch" class receives all `m` of its customers at
//! once at `tau`, while the "spread" class receives `m` single arrivals at
//! `tau/2 + j/(2n)`, `j = 0, ..., m-1`. Every pattern time is an integer
//! multiple of `1/(2n)`, so the pattern is stored as integer ticks and event
//! ordering is exact.

use alloc::format;
use alloc::vec::Vec;

use crate::distribution::TimeDistribution;
use crate::model::DerivedParams;
use crate::rng::Randomness;
use crate::{Error, Result};

/// Which class arrives in batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    /// Class 1 (index 0) arrives in batches.
    K1,
    /// Class 2 (index 1) arrives in batches.
    K2,
}

impl PatternKind {
    pub fn from_k(k: u8) -> Result<Self> {
        match k {
            1 => Ok(PatternKind::K1),
            2 => Ok(PatternKind::K2),
            _ => Err(Error::InvalidParameter(format!("pattern k must be 1 or 2, got {k}"))),
        }
    }

    pub fn k(self) -> u8 {
        match self {
            PatternKind::K1 => 1,
            PatternKind::K2 => 2,
        }
    }

    /// Zero-based index of the batch class, which is also the reflection
    /// direction of the limit.
    pub fn batch_class(self) -> usize {
        match self {
            PatternKind::K1 => 0,
            PatternKind::K2 => 1,
        }
    }

    pub fn spread_class(self) -> usize {
        1 - self.batch_class()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalEvent {
    pub time: f64,
    pub class: usize,
    pub multiplicity: u64,
}

/// The periodic deterministic arrival pattern for two classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pattern {
    n: u64,
    m: u64,
    kind: PatternKind,
}

impl Pattern {
    pub fn new(params: &DerivedParams, kind: PatternKind) -> Result<Self> {
        if params.num_classes() != 2 {
            return Err(Error::InvalidParameter(format!(
                "the arrival pattern needs exactly 2 classes, model has {}",
                params.num_classes()
            )));
        }
        Self::from_parts(params.n, params.m, kind)
    }

    pub fn from_parts(n: u64, m: u64, kind: PatternKind) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::DegenerateScale("pattern needs n >= 1 and m >= 1"));
        }
        Ok(Pattern { n, m, kind })
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.tick_time(2 * self.m)
    }

    pub fn tick_time(&self, tick: u64) -> f64 {
        tick as f64 / (2 * self.n) as f64
    }

    /// Time of the `j`-th batch, `j tau`.
    pub fn batch_time(&self, j: u64) -> f64 {
        self.tick_time(2 * self.m * j)
    }

    /// Largest tick whose time is `<= t` (0 for negative `t`).
    pub fn ticks_through(&self, t: f64) -> u64 {
        if !(t > 0.0) {
            return 0;
        }
        let scale = (2 * self.n) as f64;
        let mut k = libm::floor(t * scale) as u64;
        while self.tick_time(k + 1) <= t {
            k += 1;
        }
        while k > 0 && self.tick_time(k) > t {
            k -= 1;
        }
        k
    }

    /// Cumulative class arrivals up to and including `tick`.
    pub fn count_at_tick(&self, class: usize, tick: u64) -> u64 {
        let period = 2 * self.m;
        let full = (tick / period) * self.m;
        if class == self.kind.batch_class() {
            full
        } else if class == self.kind.spread_class() {
            let r = tick % period;
            full + (r + 1).saturating_sub(self.m)
        } else {
            0
        }
    }

    /// `E_class(t)`.
    pub fn count(&self, class: usize, t: f64) -> u64 {
        self.count_at_tick(class, self.ticks_through(t))
    }

    /// True when `t` is exactly one of the batch times `j tau`, `j >= 1`.
    pub fn is_batch_time(&self, t: f64) -> bool {
        let k = self.ticks_through(t);
        k > 0 && k.is_multiple_of(2 * self.m) && self.tick_time(k) == t
    }

    fn event_at_tick(&self, tick: u64) -> Option<ArrivalEvent> {
        let r = tick % (2 * self.m);
        if r == 0 && tick > 0 {
            Some(ArrivalEvent {
                time: self.tick_time(tick),
                class: self.kind.batch_class(),
                multiplicity: self.m,
            })
        } else if r >= self.m {
            Some(ArrivalEvent {
                time: self.tick_time(tick),
                class: self.kind.spread_class(),
                multiplicity: 1,
            })
        } else {
            None
        }
    }

    /// First tick `>= from` carrying an arrival.
    fn next_arrival_tick(&self, from: u64) -> u64 {
        let period = 2 * self.m;
        let r = from % period;
        if (r == 0 && from > 0) || r >= self.m {
            from
        } else {
            from - r + self.m
        }
    }
}

/// `E^n_class(t)` for the pattern with batch class `k`.
pub fn pattern_count(class: usize, t: f64, params: &DerivedParams, kind: PatternKind) -> Result<u64> {
    Ok(Pattern::new(params, kind)?.count(class, t))
}

/// A generator of arrival events.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalSource {
    /// Both classes of the deterministic pattern.
    Pattern(Pattern),
    Poisson { class: usize, rate: f64 },
    /// `E(t) = E_0(acceleration * t)` where `E_0` counts renewals of `gaps`.
    Renewal { class: usize, gaps: TimeDistribution, acceleration: f64 },
    /// A fixed, time-ordered list.
    Scripted(Vec<ArrivalEvent>),
}

impl ArrivalSource {
    pub fn poisson(class: usize, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("Poisson rate {rate} must be >= 0")));
        }
        Ok(ArrivalSource::Poisson { class, rate })
    }

    pub fn renewal(class: usize, gaps: TimeDistribution, acceleration: f64) -> Result<Self> {
        if !(acceleration > 0.0 && acceleration.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "renewal acceleration {acceleration} must be positive"
            )));
        }
        Ok(ArrivalSource::Renewal { class, gaps, acceleration })
    }

    /// Renewal stream built from an unsupported-or-not tag with unit-mean gaps.
    pub fn renewal_from_tag(class: usize, tag: &str, scv: f64, acceleration: f64) -> Result<Self> {
        Self::renewal(class, TimeDistribution::from_tag(tag, 1.0, scv)?, acceleration)
    }

    pub fn scripted(events: Vec<ArrivalEvent>) -> Result<Self> {
        let mut last = 0.0;
        for e in &events {
            if !(e.time >= last && e.time.is_finite()) {
                return Err(Error::InvalidParameter("scripted arrivals must be time-ordered".into()));
            }
            if e.multiplicity == 0 {
                return Err(Error::InvalidParameter("arrival multiplicity must be >= 1".into()));
            }
            last = e.time;
        }
        Ok(ArrivalSource::Scripted(events))
    }

    pub fn stream(&self) -> ArrivalStream {
        ArrivalStream::new(self.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cursor {
    Tick(u64),
    Clock(f64),
    Index(usize),
}

/// Stateful event generator over one source, starting at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalStream {
    source: ArrivalSource,
    cursor: Cursor,
}

impl ArrivalStream {
    pub fn new(source: ArrivalSource) -> Self {
        let cursor = match source {
            ArrivalSource::Pattern(_) => Cursor::Tick(1),
            ArrivalSource::Poisson { .. } | ArrivalSource::Renewal { .. } => Cursor::Clock(0.0),
            ArrivalSource::Scripted(_) => Cursor::Index(0),
        };
        ArrivalStream { source, cursor }
    }

    pub fn source(&self) -> &ArrivalSource {
        &self.source
    }

    /// Next event, or `None` once the stream is exhausted.
    pub fn next_event<R: Randomness + ?Sized>(&mut self, rng: &mut R) -> Option<ArrivalEvent> {
        match (&self.source, &mut self.cursor) {
            (ArrivalSource::Pattern(p), Cursor::Tick(tick)) => {
                let at = p.next_arrival_tick(*tick);
                *tick = at + 1;
                p.event_at_tick(at)
            }
            (ArrivalSource::Poisson { class, rate }, Cursor::Clock(now)) => {
                if *rate <= 0.0 {
                    return None;
                }
                *now += rng.exponential(*rate);
                Some(ArrivalEvent { time: *now, class: *class, multiplicity: 1 })
            }
            (ArrivalSource::Renewal { class, gaps, acceleration }, Cursor::Clock(now)) => {
                *now += gaps.sample(rng) / acceleration;
                Some(ArrivalEvent { time: *now, class: *class, multiplicity: 1 })
            }
            (ArrivalSource::Scripted(events), Cursor::Index(i)) => {
                let e = events.get(*i).copied();
                *i += 1;
                e
            }
            _ => unreachable!("cursor always matches its source"),
        }
    }
}

/// Events of a fresh stream falling in `(after, horizon]`, time-ordered.
/// Pattern and scripted sources never touch `rng`.
pub fn next_events<R: Randomness + ?Sized>(
    source: &ArrivalSource,
    after: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<ArrivalEvent>> {
    if !(after < horizon) {
        return Err(Error::InvalidParameter(format!(
            "window ({after}, {horizon}] is empty"
        )));
    }
    let mut stream = source.stream();
    let mut out = Vec::new();
    while let Some(e) = stream.next_event(rng) {
        if e.time > horizon {
            break;
        }
        if e.time > after {
            out.push(e);
        }
    }
    Ok(out)
}

/// Merges several streams into one time-ordered stream. Simultaneous events
/// come out in source order.
#[derive(Debug, Clone)]
pub struct ArrivalPlan {
    streams: Vec<ArrivalStream>,
    heads: Vec<Option<ArrivalEvent>>,
    primed: bool,
}

impl ArrivalPlan {
    pub fn new(sources: Vec<ArrivalSource>) -> Self {
        let streams: Vec<ArrivalStream> = sources.into_iter().map(ArrivalStream::new).collect();
        let heads = alloc::vec![None; streams.len()];
        ArrivalPlan { streams, heads, primed: false }
    }

    fn prime<R: Randomness + ?Sized>(&mut self, rng: &mut R) {
        if !self.primed {
            for (head, stream) in self.heads.iter_mut().zip(&mut self.streams) {
                *head = stream.next_event(rng);
            }
            self.primed = true;
        }
    }

    fn earliest(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, head) in self.heads.iter().enumerate() {
            if let Some(e) = head {
                if best.is_none_or(|(_, t)| e.time < t) {
                    best = Some((i, e.time));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn peek<R: Randomness + ?Sized>(&mut self, rng: &mut R) -> Option<ArrivalEvent> {
        self.prime(rng);
        self.earliest().and_then(|i| self.heads[i])
    }

    pub fn pop<R: Randomness + ?Sized>(&mut self, rng: &mut R) -> Option<ArrivalEvent> {
        self.prime(rng);
        let i = self.earliest()?;
        let e = self.heads[i].take();
        self.heads[i] = self.streams[i].next_event(rng);
        e
    }
}

/// Largest grid deviations of a class's counting process from its fluid and
/// diffusion centering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingDeviation {
    /// `sup_t |E(t)/n - lambda t|`.
    pub lln: f64,
    /// `sup_t |(E(t) - lambda_n t) / sqrt(n)|`.
    pub clt: f64,
}

/// Evaluates the LLN and CLT deviations of `class` arrivals on the grid
/// `0, step, 2 step, ...` (plus `horizon`).
#[allow(clippy::too_many_arguments)]
pub fn scaling_check<R: Randomness + ?Sized>(
    source: &ArrivalSource,
    class: usize,
    lambda: f64,
    lambda_n: f64,
    n: u64,
    horizon: f64,
    grid_step: f64,
    rng: &mut R,
) -> Result<ScalingDeviation> {
    if !(grid_step > 0.0) {
        return Err(Error::NonPositiveStep(grid_step));
    }
    let nf = n as f64;
    let sn = libm::sqrt(nf);
    let mut stream = source.stream();
    let mut pending = stream.next_event(rng);
    let mut count: u64 = 0;
    let mut dev = ScalingDeviation { lln: 0.0, clt: 0.0 };

    let steps = libm::floor(horizon / grid_step) as u64;
    let mut grid = (0..=steps).map(|i| i as f64 * grid_step).filter(|&t| t <= horizon);
    let mut tail = if steps as f64 * grid_step < horizon { Some(horizon) } else { None };
    while let Some(t) = grid.next().or_else(|| tail.take()) {
        while let Some(e) = pending {
            if e.time > t {
                break;
            }
            if e.class == class {
                count += e.multiplicity;
            }
            pending = stream.next_event(rng);
        }
        let c = count as f64;
        dev.lln = dev.lln.max((c / nf - lambda * t).abs());
        dev.clt = dev.clt.max(((c - lambda_n * t) / sn).abs());
    }
    Ok(dev)
}
