//! Slotted queueing simulation driven by the Glauber chains.
//!
//! Each slot: weights from the previous slot's queues, one chain step, then
//! `q_l ← (q_l − x_l)⁺ + a_l`. Random streams are split per purpose so the
//! chain, arrivals and control slot never share draws: stream 0 drives the
//! chain, stream 1 the arrivals, stream 2 the MAC.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::glauber::{multi_site_step, single_site_step, ChainState};
use crate::graph::{ConflictGraph, Schedule};
use crate::mac::DecisionSource;
use crate::rng::SeededRng;
use crate::weights::WeightConfig;

pub const CHAIN_STREAM: u64 = 0;
pub const ARRIVAL_STREAM: u64 = 1;
pub const MAC_STREAM: u64 = 2;

/// Exact max-weight search is limited to this many links.
pub const MAX_ORACLE_LINKS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalConfig {
    /// Explicit per-link rates.
    Rates(Vec<f64>),
    /// `λ = ρ · Σ c_i · 1[M_i]`.
    Structured {
        rho: f64,
        components: Vec<(Schedule, f64)>,
    },
}

/// Per-link Bernoulli rates, each checked to lie in `[0, 1)`.
pub fn expand_arrivals(graph: &ConflictGraph, arrivals: &ArrivalConfig) -> Result<Vec<f64>> {
    let n = graph.num_links();
    let lambda = match arrivals {
        ArrivalConfig::Rates(rates) => {
            if rates.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: rates.len(),
                });
            }
            rates.clone()
        }
        ArrivalConfig::Structured { rho, components } => {
            if !(*rho >= 0.0 && *rho < 1.0) {
                return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
            }
            let total: f64 = components.iter().map(|(_, c)| c).sum();
            if components.iter().any(|(_, c)| !(*c >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "arrival coefficients must be nonnegative and sum to 1 (sum {total})"
                )));
            }
            let mut lambda = vec![0.0; n];
            for (m, c) in components {
                if m.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: m.len(),
                    });
                }
                graph.ensure_independent(m)?;
                for l in m.iter() {
                    lambda[l] += rho * c;
                }
            }
            lambda
        }
    };
    for (link, &rate) in lambda.iter().enumerate() {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::ArrivalRate { link: link + 1, rate });
        }
    }
    Ok(lambda)
}

/// One uniform draw per link, ascending; link `l` gets a packet iff the draw is below `λ_l`.
pub fn sample_arrivals<R: rand::Rng + ?Sized>(lambda: &[f64], rng: &mut R, out: &mut Schedule) {
    for (l, &rate) in lambda.iter().enumerate() {
        out.set(l, rng.random::<f64>() < rate);
    }
}

/// `q_l ← (q_l − x_l)⁺ + a_l`. Returns the number of departures.
pub fn queue_update(queues: &mut [u64], schedule: &Schedule, arrivals: &Schedule) -> usize {
    let mut departures = 0;
    for (l, q) in queues.iter_mut().enumerate() {
        if schedule.contains(l) && *q > 0 {
            *q -= 1;
            departures += 1;
        }
        if arrivals.contains(l) {
            *q += 1;
        }
    }
    departures
}

/// Exact max-weight independent set by depth-first branch and bound.
///
/// Links are decided from the highest index down, excluding before
/// including, and only strictly better sets replace the incumbent, so ties
/// resolve to the numerically smallest bitset.
pub fn mws_oracle(graph: &ConflictGraph, weights: &[f64]) -> Result<(Schedule, f64)> {
    let n = graph.num_links();
    if n > MAX_ORACLE_LINKS {
        return Err(Error::EnumerationCap {
            links: n,
            cap: MAX_ORACLE_LINKS,
        });
    }
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    let nbr: Vec<u32> = graph.neighbor_masks().expect("n <= 32").into_iter().map(|m| m as u32).collect();
    let pos: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let mut search = Mws {
        nbr: &nbr,
        weights,
        pos: &pos,
        best_mask: 0,
        best_weight: 0.0,
    };
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    search.dfs(n, all, 0, 0.0);
    Ok((Schedule::from_mask(n, search.best_mask as u64), search.best_weight))
}

struct Mws<'a> {
    nbr: &'a [u32],
    weights: &'a [f64],
    pos: &'a [f64],
    best_mask: u32,
    best_weight: f64,
}

impl Mws<'_> {
    /// Decides links `0..k` given the links still free in `avail`.
    fn dfs(&mut self, k: usize, avail: u32, mask: u32, weight: f64) {
        if weight > self.best_weight {
            self.best_weight = weight;
            self.best_mask = mask;
        }
        let below = if k >= 32 { avail } else { avail & ((1u32 << k) - 1) };
        if below == 0 {
            return;
        }
        let mut bound = weight;
        let mut rest = below;
        while rest != 0 {
            bound += self.pos[rest.trailing_zeros() as usize];
            rest &= rest - 1;
        }
        if bound <= self.best_weight {
            return;
        }
        let l = 31 - below.leading_zeros() as usize;
        self.dfs(l, below & !(1 << l), mask, weight);
        if self.weights[l] > 0.0 {
            self.dfs(l, below & !(1 << l) & !self.nbr[l], mask | 1 << l, weight + self.weights[l]);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub horizon: u64,
    pub seed: u64,
    /// Keep a [`SlotRecord`] every this many slots.
    pub record_every: u64,
    /// Run the max-weight oracle every this many slots; `None` disables it.
    pub oracle_every: Option<u64>,
    /// `q(0)`; all zeros when absent.
    pub initial_queues: Option<Vec<u64>>,
    /// Disable arrivals and departures so the weights stay fixed.
    pub frozen: bool,
    /// Count how often each schedule occurs.
    pub histogram: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 1000,
            seed: 0,
            record_every: 1,
            oracle_every: Some(100),
            initial_queues: None,
            frozen: false,
            histogram: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.record_every == 0 || self.oracle_every == Some(0) {
            return Err(Error::InvalidParameter(
                "record_every and oracle_every must be at least 1".into(),
            ));
        }
        if let Some(q) = &self.initial_queues {
            if q.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: q.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotRecord {
    pub t: u64,
    pub schedule: Schedule,
    pub decision: Option<Schedule>,
    pub arrivals: Schedule,
    /// Queues after this slot's update.
    pub queues: Vec<u64>,
    /// `Σ_{i∈X(t)} f(q_i(t−1))`.
    pub achieved_weight: f64,
    pub oracle_weight: Option<f64>,
    pub in_chi: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleSample {
    pub t: u64,
    pub achieved_weight: f64,
    pub oracle_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub num_links: usize,
    pub records: Vec<SlotRecord>,
    pub oracle_samples: Vec<OracleSample>,
    /// Mean queue per link after each slot.
    pub avg_queue: Vec<f64>,
    /// `(Σ f(q_i)²)^{1/2}` after each slot.
    pub lyapunov: Vec<f64>,
    pub histogram: Option<BTreeMap<Schedule, u64>>,
    /// Time-average queue of each link over the run.
    pub link_time_avg: Vec<f64>,
    pub final_queues: Vec<u64>,
    /// Largest single-link queue seen during the run.
    pub peak_queue: u64,
    pub total_arrivals: u64,
    pub total_departures: u64,
}

/// The basic algorithm: one single-site step per slot.
pub fn run_basic(
    graph: &ConflictGraph,
    weights: &WeightConfig,
    arrivals: &ArrivalConfig,
    sim: &SimConfig,
) -> Result<Trace> {
    let mut chain_rng = SeededRng::with_stream(sim.seed, CHAIN_STREAM);
    run_with(graph, weights, arrivals, sim, |state, w| {
        single_site_step(graph, state, w, &mut chain_rng);
        Ok(None)
    })
}

/// The distributed algorithm: a control slot picks `m(t)`, then a multi-site step.
pub fn run_distributed<D: DecisionSource + ?Sized>(
    graph: &ConflictGraph,
    weights: &WeightConfig,
    arrivals: &ArrivalConfig,
    mac: &D,
    sim: &SimConfig,
) -> Result<Trace> {
    let mut chain_rng = SeededRng::with_stream(sim.seed, CHAIN_STREAM);
    let mut mac_rng = SeededRng::with_stream(sim.seed, MAC_STREAM);
    run_with(graph, weights, arrivals, sim, |state, w| {
        let m = mac.decide(graph, &mut mac_rng);
        multi_site_step(graph, state, w, &m, &mut chain_rng)?;
        Ok(Some(m))
    })
}

fn run_with(
    graph: &ConflictGraph,
    wcfg: &WeightConfig,
    arrivals: &ArrivalConfig,
    sim: &SimConfig,
    mut step: impl FnMut(&mut ChainState, &[f64]) -> Result<Option<Schedule>>,
) -> Result<Trace> {
    let n = graph.num_links();
    sim.validate(n)?;
    if wcfg.num_links != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: wcfg.num_links,
        });
    }
    let lambda = expand_arrivals(graph, arrivals)?;
    let mut arrival_rng = SeededRng::with_stream(sim.seed, ARRIVAL_STREAM);
    let mut queues = sim.initial_queues.clone().unwrap_or_else(|| vec![0; n]);
    let mut state = ChainState::idle(n);
    let mut w = vec![0.0; n];
    // Raw `f(q)`, which defines the schedule weight and `w*`; differs from `w̃` only with the floor on.
    let mut raw = vec![0.0; n];
    let fill_raw = |queues: &[u64], raw: &mut [f64]| {
        for (r, &q) in raw.iter_mut().zip(queues) {
            *r = wcfg.function.f(q as f64);
        }
    };
    let mut a = Schedule::empty(n);
    let horizon = sim.horizon as usize;
    let mut queue_sums = vec![0u128; n];
    let mut trace = Trace {
        num_links: n,
        records: Vec::with_capacity(horizon / sim.record_every as usize + 1),
        oracle_samples: Vec::new(),
        avg_queue: Vec::with_capacity(horizon),
        lyapunov: Vec::with_capacity(horizon),
        histogram: sim.histogram.then(BTreeMap::new),
        link_time_avg: Vec::new(),
        final_queues: Vec::new(),
        peak_queue: queues.iter().copied().max().unwrap_or(0),
        total_arrivals: 0,
        total_departures: 0,
    };
    if sim.frozen {
        wcfg.effective_weights_into(&queues, &mut w);
        fill_raw(&queues, &mut raw);
    }
    for t in 1..=sim.horizon {
        if !sim.frozen {
            wcfg.effective_weights_into(&queues, &mut w);
            if wcfg.use_wmin {
                fill_raw(&queues, &mut raw);
            }
        }
        let decision = step(&mut state, &w)?;
        let x = &state.schedule;
        let score = if wcfg.use_wmin { &raw } else { &w };
        let achieved: f64 = x.iter().map(|l| score[l]).sum();
        let oracle = match sim.oracle_every {
            Some(k) if t % k == 0 => {
                let (_, w_star) = mws_oracle(graph, score)?;
                trace.oracle_samples.push(OracleSample {
                    t,
                    achieved_weight: achieved,
                    oracle_weight: w_star,
                });
                Some(w_star)
            }
            _ => None,
        };
        if !sim.frozen {
            sample_arrivals(&lambda, &mut arrival_rng, &mut a);
            trace.total_arrivals += a.count() as u64;
            trace.total_departures += queue_update(&mut queues, x, &a) as u64;
        }
        let mut total = 0u64;
        let mut lyap = 0.0;
        for (sum, &q) in queue_sums.iter_mut().zip(&queues) {
            *sum += q as u128;
            total += q;
            trace.peak_queue = trace.peak_queue.max(q);
            let fq = wcfg.function.f(q as f64);
            lyap += fq * fq;
        }
        trace.avg_queue.push(total as f64 / n as f64);
        trace.lyapunov.push(lyap.sqrt());
        if let Some(h) = trace.histogram.as_mut() {
            *h.entry(x.clone()).or_default() += 1;
        }
        if t % sim.record_every == 0 {
            trace.records.push(SlotRecord {
                t,
                schedule: x.clone(),
                decision,
                arrivals: a.clone(),
                queues: queues.clone(),
                achieved_weight: achieved,
                oracle_weight: oracle,
                in_chi: oracle.map(|w_star| achieved < (1.0 - wcfg.epsilon) * w_star),
            });
        }
    }
    trace.link_time_avg = queue_sums.iter().map(|&s| s as f64 / sim.horizon as f64).collect();
    trace.final_queues = queues;
    Ok(trace)
}

/// Fraction of oracle-sampled slots whose schedule weight is below `(1−ε) w*`.
pub fn chi_fraction(trace: &Trace, epsilon: f64) -> Result<f64> {
    if trace.oracle_samples.is_empty() {
        return Err(Error::MissingOracle);
    }
    let hits = trace
        .oracle_samples
        .iter()
        .filter(|s| s.achieved_weight < (1.0 - epsilon) * s.oracle_weight)
        .count();
    Ok(hits as f64 / trace.oracle_samples.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityMetrics {
    pub avg_queue: Vec<f64>,
    pub time_avg_queue: f64,
    pub lyapunov: Vec<f64>,
    pub time_avg_lyapunov: f64,
}

pub fn stability_metrics(trace: &Trace) -> Result<StabilityMetrics> {
    if trace.avg_queue.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(StabilityMetrics {
        time_avg_queue: mean(&trace.avg_queue),
        time_avg_lyapunov: mean(&trace.lyapunov),
        avg_queue: trace.avg_queue.clone(),
        lyapunov: trace.lyapunov.clone(),
    })
}

/// Mean of `series` over the slots in `[from, to)` given as fractions of its length.
pub fn window_average(series: &[f64], from: f64, to: f64) -> f64 {
    let len = series.len() as f64;
    let (a, b) = ((from * len) as usize, ((to * len) as usize).max((from * len) as usize + 1));
    let window = &series[a.min(series.len() - 1)..b.min(series.len())];
    window.iter().sum::<f64>() / window.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSummary {
    pub horizon: u64,
    pub num_links: usize,
    pub time_avg_queue: f64,
    pub final_avg_queue: f64,
    pub final_max_queue: u64,
    pub peak_queue: u64,
    pub total_arrivals: u64,
    pub total_departures: u64,
    pub link_time_avg_queue: Vec<f64>,
    pub oracle_samples: usize,
    pub chi_fraction: Option<f64>,
    pub mean_weight_ratio: Option<f64>,
}

impl Trace {
    pub fn summary(&self, epsilon: f64) -> Result<TraceSummary> {
        let metrics = stability_metrics(self)?;
        let ratios: Vec<f64> = self
            .oracle_samples
            .iter()
            .filter(|s| s.oracle_weight > 0.0)
            .map(|s| s.achieved_weight / s.oracle_weight)
            .collect();
        Ok(TraceSummary {
            horizon: self.avg_queue.len() as u64,
            num_links: self.num_links,
            time_avg_queue: metrics.time_avg_queue,
            final_avg_queue: *self.avg_queue.last().expect("nonempty"),
            final_max_queue: self.final_queues.iter().copied().max().unwrap_or(0),
            peak_queue: self.peak_queue,
            total_arrivals: self.total_arrivals,
            total_departures: self.total_departures,
            link_time_avg_queue: self.link_time_avg.clone(),
            oracle_samples: self.oracle_samples.len(),
            chi_fraction: chi_fraction(self, epsilon).ok(),
            mean_weight_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        })
    }

    /// One row per recorded slot: `t, q1..qN, schedule, achieved_w, w_star`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "t")?;
        for l in 1..=self.num_links {
            write!(out, ",q{l}")?;
        }
        writeln!(out, ",schedule,achieved_w,w_star")?;
        for r in &self.records {
            write!(out, "{}", r.t)?;
            for q in &r.queues {
                write!(out, ",{q}")?;
            }
            write!(out, ",{},{}", r.schedule.to_bit_string(), r.achieved_weight)?;
            match r.oracle_weight {
                Some(w) => writeln!(out, ",{w}")?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}
