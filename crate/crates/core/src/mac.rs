//! Control-slot mechanisms that pick the decision schedule `m(t)`.
//!
//! Control signalling is idealized: no propagation delay, perfect carrier
//! sensing, no lost INTENT messages.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::graph::{ConflictGraph, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    /// Every link sends an INTENT with probability 1/2; a sender joins iff no
    /// neighbor also sent.
    BernoulliHalf,
    /// Uniform back-off in `[0, W-1]` mini-slots with withdrawal on hearing a
    /// neighbor and exclusion on same-mini-slot collisions.
    Windowed,
}

impl Mechanism {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "BERNOULLI_HALF" => Ok(Self::BernoulliHalf),
            "WINDOWED" => Ok(Self::Windowed),
            other => Err(Error::InvalidParameter(format!(
                "unknown MAC mechanism {other:?}; expected BERNOULLI_HALF or WINDOWED"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BernoulliHalf => "BERNOULLI_HALF",
            Self::Windowed => "WINDOWED",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacConfig {
    pub mechanism: Mechanism,
    pub window: u32,
    /// Data-slot length, used only for capacity accounting.
    pub data_slot: f64,
    /// Control-slot length, used only for capacity accounting.
    pub control_slot: f64,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            mechanism: Mechanism::Windowed,
            window: 32,
            data_slot: 1.0,
            control_slot: 1.0 / 32.0,
        }
    }
}

impl MacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::InvalidParameter("mac.window must be at least 1".into()));
        }
        if !(self.data_slot > 0.0 && self.control_slot > 0.0) {
            return Err(Error::InvalidParameter(
                "mac.data_slot and mac.control_slot must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn capacity_fraction(&self) -> Result<f64> {
        capacity_fraction(self.data_slot, self.control_slot)
    }
}

/// Anything that can produce a decision schedule each slot.
pub trait DecisionSource {
    fn decide(&self, graph: &ConflictGraph, rng: &mut dyn RngCore) -> Schedule;
}

impl DecisionSource for MacConfig {
    fn decide(&self, graph: &ConflictGraph, rng: &mut dyn RngCore) -> Schedule {
        match self.mechanism {
            Mechanism::BernoulliHalf => decision_bernoulli(graph, rng),
            Mechanism::Windowed => decision_windowed(graph, self.window, rng),
        }
    }
}

/// Draws one INTENT bit per link in ascending order.
pub fn decision_bernoulli<R: Rng + ?Sized>(graph: &ConflictGraph, rng: &mut R) -> Schedule {
    let n = graph.num_links();
    let mut sent = Schedule::empty(n);
    for l in 0..n {
        if rng.random::<bool>() {
            sent.insert(l);
        }
    }
    decision_from_intents(graph, &sent)
}

/// Senders none of whose neighbors also sent.
pub fn decision_from_intents(graph: &ConflictGraph, sent: &Schedule) -> Schedule {
    let n = graph.num_links();
    let mut m = Schedule::empty(n);
    for l in sent.iter() {
        if !graph.has_active_neighbor(sent, l) {
            m.insert(l);
        }
    }
    debug_assert!(graph.is_independent(&m));
    m
}

/// Draws one back-off per link in ascending order, then resolves the control slot.
pub fn decision_windowed<R: Rng + ?Sized>(graph: &ConflictGraph, window: u32, rng: &mut R) -> Schedule {
    assert!(window >= 1, "window must be positive");
    let backoffs: Vec<u32> = (0..graph.num_links())
        .map(|_| rng.random_range(0..window))
        .collect();
    decision_from_backoffs(graph, &backoffs)
}

/// Resolves a control slot for fixed back-offs.
///
/// A link transmits its INTENT at mini-slot `T_i` unless some neighbor
/// transmitted in an earlier mini-slot, and joins `m(t)` iff it transmitted
/// and no neighbor transmitted in the same mini-slot.
pub fn decision_from_backoffs(graph: &ConflictGraph, backoffs: &[u32]) -> Schedule {
    let n = graph.num_links();
    assert_eq!(backoffs.len(), n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&l| backoffs[l]);
    let mut transmitted = Schedule::empty(n);
    for &l in &order {
        let heard_earlier = graph
            .neighbors(l)
            .iter()
            .any(|&j| transmitted.contains(j) && backoffs[j] < backoffs[l]);
        if !heard_earlier {
            transmitted.insert(l);
        }
    }
    let mut m = Schedule::empty(n);
    for l in transmitted.iter() {
        let collided = graph
            .neighbors(l)
            .iter()
            .any(|&j| transmitted.contains(j) && backoffs[j] == backoffs[l]);
        if !collided {
            m.insert(l);
        }
    }
    debug_assert!(graph.is_independent(&m));
    m
}

/// Max links for exhaustive INTENT-pattern enumeration.
pub const MAX_BERNOULLI_ENUMERATION: usize = 12;
/// Max number of back-off vectors (`W^N`) for exhaustive enumeration.
pub const MAX_BACKOFF_VECTORS: u64 = 1 << 26;

/// Exact law of `m(t)`, sorted by schedule.
pub fn enumerate_decision_distribution(
    graph: &ConflictGraph,
    mechanism: Mechanism,
    window: u32,
) -> Result<Vec<(Schedule, f64)>> {
    let n = graph.num_links();
    let mut law: BTreeMap<Schedule, f64> = BTreeMap::new();
    match mechanism {
        Mechanism::BernoulliHalf => {
            if n > MAX_BERNOULLI_ENUMERATION {
                return Err(Error::EnumerationTooLarge(format!(
                    "{n} links exceed the {MAX_BERNOULLI_ENUMERATION}-link INTENT enumeration cap"
                )));
            }
            let p = 0.5f64.powi(n as i32);
            for pattern in 0..1u64 << n {
                let sent = Schedule::from_mask(n, pattern);
                *law.entry(decision_from_intents(graph, &sent)).or_default() += p;
            }
        }
        Mechanism::Windowed => {
            if window < 1 {
                return Err(Error::InvalidParameter("window must be at least 1".into()));
            }
            let total = (window as u64)
                .checked_pow(n as u32)
                .filter(|&t| t <= MAX_BACKOFF_VECTORS)
                .ok_or_else(|| {
                    Error::EnumerationTooLarge(format!(
                        "{window}^{n} back-off vectors exceed {MAX_BACKOFF_VECTORS}"
                    ))
                })?;
            let p = 1.0 / total as f64;
            let mut backoffs = vec![0u32; n];
            for _ in 0..total {
                *law.entry(decision_from_backoffs(graph, &backoffs)).or_default() += p;
                // Odometer increment.
                for b in backoffs.iter_mut() {
                    *b += 1;
                    if *b < window {
                        break;
                    }
                    *b = 0;
                }
            }
        }
    }
    Ok(law.into_iter().collect())
}

/// `D / (D + W_c)`: the usable share of each slot.
pub fn capacity_fraction(data_slot: f64, control_slot: f64) -> Result<f64> {
    if !(data_slot > 0.0 && control_slot > 0.0) {
        return Err(Error::InvalidParameter(
            "slot lengths must be positive".into(),
        ));
    }
    Ok(data_slot / (data_slot + control_slot))
}
