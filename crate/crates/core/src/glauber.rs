//! Single-site and multi-site (parallel) Glauber dynamics over independent
//! sets, plus exact kernels and the product-form stationary law.
//!
//! RNG consumption order for [`single_site_step`]: one `random_range(0..N)`
//! draw for the link, then one `f64` activation draw only if that link is
//! free to turn on. [`multi_site_step`] draws one `f64` per free member of
//! the decision schedule, in ascending link order.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{enumerate_independent_sets, ConflictGraph, Schedule};

/// Dense kernels are `r × r`; beyond this many states we refuse to build them.
pub const MAX_DENSE_STATES: usize = 4096;

/// `e^w / (1 + e^w)`, evaluated without overflow.
#[inline]
pub fn activation_probability(w: f64) -> f64 {
    if w >= 0.0 {
        1.0 / (1.0 + (-w).exp())
    } else {
        let e = w.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub schedule: Schedule,
    pub slot: u64,
}

impl ChainState {
    pub fn new(schedule: Schedule) -> Self {
        Self { schedule, slot: 0 }
    }

    pub fn idle(num_links: usize) -> Self {
        Self::new(Schedule::empty(num_links))
    }
}

/// One basic-algorithm update: pick a link uniformly, resample it if none of
/// its neighbors is active, otherwise force it off. Returns the chosen link.
pub fn single_site_step<R: Rng + ?Sized>(
    graph: &ConflictGraph,
    state: &mut ChainState,
    weights: &[f64],
    rng: &mut R,
) -> usize {
    let n = graph.num_links();
    debug_assert_eq!(weights.len(), n);
    let i = rng.random_range(0..n);
    if graph.has_active_neighbor(&state.schedule, i) {
        state.schedule.remove(i);
    } else {
        let on = rng.random::<f64>() < activation_probability(weights[i]);
        state.schedule.set(i, on);
    }
    state.slot += 1;
    i
}

/// One parallel update over the decision schedule `decision`; links outside
/// it keep their state.
///
/// `decision` is independent, so no updated link neighbors another updated
/// link: every neighbor check sees the previous slot's (frozen) states and
/// updating in place is equivalent to updating from `x(t-1)`.
pub fn multi_site_step<R: Rng + ?Sized>(
    graph: &ConflictGraph,
    state: &mut ChainState,
    weights: &[f64],
    decision: &Schedule,
    rng: &mut R,
) -> Result<()> {
    graph.ensure_independent(decision)?;
    for i in decision.iter() {
        if graph.has_active_neighbor(&state.schedule, i) {
            state.schedule.remove(i);
        } else {
            let on = rng.random::<f64>() < activation_probability(weights[i]);
            state.schedule.set(i, on);
        }
    }
    state.slot += 1;
    Ok(())
}

/// `π(ρ) ∝ exp(Σ_{i∈ρ} w_i)` over the given states, log-sum-exp normalized.
pub fn product_form(states: &[Schedule], weights: &[f64]) -> Vec<f64> {
    let log_w: Vec<f64> = states
        .iter()
        .map(|s| s.iter().map(|i| weights[i]).sum())
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_w.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|v| v / z).collect()
}

/// Stationary law over [`enumerate_independent_sets`] order.
pub fn stationary_distribution(graph: &ConflictGraph, weights: &[f64]) -> Result<Vec<f64>> {
    check_weights(graph, weights)?;
    let states = enumerate_independent_sets(graph)?;
    Ok(product_form(&states, weights))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    SingleSite,
    MultiSite,
}

/// Enumerated state space with its exact kernel and stationary law.
#[derive(Clone, Debug)]
pub struct ChainModel {
    pub kind: ChainKind,
    pub num_links: usize,
    pub weights: Vec<f64>,
    pub states: Vec<Schedule>,
    /// Row-stochastic, indexed by `states`.
    pub kernel: DMatrix<f64>,
    pub stationary: Vec<f64>,
}

impl ChainModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, schedule: &Schedule) -> Option<usize> {
        self.states.binary_search(schedule).ok()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.kernel
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |π(X)P(X,Y) − π(Y)P(Y,X)|`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let r = self.num_states();
        let mut worst: f64 = 0.0;
        for x in 0..r {
            for y in x + 1..r {
                let flow = self.stationary[x] * self.kernel[(x, y)] - self.stationary[y] * self.kernel[(y, x)];
                worst = worst.max(flow.abs());
            }
        }
        worst
    }

    /// `μ P`.
    pub fn evolve(&self, mu: &[f64]) -> Vec<f64> {
        let r = self.num_states();
        let mut out = vec![0.0; r];
        for (x, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (y, o) in out.iter_mut().enumerate() {
                *o += m * self.kernel[(x, y)];
            }
        }
        out
    }

    /// True iff every state reaches every other state through positive entries.
    pub fn is_irreducible(&self) -> bool {
        let r = self.num_states();
        let reach = |forward: bool| {
            let mut seen = vec![false; r];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                for y in 0..r {
                    let p = if forward { self.kernel[(x, y)] } else { self.kernel[(y, x)] };
                    if p > 0.0 && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

fn check_weights(graph: &ConflictGraph, weights: &[f64]) -> Result<()> {
    if weights.len() != graph.num_links() {
        return Err(Error::LengthMismatch {
            expected: graph.num_links(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite".into()));
    }
    Ok(())
}

fn dense_states(graph: &ConflictGraph) -> Result<Vec<Schedule>> {
    let states = enumerate_independent_sets(graph)?;
    if states.len() > MAX_DENSE_STATES {
        return Err(Error::StateSpaceTooLarge {
            what: "dense kernel construction",
            states: states.len(),
            cap: MAX_DENSE_STATES,
        });
    }
    Ok(states)
}

/// Exact kernel of [`single_site_step`].
pub fn transition_matrix_single(graph: &ConflictGraph, weights: &[f64]) -> Result<ChainModel> {
    check_weights(graph, weights)?;
    let states = dense_states(graph)?;
    let n = graph.num_links();
    let masks = graph.neighbor_masks().expect("enumeration implies n <= 64");
    let index: HashMap<u64, usize> = states
        .iter()
        .enumerate()
        .map(|(k, s)| (s.mask().unwrap(), k))
        .collect();
    let r = states.len();
    let mut kernel = DMatrix::zeros(r, r);
    let pick = 1.0 / n as f64;
    for (x, s) in states.iter().enumerate() {
        let xm = s.mask().unwrap();
        for i in 0..n {
            if xm & masks[i] != 0 {
                // Blocked: the link is idle already and stays idle.
                kernel[(x, x)] += pick;
                continue;
            }
            let p = activation_probability(weights[i]);
            kernel[(x, index[&(xm | 1 << i)])] += pick * p;
            kernel[(x, index[&(xm & !(1 << i))])] += pick * (1.0 - p);
        }
    }
    Ok(ChainModel {
        kind: ChainKind::SingleSite,
        num_links: n,
        weights: weights.to_vec(),
        stationary: product_form(&states, weights),
        states,
        kernel,
    })
}

/// Exact kernel of the parallel chain: for each pair `(X, Y)`, sums `α(m)`
/// over decision schedules `m ⊇ XΔY`, times `1/(1+e^{w_i})` for each
/// `i ∈ m ∖ (Y ∪ N(X∪Y))` and `e^{w_j}/(1+e^{w_j})` for each `j ∈ m ∩ Y`.
pub fn transition_matrix_multi(
    graph: &ConflictGraph,
    weights: &[f64],
    decision_distribution: &[(Schedule, f64)],
) -> Result<ChainModel> {
    check_weights(graph, weights)?;
    validate_decision_distribution(graph, decision_distribution)?;
    let states = dense_states(graph)?;
    let n = graph.num_links();
    let nbr = graph.neighbor_masks().expect("enumeration implies n <= 64");
    let neighborhood = |set: u64| -> u64 {
        let mut out = 0;
        let mut rest = set;
        while rest != 0 {
            out |= nbr[rest.trailing_zeros() as usize];
            rest &= rest - 1;
        }
        out
    };
    let p_on: Vec<f64> = weights.iter().map(|&w| activation_probability(w)).collect();
    let decisions: Vec<(u64, f64)> = decision_distribution
        .iter()
        .filter(|(_, a)| *a > 0.0)
        .map(|(m, a)| (m.mask().unwrap(), *a))
        .collect();
    let masks: Vec<u64> = states.iter().map(|s| s.mask().unwrap()).collect();
    let r = states.len();
    let mut kernel = DMatrix::zeros(r, r);
    for (x, &xm) in masks.iter().enumerate() {
        for (y, &ym) in masks.iter().enumerate() {
            let diff = xm ^ ym;
            let blocked = neighborhood(xm | ym);
            let mut total = 0.0;
            for &(m, alpha) in &decisions {
                if diff & !m != 0 {
                    continue;
                }
                let mut prod = alpha;
                let mut off = m & !(ym | blocked);
                while off != 0 {
                    prod *= 1.0 - p_on[off.trailing_zeros() as usize];
                    off &= off - 1;
                }
                let mut on = m & ym;
                while on != 0 {
                    prod *= p_on[on.trailing_zeros() as usize];
                    on &= on - 1;
                }
                total += prod;
            }
            kernel[(x, y)] = total;
        }
    }
    Ok(ChainModel {
        kind: ChainKind::MultiSite,
        num_links: n,
        weights: weights.to_vec(),
        stationary: product_form(&states, weights),
        states,
        kernel,
    })
}

pub(crate) fn validate_decision_distribution(
    graph: &ConflictGraph,
    dist: &[(Schedule, f64)],
) -> Result<()> {
    let mut total = 0.0;
    for (m, a) in dist {
        if m.len() != graph.num_links() {
            return Err(Error::InvalidDecisionDistribution(format!(
                "schedule {m} has length {}",
                m.len()
            )));
        }
        if !graph.is_independent(m) {
            return Err(Error::InvalidDecisionDistribution(format!("{m} is not independent")));
        }
        if !(a.is_finite() && *a >= 0.0) {
            return Err(Error::InvalidDecisionDistribution(format!("probability {a} for {m}")));
        }
        total += a;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDecisionDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(())
}
