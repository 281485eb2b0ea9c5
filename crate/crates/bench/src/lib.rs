//! Fixtures shared by the benchmarks.

use csma_core::graph::GRID_MAXIMAL_SCHEDULES;
use csma_core::{ArrivalConfig, ConflictGraph, Schedule};

/// The 4×4 grid load `ρ Σ c_k 1_{M_k}` with `c = (0.2, 0.3, 0.2, 0.3)`.
pub fn grid_arrivals(rho: f64) -> ArrivalConfig {
    let c = [0.2, 0.3, 0.2, 0.3];
    ArrivalConfig::Structured {
        rho,
        components: GRID_MAXIMAL_SCHEDULES
            .iter()
            .zip(c)
            .map(|(ids, c)| (Schedule::from_ids(24, ids).expect("grid ids"), c))
            .collect(),
    }
}

/// Deterministic weights in `[0, 3)` that differ per link.
pub fn spread_weights(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 * 0.618_033_988_75).fract() * 3.0).collect()
}

/// A path of six links: 21 schedules, within reach of exact conductance.
pub fn conductance_fixture() -> ConflictGraph {
    ConflictGraph::path(6).expect("valid path")
}
