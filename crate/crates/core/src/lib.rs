//! Glauber-dynamics CSMA scheduling: conflict graphs, queue-based weights,
//! the single- and multi-site chains, distributed decision mechanisms,
//! exact chain analysis and slotted queueing simulation.

// Range checks are written as `!(x >= lo)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod glauber;
pub mod graph;
pub mod mac;
pub mod rng;
pub mod sim;
pub mod weights;

pub use analysis::{AdiabaticReport, Conductance, Magnitude, SpectralReport};
pub use error::{Error, Result};
pub use glauber::{ChainKind, ChainModel, ChainState};
pub use graph::{build_grid_4x4, ConflictGraph, GraphSpec, GridNetwork, Schedule};
pub use mac::{DecisionSource, MacConfig, Mechanism};
pub use rng::SeededRng;
pub use sim::{ArrivalConfig, SimConfig, SlotRecord, Trace, TraceSummary};
pub use weights::{WeightConfig, WeightFunction};
