use csma_core::analysis::{cheeger_sandwich_holds, conductance, gershgorin_floor, slem, MAX_CONDUCTANCE_STATES};
use csma_core::glauber::{product_form, transition_matrix_multi, transition_matrix_single, MAX_DENSE_STATES};
use csma_core::graph::{enumerate_independent_sets_with_cap, DEFAULT_ENUMERATION_CAP};
use csma_core::mac::enumerate_decision_distribution;
use csma_core::{Conductance, GraphSpec, SpectralReport, WeightConfig, WeightFunction};
use serde::{Deserialize, Serialize};

use crate::config::{config_err, MacSection};
use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainMode {
    #[default]
    Single,
    Multi,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub graph: GraphSpec,
    /// Effective weights `w̃`, one per link. Alternative to `queues`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Queue lengths mapped through `weight`.
    #[serde(default)]
    pub queues: Option<Vec<u64>>,
    #[serde(default)]
    pub weight: Option<WeightSpec>,
    #[serde(default)]
    pub mode: ChainMode,
    #[serde(default)]
    pub mac: MacSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub kind: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub use_wmin: bool,
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Serialize)]
pub struct Checks {
    pub rows_stochastic: bool,
    pub reversible: bool,
    pub stationary_matches_product_form: bool,
    pub stationary_floor: bool,
    pub mixing_time_within_bound: bool,
    pub gershgorin_floor: bool,
    /// Absent when the state space is too large for exact conductance.
    pub cheeger_sandwich: Option<bool>,
}

impl Checks {
    pub fn all_pass(&self) -> bool {
        self.rows_stochastic
            && self.reversible
            && self.stationary_matches_product_form
            && self.stationary_floor
            && self.mixing_time_within_bound
            && self.gershgorin_floor
            && self.cheeger_sandwich != Some(false)
    }
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub num_links: usize,
    pub num_states: usize,
    pub mode: ChainMode,
    pub weights: Vec<f64>,
    /// Independent sets as 1-based link ids, in state order.
    pub states: Vec<Vec<usize>>,
    pub stationary: Vec<f64>,
    pub spectral: SpectralReport,
    pub conductance: Option<Conductance>,
    pub checks: Checks,
    pub all_checks_pass: bool,
}

const NOTE: &str = "use `csma simulate` for networks of this size";

fn resolve_weights(cfg: &AnalyzeConfig, n: usize) -> Result<Vec<f64>, CliError> {
    match (&cfg.weights, &cfg.queues) {
        (Some(w), None) => {
            if w.len() != n {
                return Err(config_err("weights", format!("expected {n} values, got {}", w.len())));
            }
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(config_err("weights", "weights must be finite and nonnegative"));
            }
            Ok(w.clone())
        }
        (None, Some(q)) => {
            if q.len() != n {
                return Err(config_err("queues", format!("expected {n} values, got {}", q.len())));
            }
            let spec = cfg
                .weight
                .as_ref()
                .ok_or_else(|| config_err("weight", "queues need a weight function"))?;
            let f = WeightFunction::from_name(&spec.kind, spec.theta).map_err(|e| config_err("weight.kind", e))?;
            let wcfg = WeightConfig::new(f, spec.epsilon, n, spec.use_wmin).map_err(|e| config_err("weight", e))?;
            Ok(wcfg.effective_weights(q))
        }
        _ => Err(config_err("analyze", "give exactly one of weights or queues")),
    }
}

/// Exact spectral and conductance analysis of one chain.
pub fn cmd_analyze(cfg: &AnalyzeConfig) -> Result<AnalysisReport, CliError> {
    let graph = cfg.graph.build().map_err(|e| config_err("graph", e))?;
    let n = graph.num_links();
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(CliError::Config(format!(
            "exact analysis needs at most {DEFAULT_ENUMERATION_CAP} links, the graph has {n}; {NOTE}"
        )));
    }
    let states = enumerate_independent_sets_with_cap(&graph, DEFAULT_ENUMERATION_CAP)
        .map_err(|e| CliError::Config(format!("{e}; {NOTE}")))?;
    if states.len() > MAX_DENSE_STATES {
        return Err(CliError::Config(format!(
            "exact analysis needs at most {MAX_DENSE_STATES} schedules, the graph has {}; {NOTE}",
            states.len()
        )));
    }
    let weights = resolve_weights(cfg, n)?;
    let model = match cfg.mode {
        ChainMode::Single => transition_matrix_single(&graph, &weights),
        ChainMode::Multi => {
            let mac = cfg.mac.build()?;
            let decisions = enumerate_decision_distribution(&graph, mac.mechanism, mac.window)
                .map_err(|e| CliError::Config(format!("{e}; {NOTE}")))?;
            transition_matrix_multi(&graph, &weights, &decisions)
        }
    }
    .map_err(|e| CliError::Config(format!("{e}; {NOTE}")))?;
    let spectral = slem(&model).map_err(|e| CliError::Runtime(e.to_string()))?;
    let conductance = if model.num_states() <= MAX_CONDUCTANCE_STATES {
        Some(conductance(&model).map_err(|e| CliError::Runtime(e.to_string()))?)
    } else {
        None
    };
    let pi = product_form(&model.states, &weights);
    let next = model.evolve(&pi);
    let fixed_point_error = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let w_max = model.max_weight();
    let floor = 1.0 / (model.num_states() as f64 * (n as f64 * w_max).exp());
    let checks = Checks {
        rows_stochastic: model.max_row_sum_error() < 1e-9,
        reversible: model.detailed_balance_residual() < 1e-9,
        stationary_matches_product_form: fixed_point_error < 1e-9,
        stationary_floor: pi.iter().all(|&p| p >= floor * (1.0 - 1e-12)),
        mixing_time_within_bound: spectral.within_bound(),
        gershgorin_floor: spectral.lambda_min >= gershgorin_floor(&model) - 1e-10,
        cheeger_sandwich: conductance
            .as_ref()
            .map(|c| cheeger_sandwich_holds(c.phi, spectral.lambda2, 1e-9)),
    };
    Ok(AnalysisReport {
        num_links: n,
        num_states: model.num_states(),
        mode: cfg.mode,
        states: model.states.iter().map(|s| s.ids()).collect(),
        stationary: model.stationary.clone(),
        weights,
        spectral,
        conductance,
        all_checks_pass: checks.all_pass(),
        checks,
    })
}
