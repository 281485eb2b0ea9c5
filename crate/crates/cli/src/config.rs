use std::path::{Path, PathBuf};

use csma_core::sim::expand_arrivals;
use csma_core::{
    ArrivalConfig, ConflictGraph, GraphSpec, MacConfig, Mechanism, Schedule, SimConfig, WeightConfig, WeightFunction,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Reads a JSON document, reporting parse errors with line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: cannot read: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| {
        // serde_json appends " at line L column C"; keep the message short.
        let msg = e.to_string();
        let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
        CliError::Config(format!("{origin}:{}:{}: {msg}", e.line(), e.column()))
    })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub graph: GraphSpec,
    pub weights: WeightsSection,
    pub arrival: ArrivalSection,
    pub sim: SimSection,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub mac: MacSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub kinds: Vec<String>,
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

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSection {
    pub rho: OneOrMany<f64>,
    /// `λ = ρ Σ c_k 1_{M_k}`; `links` are 1-based.
    #[serde(default)]
    pub components: Option<Vec<Component>>,
    /// Per-link rates, scaled by each `ρ`.
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub links: Vec<usize>,
    pub c: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub oracle_every: Option<u64>,
    #[serde(default)]
    pub frozen: bool,
    #[serde(default)]
    pub initial_queues: Option<Vec<u64>>,
}

fn default_record_every() -> u64 {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Basic,
    #[default]
    Distributed,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacSection {
    pub mechanism: String,
    pub window: u32,
    pub data_slot: f64,
    pub control_slot: f64,
}

impl Default for MacSection {
    fn default() -> Self {
        let d = MacConfig::default();
        Self {
            mechanism: d.mechanism.name().to_string(),
            window: d.window,
            data_slot: d.data_slot,
            control_slot: d.control_slot,
        }
    }
}

impl MacSection {
    pub fn build(&self) -> Result<MacConfig, CliError> {
        let mac = MacConfig {
            mechanism: Mechanism::from_name(&self.mechanism).map_err(|e| config_err("mac.mechanism", e))?,
            window: self.window,
            data_slot: self.data_slot,
            control_slot: self.control_slot,
        };
        mac.validate().map_err(|e| config_err("mac", e))?;
        Ok(mac)
    }
}

pub(crate) fn config_err(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

/// One `(kind, ρ, seed)` combination of a plan.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub kind: WeightFunction,
    pub rho: f64,
    pub seed: u64,
}

impl RunSpec {
    /// `<kind>/<rho>/<seed>`, relative to the output directory.
    pub fn relative_dir(&self) -> PathBuf {
        PathBuf::from(self.kind.name())
            .join(format!("{}", self.rho))
            .join(self.seed.to_string())
    }
}

/// A validated sweep over weight kinds, loads and seeds.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub graph: ConflictGraph,
    pub kinds: Vec<WeightFunction>,
    pub epsilon: f64,
    pub use_wmin: bool,
    pub rhos: Vec<f64>,
    arrival: ArrivalSection,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    pub record_every: u64,
    pub oracle_every: Option<u64>,
    pub frozen: bool,
    pub initial_queues: Option<Vec<u64>>,
    pub mode: Mode,
    pub mac: MacConfig,
}

impl ExperimentPlan {
    pub fn load(path: &Path, seed_base: u64) -> Result<Self, CliError> {
        let file: PlanFile = read_json(path)?;
        Self::from_file(file, seed_base).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_file(file: PlanFile, seed_base: u64) -> Result<Self, CliError> {
        let graph = file.graph.build().map_err(|e| config_err("graph", e))?;
        let n = graph.num_links();
        if file.weights.kinds.is_empty() {
            return Err(config_err("weights.kinds", "at least one weight kind is required"));
        }
        let mut kinds = Vec::new();
        for (i, k) in file.weights.kinds.iter().enumerate() {
            let f = WeightFunction::from_name(k, file.weights.theta).map_err(|e| config_err(&format!("weights.kinds[{i}]"), e))?;
            WeightConfig::new(f, file.weights.epsilon, n, file.weights.use_wmin).map_err(|e| config_err("weights", e))?;
            kinds.push(f);
        }
        let rhos = file.arrival.rho.to_vec();
        if rhos.is_empty() {
            return Err(config_err("arrival.rho", "at least one load is required"));
        }
        match (&file.arrival.components, &file.arrival.rates) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(config_err("arrival", "give exactly one of components or rates")),
        }
        let seeds: Vec<u64> = match (&file.sim.seeds, file.sim.seed) {
            (Some(s), None) => s.clone(),
            (None, Some(s)) => vec![s],
            (None, None) => vec![0],
            (Some(_), Some(_)) => return Err(config_err("sim", "give seed or seeds, not both")),
        };
        if seeds.is_empty() {
            return Err(config_err("sim.seeds", "at least one seed is required"));
        }
        let seeds = seeds
            .into_iter()
            .map(|s| s.checked_add(seed_base).ok_or_else(|| config_err("sim.seeds", "seed overflow")))
            .collect::<Result<Vec<_>, _>>()?;
        let plan = Self {
            graph,
            kinds,
            epsilon: file.weights.epsilon,
            use_wmin: file.weights.use_wmin,
            rhos,
            arrival: file.arrival,
            seeds,
            horizon: file.sim.horizon,
            record_every: file.sim.record_every,
            oracle_every: file.sim.oracle_every,
            frozen: file.sim.frozen,
            initial_queues: file.sim.initial_queues,
            mode: file.mode,
            mac: file.mac.build()?,
        };
        for (i, &rho) in plan.rhos.iter().enumerate() {
            let arrivals = plan.arrivals(rho)?;
            expand_arrivals(&plan.graph, &arrivals).map_err(|e| config_err(&format!("arrival.rho[{i}]"), e))?;
        }
        plan.sim_config(0).validate(n).map_err(|e| config_err("sim", e))?;
        Ok(plan)
    }

    pub fn arrivals(&self, rho: f64) -> Result<ArrivalConfig, CliError> {
        let n = self.graph.num_links();
        if let Some(rates) = &self.arrival.rates {
            if rates.len() != n {
                return Err(config_err(
                    "arrival.rates",
                    format!("expected {n} rates, got {}", rates.len()),
                ));
            }
            return Ok(ArrivalConfig::Rates(rates.iter().map(|r| rho * r).collect()));
        }
        let components = self.arrival.components.as_deref().unwrap_or_default();
        let mut out = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            let s = Schedule::from_ids(n, &c.links).map_err(|e| config_err(&format!("arrival.components[{i}]"), e))?;
            out.push((s, c.c));
        }
        Ok(ArrivalConfig::Structured { rho, components: out })
    }

    pub fn weight_config(&self, kind: WeightFunction) -> WeightConfig {
        WeightConfig::new(kind, self.epsilon, self.graph.num_links(), self.use_wmin).expect("validated at load")
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            horizon: self.horizon,
            seed,
            record_every: self.record_every,
            oracle_every: self.oracle_every,
            initial_queues: self.initial_queues.clone(),
            frozen: self.frozen,
            histogram: false,
        }
    }

    /// Every combination, ordered by kind, then load, then seed.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &rho in &self.rhos {
                for &seed in &self.seeds {
                    out.push(RunSpec { kind, rho, seed });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "graph": {"builtin": "path:3"},
        "weights": {"kinds": ["LOGLOG", "LOG_POWER"], "theta": 0.5},
        "arrival": {"rho": [0.2, 0.4], "rates": [0.5, 0.5, 0.5]},
        "sim": {"horizon": 10, "seeds": [1, 2]},
        "mode": "basic"
    }"#;

    #[test]
    fn parses_and_expands() {
        let file: PlanFile = parse_json(SMALL, "small").unwrap();
        let plan = ExperimentPlan::from_file(file, 10).unwrap();
        let runs = plan.runs();
        assert_eq!(runs.len(), 8);
        assert_eq!(plan.seeds, vec![11, 12]);
        assert_eq!(runs[0].relative_dir(), PathBuf::from("LOGLOG/0.2/11"));
        assert_eq!(runs[7].relative_dir(), PathBuf::from("LOG_POWER/0.4/12"));
        match plan.arrivals(0.4).unwrap() {
            ArrivalConfig::Rates(r) => assert_eq!(r, vec![0.2, 0.2, 0.2]),
            _ => panic!("rates expected"),
        }
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_json::<PlanFile>("{\n  \"graph\": {\"builtin\": \"path:3\"},\n  \"weights\": [,\n}", "bad.json")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json:3:15:"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let mut file: PlanFile = parse_json(SMALL, "small").unwrap();
        file.arrival.rho = OneOrMany::Many(vec![0.2, 3.0]);
        let msg = ExperimentPlan::from_file(file, 0).unwrap_err().to_string();
        assert!(msg.contains("arrival.rho[1]"), "{msg}");
        let mut file: PlanFile = parse_json(SMALL, "small").unwrap();
        file.weights.kinds.push("CUBIC".into());
        let msg = ExperimentPlan::from_file(file, 0).unwrap_err().to_string();
        assert!(msg.contains("weights.kinds[2]"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = SMALL.replace("\"mode\"", "\"modus\"");
        assert!(parse_json::<PlanFile>(&text, "x").is_err());
    }
}
