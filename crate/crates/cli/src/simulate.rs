use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use csma_core::sim::{run_basic, run_distributed};
use csma_core::TraceSummary;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentPlan, Mode, RunSpec};
use crate::{write_json, CliError};

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub kind: &'static str,
    pub rho: f64,
    pub seed: u64,
    /// Trace path relative to the output directory, `/`-separated.
    pub trace: String,
    #[serde(flatten)]
    pub summary: TraceSummary,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub num_links: usize,
    pub mode: Mode,
    pub mechanism: &'static str,
    pub window: u32,
    pub horizon: u64,
    pub epsilon: f64,
    pub use_wmin: bool,
    pub runs: Vec<RunSummary>,
}

fn run_one(plan: &ExperimentPlan, spec: &RunSpec, out: &Path) -> Result<RunSummary, CliError> {
    let wcfg = plan.weight_config(spec.kind);
    let arrivals = plan.arrivals(spec.rho)?;
    let sim = plan.sim_config(spec.seed);
    let trace = match plan.mode {
        Mode::Basic => run_basic(&plan.graph, &wcfg, &arrivals, &sim),
        Mode::Distributed => run_distributed(&plan.graph, &wcfg, &arrivals, &plan.mac, &sim),
    }
    .map_err(|e| CliError::Runtime(format!("run {}: {e}", spec.relative_dir().display())))?;
    let rel = spec.relative_dir();
    let dir = out.join(&rel);
    std::fs::create_dir_all(&dir)?;
    trace.write_csv(BufWriter::new(File::create(dir.join("trace.csv"))?))?;
    Ok(RunSummary {
        kind: spec.kind.name(),
        rho: spec.rho,
        seed: spec.seed,
        trace: format!(
            "{}/trace.csv",
            rel.components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/")
        ),
        summary: trace.summary(plan.epsilon).map_err(|e| CliError::Runtime(e.to_string()))?,
    })
}

/// Runs every combination of the plan on at most `workers` threads and
/// writes `<out>/<kind>/<rho>/<seed>/trace.csv` plus `<out>/summary.json`.
pub fn cmd_simulate(plan: &ExperimentPlan, out: &Path, workers: usize) -> Result<SweepSummary, CliError> {
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let specs = plan.runs();
    let runs = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| run_one(plan, spec, out))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary = SweepSummary {
        num_links: plan.graph.num_links(),
        mode: plan.mode,
        mechanism: plan.mac.mechanism.name(),
        window: plan.mac.window,
        horizon: plan.horizon,
        epsilon: plan.epsilon,
        use_wmin: plan.use_wmin,
        runs,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
