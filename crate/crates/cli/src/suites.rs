use std::f64::consts::E;

use csma_core::analysis::{
    cheeger_sandwich_holds, conductance, distance_pi_norm, gershgorin_floor, mixing_bound_multi, mixing_bound_single,
    slem, MAX_CONDUCTANCE_STATES,
};
use csma_core::glauber::{product_form, transition_matrix_multi, transition_matrix_single};
use csma_core::graph::enumerate_independent_sets;
use csma_core::mac::enumerate_decision_distribution;
use csma_core::weights::sandwich_scan;
use csma_core::{ChainModel, ConflictGraph, Mechanism, SeededRng, WeightFunction};
use rand::Rng;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// `θ` of the `LOG_POWER` member under test. Values outside `(0, 1)`
    /// are accepted on purpose so that a broken weight function can be injected.
    pub theta: f64,
    pub seed: u64,
    /// Random instances per suite.
    pub instances: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            seed: 0,
            instances: 200,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub passed: bool,
    /// First failing case, if any.
    pub first_failure: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub theta: f64,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

#[derive(Default)]
struct Tally {
    cases: usize,
    failures: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn finish(self, name: &'static str) -> SuiteResult {
        SuiteResult {
            name,
            cases: self.cases,
            passed: self.failures == 0 && self.cases > 0,
            failures: self.failures,
            first_failure: self.first_failure,
        }
    }
}

fn random_instance(rng: &mut SeededRng, max_n: usize, w_hi: f64) -> (ConflictGraph, Vec<f64>) {
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(0.0..0.8);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    let w = (0..n).map(|_| rng.random_range(0.0..w_hi)).collect();
    (ConflictGraph::new(n, &edges).expect("valid edges"), w)
}

fn fixed_point_error(model: &ChainModel) -> f64 {
    let pi = product_form(&model.states, &model.weights);
    model
        .evolve(&pi)
        .iter()
        .zip(&pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Zero at zero, increasing, strictly concave, the `(1 ± ε)` sandwich and
/// the derivative bound `f'(q) <= 1/(1+q)` for the log family.
fn weight_function_properties(theta: f64) -> SuiteResult {
    let mut tally = Tally::default();
    let grid: Vec<f64> = std::iter::successors(Some(0.0f64), |q| Some(q * 1.5 + 1.0))
        .take_while(|&q| q <= 1e9)
        .collect();
    for f in [
        WeightFunction::LogOverLogLog,
        WeightFunction::LogPower { theta },
        WeightFunction::LogLog,
    ] {
        let name = f.name();
        tally.check(f.f(0.0) == 0.0, || format!("{name}: f(0) = {}", f.f(0.0)));
        for &q in &grid {
            let h = (q * 0.1).max(1.0);
            let (a, b, c) = (f.f(q), f.f(q + h), f.f(q + 2.0 * h));
            tally.check(a.is_finite() && b > a, || format!("{name}: not increasing at q = {q}"));
            tally.check(c - b < b - a, || format!("{name}: not strictly concave at q = {q}"));
            if q >= E - 1.0 {
                tally.check(f.f_prime(q) <= (1.0 + 1e-12) / (1.0 + q), || {
                    format!("{name}: f'({q}) = {} exceeds 1/(1+q)", f.f_prime(q))
                });
            }
        }
        let scan = sandwich_scan(&f, 5.0, 5.0, 0.1, 1e9);
        tally.check(scan.threshold.is_some(), || format!("{name}: sandwich fails up to q = 1e9"));
    }
    tally.finish("weight_function_properties")
}

fn stationarity_single(rng: &mut SeededRng, instances: usize) -> SuiteResult {
    let mut tally = Tally::default();
    for _ in 0..instances {
        let (g, w) = random_instance(rng, 8, 3.0);
        let model = transition_matrix_single(&g, &w).expect("small instance");
        let err = fixed_point_error(&model);
        tally.check(err <= 1e-9 && model.detailed_balance_residual() <= 1e-9, || {
            format!("N = {}, w = {w:?}: fixed-point error {err:e}", g.num_links())
        });
    }
    tally.finish("stationarity_single_site")
}

fn stationarity_multi(rng: &mut SeededRng, instances: usize) -> SuiteResult {
    let mut tally = Tally::default();
    for k in 0..instances {
        let (g, w) = random_instance(rng, 6, 3.0);
        let (mechanism, window) = if k % 2 == 0 {
            (Mechanism::BernoulliHalf, 1)
        } else {
            (Mechanism::Windowed, 4)
        };
        let d = enumerate_decision_distribution(&g, mechanism, window).expect("small instance");
        let model = transition_matrix_multi(&g, &w, &d).expect("small instance");
        let err = fixed_point_error(&model);
        tally.check(err <= 1e-9 && model.detailed_balance_residual() <= 1e-9, || {
            format!("{} N = {}, w = {w:?}: fixed-point error {err:e}", mechanism.name(), g.num_links())
        });
    }
    tally.finish("stationarity_multi_site")
}

fn mixing_bounds(rng: &mut SeededRng, instances: usize, multi: bool) -> SuiteResult {
    let mut tally = Tally::default();
    for _ in 0..instances {
        let (g, w) = random_instance(rng, 6, 2.0);
        let n = g.num_links();
        let w_max = w.iter().copied().fold(0.0, f64::max);
        let (model, bound) = if multi {
            let d = enumerate_decision_distribution(&g, Mechanism::BernoulliHalf, 1).expect("small instance");
            (transition_matrix_multi(&g, &w, &d), mixing_bound_multi(n, w_max))
        } else {
            (transition_matrix_single(&g, &w), mixing_bound_single(n, w_max))
        };
        let rep = slem(&model.expect("small instance")).expect("reversible");
        tally.check(rep.slem <= 1.0 - (-bound.ln).exp(), || {
            format!("N = {n}, w = {w:?}: sigma {} above the bound", rep.slem)
        });
    }
    tally.finish(if multi { "mixing_bound_multi_site" } else { "mixing_bound_single_site" })
}

/// `‖π₁ − π₂‖_{1/π₂} <= 2α` when `e^{−α} <= π₁/π₂ <= e^{α}`, `α < 1`.
fn drift_bound(rng: &mut SeededRng, instances: usize) -> SuiteResult {
    let mut tally = Tally::default();
    for _ in 0..instances {
        let (g, w) = random_instance(rng, 8, 3.0);
        let scale = rng.random_range(0.0..0.2);
        let w2: Vec<f64> = w.iter().map(|x| x + scale * rng.random_range(-1.0..1.0)).collect();
        let states = enumerate_independent_sets(&g).expect("small instance");
        let (p1, p2) = (product_form(&states, &w), product_form(&states, &w2));
        let alpha = p1.iter().zip(&p2).map(|(a, b)| (b / a).ln().abs()).fold(0.0, f64::max);
        if alpha >= 1.0 {
            continue;
        }
        let shift: f64 = w.iter().zip(&w2).map(|(a, b)| (a - b).abs()).sum();
        let d = distance_pi_norm(&p1, &p2).expect("same support");
        tally.check(d <= 2.0 * alpha + 1e-12 && alpha <= 2.0 * shift + 1e-12, || {
            format!("N = {}: distance {d}, alpha {alpha}, weight shift {shift}", g.num_links())
        });
    }
    tally.finish("stationary_drift_bound")
}

fn conductance_sandwich(rng: &mut SeededRng, instances: usize) -> SuiteResult {
    let mut tally = Tally::default();
    let mut done = 0;
    while done < instances {
        let (g, w) = random_instance(rng, 6, 2.0);
        let model = transition_matrix_single(&g, &w).expect("small instance");
        if model.num_states() > MAX_CONDUCTANCE_STATES {
            continue;
        }
        done += 1;
        let phi = conductance(&model).expect("small instance").phi;
        let rep = slem(&model).expect("reversible");
        tally.check(cheeger_sandwich_holds(phi, rep.lambda2, 1e-9), || {
            format!("N = {}: phi {phi}, lambda2 {}", g.num_links(), rep.lambda2)
        });
        tally.check(rep.lambda_min >= gershgorin_floor(&model) - 1e-10, || {
            format!("N = {}: lambda_min {} below the diagonal floor", g.num_links(), rep.lambda_min)
        });
    }
    tally.finish("conductance_sandwich")
}

/// Runs every suite; `passed` is false if any suite has a failing case.
pub fn cmd_verify(opts: &VerifyOptions) -> VerifyReport {
    let mut rng = SeededRng::new(opts.seed);
    let k = opts.instances;
    let suites = vec![
        weight_function_properties(opts.theta),
        stationarity_single(&mut rng, k),
        stationarity_multi(&mut rng, k),
        mixing_bounds(&mut rng, k, false),
        mixing_bounds(&mut rng, k, true),
        drift_bound(&mut rng, k),
        conductance_sandwich(&mut rng, k / 2),
    ];
    VerifyReport {
        passed: suites.iter().all(|s| s.passed),
        theta: opts.theta,
        seed: opts.seed,
        suites,
    }
}
