//! Exact analysis of enumerated chains: spectrum, conductance, distances,
//! the adiabatic condition, and the stability thresholds.
//!
//! Mixing-time bounds and thresholds overflow `f64` by thousands of orders
//! of magnitude at realistic parameters, so they are carried as natural
//! logarithms (and, for the thresholds, logarithms of logarithms).

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glauber::{transition_matrix_multi, transition_matrix_single, ChainKind, ChainModel};
use crate::graph::{ConflictGraph, Schedule};
use crate::weights::{ln_q, WeightConfig, WeightFunction};

/// Exhaustive conductance search is exponential in the state count.
pub const MAX_CONDUCTANCE_STATES: usize = 22;
/// Tolerance on the detailed-balance residual accepted by [`slem`].
pub const REVERSIBILITY_TOLERANCE: f64 = 1e-9;
/// Linear values at or above this are reported as absent.
pub const LINEAR_LIMIT: f64 = 1e300;

/// A positive quantity `X > 1` stored as `ln X` and `ln ln X`.
///
/// `ln` may be `+∞` when only `ln_ln` is representable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Magnitude {
    pub ln: f64,
    pub ln_ln: f64,
    /// `X` itself when it is below [`LINEAR_LIMIT`].
    pub value: Option<f64>,
}

impl Magnitude {
    pub fn from_ln(ln: f64) -> Self {
        Self {
            ln,
            ln_ln: ln.ln(),
            value: linear(ln),
        }
    }

    pub fn from_ln_ln(ln_ln: f64) -> Self {
        let ln = ln_ln.exp();
        Self {
            ln,
            ln_ln,
            value: linear(ln),
        }
    }

    /// Orders by `ln_ln`, which stays finite longest.
    pub fn max(self, other: Self) -> Self {
        if other.ln_ln > self.ln_ln {
            other
        } else {
            self
        }
    }
}

fn linear(ln: f64) -> Option<f64> {
    let v = ln.exp();
    (v < LINEAR_LIMIT).then_some(v)
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `16^N · exp(4N·w̃_max)`.
pub fn mixing_bound_single(n: usize, w_max: f64) -> Magnitude {
    let n = n as f64;
    Magnitude::from_ln(n * 16f64.ln() + 4.0 * n * w_max)
}

/// `(64^N / 2) · exp(4N·w̃_max)`.
pub fn mixing_bound_multi(n: usize, w_max: f64) -> Magnitude {
    let n = n as f64;
    Magnitude::from_ln(n * 64f64.ln() - LN_2 + 4.0 * n * w_max)
}

pub fn mixing_bound(kind: ChainKind, n: usize, w_max: f64) -> Magnitude {
    match kind {
        ChainKind::SingleSite => mixing_bound_single(n, w_max),
        ChainKind::MultiSite => mixing_bound_multi(n, w_max),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub kind: ChainKind,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub lambda2: f64,
    pub lambda_min: f64,
    pub slem: f64,
    pub mixing_time: f64,
    pub bound_single: Magnitude,
    pub bound_multi: Magnitude,
}

impl SpectralReport {
    /// The bound that applies to the analysed chain.
    pub fn bound(&self) -> Magnitude {
        match self.kind {
            ChainKind::SingleSite => self.bound_single,
            ChainKind::MultiSite => self.bound_multi,
        }
    }

    /// `T <= bound`, compared in log scale.
    pub fn within_bound(&self) -> bool {
        self.mixing_time.ln() <= self.bound().ln + 1e-9
    }
}

/// Full spectrum via the symmetric similarity `D^{1/2} P D^{-1/2}`, `D = diag π`.
pub fn slem(model: &ChainModel) -> Result<SpectralReport> {
    let residual = model.detailed_balance_residual();
    if residual > REVERSIBILITY_TOLERANCE {
        return Err(Error::NotReversible(residual));
    }
    let r = model.num_states();
    let sq: Vec<f64> = model.stationary.iter().map(|p| p.sqrt()).collect();
    let s = DMatrix::from_fn(r, r, |i, j| sq[i] * model.kernel[(i, j)] / sq[j]);
    let sym = (&s + s.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let lambda2 = eigenvalues.get(1).copied().unwrap_or(0.0);
    let lambda_min = *eigenvalues.last().expect("at least the empty schedule");
    let slem = if r > 1 { lambda2.max(lambda_min.abs()) } else { 0.0 };
    let w_max = model.max_weight();
    Ok(SpectralReport {
        kind: model.kind,
        lambda2,
        lambda_min,
        slem,
        mixing_time: 1.0 / (1.0 - slem),
        bound_single: mixing_bound_single(model.num_links, w_max),
        bound_multi: mixing_bound_multi(model.num_links, w_max),
        eigenvalues,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conductance {
    pub phi: f64,
    /// State indices of a minimizing set `B`.
    pub minimizing_set: Vec<usize>,
}

/// `F(B) = Σ_{i∈B, j∉B} π(i) p_ij`.
pub fn boundary_flow(model: &ChainModel, in_set: &[bool]) -> f64 {
    let r = model.num_states();
    let mut f = 0.0;
    for i in (0..r).filter(|&i| in_set[i]) {
        for j in (0..r).filter(|&j| !in_set[j]) {
            f += model.stationary[i] * model.kernel[(i, j)];
        }
    }
    f
}

/// Exact `min F(B)/π(B)` over nonempty `B` with `π(B) <= 1/2`.
///
/// Walks all subsets in Gray-code order, updating `F` and `π(B)` in `O(r)`
/// per toggle, then recomputes `F` directly for the minimizer.
pub fn conductance(model: &ChainModel) -> Result<Conductance> {
    let r = model.num_states();
    if r > MAX_CONDUCTANCE_STATES {
        return Err(Error::StateSpaceTooLarge {
            what: "exact conductance",
            states: r,
            cap: MAX_CONDUCTANCE_STATES,
        });
    }
    let pi = &model.stationary;
    let flow = DMatrix::from_fn(r, r, |i, j| pi[i] * model.kernel[(i, j)]);
    let exit: Vec<f64> = (0..r).map(|k| pi[k] - flow[(k, k)]).collect();
    // to_b[m] = Σ_{j∈B, j≠m} flow(m, j); into_b[m] = Σ_{i∈B, i≠m} flow(i, m).
    let mut to_b = vec![0.0; r];
    let mut into_b = vec![0.0; r];
    let mut in_b = vec![false; r];
    let (mut f, mut pi_b) = (0.0f64, 0.0f64);
    let (mut best, mut best_code) = (f64::INFINITY, 0u32);
    let mut code = 0u32;
    for step in 1u32..(1u32 << r) {
        let k = step.trailing_zeros() as usize;
        let sign = if in_b[k] { -1.0 } else { 1.0 };
        f += sign * (exit[k] - to_b[k] - into_b[k]);
        pi_b += sign * pi[k];
        in_b[k] = !in_b[k];
        for m in (0..r).filter(|&m| m != k) {
            to_b[m] += sign * flow[(m, k)];
            into_b[m] += sign * flow[(k, m)];
        }
        code ^= 1 << k;
        if pi_b > 0.0 && pi_b <= 0.5 + 1e-9 {
            let ratio = f / pi_b;
            if ratio < best {
                best = ratio;
                best_code = code;
            }
        }
    }
    let set: Vec<bool> = (0..r).map(|i| best_code >> i & 1 == 1).collect();
    let pi_set: f64 = (0..r).filter(|&i| set[i]).map(|i| pi[i]).sum();
    Ok(Conductance {
        phi: boundary_flow(model, &set) / pi_set,
        minimizing_set: (0..r).filter(|&i| set[i]).collect(),
    })
}

/// `1 − 2φ <= λ₂ <= 1 − φ²/2`, with slack `tol`.
pub fn cheeger_sandwich_holds(phi: f64, lambda2: f64, tol: f64) -> bool {
    1.0 - 2.0 * phi <= lambda2 + tol && lambda2 <= 1.0 - phi * phi / 2.0 + tol
}

/// `−1 + 2 min_i P_ii`.
pub fn gershgorin_floor(model: &ChainModel) -> f64 {
    let min_diag = model.kernel.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
    -1.0 + 2.0 * min_diag
}

fn check_probability(p: &[f64], name: &str) -> Result<()> {
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 || p.iter().any(|x| !(*x >= -1e-15)) {
        return Err(Error::InvalidDistribution(format!("{name} sums to {total}")));
    }
    Ok(())
}

/// Half the L1 distance between two probability vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    check_probability(p, "p")?;
    check_probability(q, "q")?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `sqrt(Σ z(i)² / π(i))`.
pub fn pi_norm_inv(z: &[f64], pi: &[f64]) -> Result<f64> {
    if z.len() != pi.len() {
        return Err(Error::LengthMismatch {
            expected: pi.len(),
            got: z.len(),
        });
    }
    if let Some(i) = pi.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::Domain(format!("π({i}) = {} is not positive", pi[i])));
    }
    Ok(z.iter().zip(pi).map(|(z, p)| z * z / p).sum::<f64>().sqrt())
}

/// `‖μ − π‖_{1/π}`.
pub fn distance_pi_norm(mu: &[f64], pi: &[f64]) -> Result<f64> {
    let z: Vec<f64> = mu.iter().zip(pi).map(|(m, p)| m - p).collect();
    pi_norm_inv(&z, pi)
}

/// `ln α_t` for a given floor `w_min(t+1)`.
pub fn ln_alpha_t_from_wmin(config: &WeightConfig, w_min: f64) -> Result<f64> {
    let f = &config.function;
    // L0 = ln(1 + f⁻¹(w_min)); the shifted argument f⁻¹(w_min) − 1 has ln(1 + ·) = ln f⁻¹(w_min).
    let l0 = f.ln1p_inverse(w_min);
    if !(l0 >= LN_2) {
        return Err(Error::Domain(format!(
            "f⁻¹(w_min) = {} is below 1 for w_min = {w_min}",
            l0.exp_m1()
        )));
    }
    let shifted = ln_q(l0).max(0.0);
    Ok((2.0 * config.num_links as f64).ln() + f.ln_f_prime_from_ln1p(shifted))
}

/// `α_t = 2N · f'(f⁻¹(w_min(q_max_next)) − 1)`.
pub fn alpha_t(config: &WeightConfig, q_max_next: u64) -> Result<f64> {
    Ok(ln_alpha_t_from_wmin(config, config.w_min(q_max_next))?.exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct AdiabaticReport {
    pub alpha_t: f64,
    pub ln_alpha_t: f64,
    pub t_next_bound: Magnitude,
    /// `α_t · T_{t+1}`; `+∞` when it overflows.
    pub condition_lhs: f64,
    pub ln_condition_lhs: f64,
    pub delta: f64,
    pub satisfied: bool,
}

/// Evaluates `α_t · T_{t+1} <= δ/16` with `T_{t+1}` replaced by the mixing
/// bound of `kind` at `w̃_max = f(q_max)`.
pub fn adiabatic_condition(
    config: &WeightConfig,
    q_max: u64,
    delta: f64,
    kind: ChainKind,
) -> Result<AdiabaticReport> {
    adiabatic_condition_ln1p(config, (q_max as f64).ln_1p(), delta, kind)
}

/// [`adiabatic_condition`] with `q_max` given as `L = ln(1 + q_max)`.
pub fn adiabatic_condition_ln1p(
    config: &WeightConfig,
    l_max: f64,
    delta: f64,
    kind: ChainKind,
) -> Result<AdiabaticReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let w_max = config.function.f_from_ln1p(l_max);
    let ln_alpha = ln_alpha_t_from_wmin(config, config.floor_factor() * w_max)?;
    let bound = mixing_bound(kind, config.num_links, w_max);
    let ln_lhs = ln_alpha + bound.ln;
    Ok(AdiabaticReport {
        alpha_t: ln_alpha.exp(),
        ln_alpha_t: ln_alpha,
        t_next_bound: bound,
        condition_lhs: ln_lhs.exp(),
        ln_condition_lhs: ln_lhs,
        delta,
        satisfied: ln_lhs <= (delta / 16.0).ln(),
    })
}

fn check_threshold_params(n: usize, epsilon: f64, delta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// `ln ln(64 N 16^N / δ)`.
fn ln_ln_budget(n: f64, delta: f64) -> f64 {
    (64f64.ln() + n.ln() + n * 16f64.ln() - delta.ln()).ln()
}

/// Solves `L / ln(e + L) = W` for `ℓ = ln L`, given `ln W`.
fn ln_l_log_over_loglog(ln_w: f64) -> f64 {
    let mut ell = ln_w;
    for _ in 0..200 {
        let next = ln_w + ln_add_exp(1.0, ell).ln();
        if (next - ell).abs() <= 1e-16 * next.abs() {
            return next;
        }
        ell = next;
    }
    ell
}

/// The general threshold
/// `q_th = f⁻¹((2N/ε) · max{ln(64N16^N/δ), f(g⁻¹(16N²/ε))})`,
/// returned as the magnitude of `1 + q_th`.
pub fn q_threshold_general(n: usize, epsilon: f64, delta: f64, f: &WeightFunction) -> Result<Magnitude> {
    check_threshold_params(n, epsilon, delta)?;
    f.validate()?;
    let nf = n as f64;
    let y = 16.0 * nf * nf / epsilon;
    let ln_fg = match *f {
        WeightFunction::LogPower { theta } => (1.0 - theta) / theta * y.ln(),
        // ln(1 + g⁻¹(y)) = e^y − e and ln(e + that) = y.
        WeightFunction::LogOverLogLog => y + (-(1.0 - y).exp()).ln_1p() - y.ln(),
        _ => return Err(Error::UnsupportedKind("q_threshold")),
    };
    let ln_w = (2.0 * nf / epsilon).ln() + ln_ln_budget(nf, delta).max(ln_fg);
    let ell = match *f {
        WeightFunction::LogPower { theta } => ln_w / (1.0 - theta),
        _ => ln_l_log_over_loglog(ln_w),
    };
    Ok(Magnitude::from_ln_ln(ell))
}

/// Closed form for `LOG_POWER`:
/// `q_th = exp(max{(2N/ε) ln(64N16^N/δ), (2N/ε)(16N²/ε)^{1/θ}}^{1/(1−θ)})`,
/// returned as the magnitude of `1 + q_th`.
pub fn q_threshold_log_power(n: usize, epsilon: f64, delta: f64, theta: f64) -> Result<Magnitude> {
    check_threshold_params(n, epsilon, delta)?;
    WeightFunction::LogPower { theta }.validate()?;
    let nf = n as f64;
    let ln_scale = (2.0 * nf / epsilon).ln();
    let ln_inner = ln_scale + ln_ln_budget(nf, delta).max((16.0 * nf * nf / epsilon).ln() / theta);
    let ln_x = ln_inner / (1.0 - theta);
    // ln(1 + e^X) = X + ln(1 + e^{−X}).
    let x = ln_x.exp();
    let ell = ln_x + ((-x).exp().ln_1p() / x).ln_1p();
    Ok(Magnitude::from_ln_ln(ell))
}

/// `q_th` for the supported kinds: the closed form for `LOG_POWER`, the
/// general form for `LOG_OVER_LOGLOG`.
pub fn q_threshold(n: usize, epsilon: f64, delta: f64, f: &WeightFunction) -> Result<Magnitude> {
    match *f {
        WeightFunction::LogPower { theta } => q_threshold_log_power(n, epsilon, delta, theta),
        WeightFunction::LogOverLogLog => q_threshold_general(n, epsilon, delta, f),
        _ => Err(Error::UnsupportedKind("q_threshold")),
    }
}

/// `t* = [(2+q_th)^{ε/2N} 16^N ln((4/δ)(2(1+q_th))^{N/2})]^{1/(1−ε/2N)}`,
/// with `q_th` given as the magnitude of `1 + q_th`.
pub fn t_star(n: usize, epsilon: f64, delta: f64, q_th: Magnitude) -> Result<Magnitude> {
    check_threshold_params(n, epsilon, delta)?;
    let nf = n as f64;
    let a = epsilon / (2.0 * nf);
    let (l, ell) = (q_th.ln, q_th.ln_ln);
    // ln ln(2 + q_th), with ln(2 + q_th) = L + ln(1 + e^{−L}).
    let ln_term1 = a.ln()
        + if l.is_finite() {
            (l + (-l).exp().ln_1p()).ln()
        } else {
            ell
        };
    let ln_term2 = (nf * 16f64.ln()).ln();
    // ln((4/δ)(2(1+q_th))^{N/2}) = ln(4/δ) + (N/2)(ln 2 + L).
    let ln_inside = ln_add_exp((4.0 / delta).ln().ln(), (nf / 2.0).ln() + ell + (LN_2 * (-ell).exp()).ln_1p());
    let ln_term3 = ln_inside.ln();
    let ln_x = ln_add_exp(ln_add_exp(ln_term1, ln_term2), ln_term3);
    Ok(Magnitude::from_ln_ln(ln_x - (1.0 - a).ln()))
}

/// `B = max{q_th + t*, f⁻¹((N ln 2 + ln(2/δ)) / (ε/2))}`.
pub fn b_threshold(
    n: usize,
    epsilon: f64,
    delta: f64,
    f: &WeightFunction,
    q_th: Magnitude,
    t_star: Magnitude,
) -> Result<Magnitude> {
    check_threshold_params(n, epsilon, delta)?;
    let nf = n as f64;
    // ln ln q_th from L = ln(1 + q_th).
    let ln_ln_q = if q_th.ln.is_finite() {
        ln_q(q_th.ln).ln()
    } else {
        q_th.ln_ln
    };
    let first = if ln_ln_q.exp().is_finite() && t_star.ln.is_finite() {
        Magnitude::from_ln(ln_add_exp(ln_ln_q.exp(), t_star.ln))
    } else {
        Magnitude::from_ln_ln(ln_ln_q.max(t_star.ln_ln))
    };
    let l2 = f.ln1p_inverse((nf * LN_2 + (2.0 / delta).ln()) / (epsilon / 2.0));
    let ln_second = ln_q(l2);
    if ln_second > 0.0 {
        Ok(first.max(Magnitude::from_ln(ln_second)))
    } else {
        Ok(first)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationStep {
    pub mu: Vec<f64>,
    pub pi: Vec<f64>,
    /// `‖μ_t − π_t‖_TV`.
    pub tv: f64,
    /// `‖μ_{t+1} − π_t‖_{1/π_t}`; absent for the last step.
    pub a: Option<f64>,
}

/// Exact forward propagation of the single-site chain: `μ_t = μ_{t−1} P_t`,
/// where `P_t` and `π_t` use `weight_trace[t]` and `μ_0 = mu0`.
pub fn propagate_distribution(
    graph: &ConflictGraph,
    weight_trace: &[Vec<f64>],
    mu0: &[f64],
) -> Result<Vec<PropagationStep>> {
    propagate_with(graph, weight_trace, mu0, |w| transition_matrix_single(graph, w))
}

/// [`propagate_distribution`] for the multi-site chain under a fixed
/// decision distribution.
pub fn propagate_distribution_multi(
    graph: &ConflictGraph,
    weight_trace: &[Vec<f64>],
    mu0: &[f64],
    decision: &[(Schedule, f64)],
) -> Result<Vec<PropagationStep>> {
    propagate_with(graph, weight_trace, mu0, |w| transition_matrix_multi(graph, w, decision))
}

fn propagate_with(
    graph: &ConflictGraph,
    weight_trace: &[Vec<f64>],
    mu0: &[f64],
    build: impl Fn(&[f64]) -> Result<ChainModel>,
) -> Result<Vec<PropagationStep>> {
    let _ = graph;
    let mut out: Vec<PropagationStep> = Vec::with_capacity(weight_trace.len());
    let mut model: Option<ChainModel> = None;
    let mut mu = mu0.to_vec();
    for (t, w) in weight_trace.iter().enumerate() {
        if model.as_ref().is_none_or(|m| m.weights != *w) {
            model = Some(build(w)?);
        }
        let m = model.as_ref().expect("built above");
        if t == 0 {
            if mu.len() != m.num_states() {
                return Err(Error::LengthMismatch {
                    expected: m.num_states(),
                    got: mu.len(),
                });
            }
            check_probability(&mu, "mu0")?;
        } else {
            mu = m.evolve(&mu);
            let prev = out.last_mut().expect("t > 0");
            prev.a = Some(distance_pi_norm(&mu, &prev.pi)?);
        }
        out.push(PropagationStep {
            tv: tv_distance(&mu, &m.stationary)?,
            pi: m.stationary.clone(),
            mu: mu.clone(),
            a: None,
        });
    }
    Ok(out)
}

/// Smallest `t >= 1` with `Σ_{k=1}^t 1/T_k² >= ln(4/δ) + N(w_max(0) + ln 2)/2`,
/// where `mixing_times[k-1] = T_k`.
pub fn mixing_sum_warmup(mixing_times: &[f64], delta: f64, n: usize, w_max0: f64) -> Option<usize> {
    let target = (4.0 / delta).ln() + n as f64 * (w_max0 + LN_2) / 2.0;
    let mut sum = 0.0;
    for (k, t) in mixing_times.iter().enumerate() {
        sum += 1.0 / (t * t);
        if sum >= target {
            return Some(k + 1);
        }
    }
    None
}
