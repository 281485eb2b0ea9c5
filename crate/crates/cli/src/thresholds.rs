use std::f64::consts::LN_2;

use csma_core::analysis::{b_threshold, q_threshold, t_star};
use csma_core::{Magnitude, WeightFunction};
use serde::Serialize;

use crate::config::config_err;
use crate::CliError;

/// Log-scale intermediate quantities of the threshold formulas.
#[derive(Debug, Serialize)]
pub struct Terms {
    /// `ln(64 N 16^N / δ)`.
    pub budget: f64,
    /// `ln` of the concavity requirement: `(16N²/ε)^{1/θ}` for `LOG_POWER`,
    /// `(e^y − e)/y` with `y = 16N²/ε` for `LOG_OVER_LOGLOG`.
    pub ln_concavity: f64,
    /// `ln W` where `W = (2N/ε) max{budget, concavity}`; `q_th` solves `f` at scale `W`.
    pub ln_w: f64,
    /// `ε / 2N`, the exponent in `t*`.
    pub exponent: f64,
    /// `(N ln 2 + ln(2/δ)) / (ε/2)`, the weight whose inverse enters `B`.
    pub b_weight: f64,
}

#[derive(Debug, Serialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub kind: &'static str,
    pub theta: Option<f64>,
    /// Magnitude of `1 + q_th`.
    pub q_th: Magnitude,
    pub t_star: Magnitude,
    pub b: Magnitude,
    pub terms: Terms,
}

pub fn cmd_thresholds(
    n: usize,
    epsilon: f64,
    delta: f64,
    kind: &str,
    theta: Option<f64>,
) -> Result<ThresholdReport, CliError> {
    let f = WeightFunction::from_name(kind, theta).map_err(|e| config_err("kind", e))?;
    let q = q_threshold(n, epsilon, delta, &f).map_err(|e| config_err("thresholds", e))?;
    let t = t_star(n, epsilon, delta, q).map_err(|e| config_err("thresholds", e))?;
    let b = b_threshold(n, epsilon, delta, &f, q, t).map_err(|e| config_err("thresholds", e))?;
    let nf = n as f64;
    let budget = (64.0 * nf / delta).ln() + nf * 16f64.ln();
    let y = 16.0 * nf * nf / epsilon;
    let ln_concavity = match f {
        WeightFunction::LogPower { theta } => y.ln() / theta,
        _ => y + (-(1.0 - y).exp()).ln_1p() - y.ln(),
    };
    let ln_w = (2.0 * nf / epsilon).ln() + budget.ln().max(ln_concavity);
    Ok(ThresholdReport {
        n,
        epsilon,
        delta,
        kind: f.name(),
        theta: match f {
            WeightFunction::LogPower { theta } => Some(theta),
            _ => None,
        },
        q_th: q,
        t_star: t,
        b,
        terms: Terms {
            budget,
            ln_concavity,
            ln_w,
            exponent: epsilon / (2.0 * nf),
            b_weight: (nf * LN_2 + (2.0 / delta).ln()) / (epsilon / 2.0),
        },
    })
}
