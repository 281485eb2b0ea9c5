//! Queue-length weight functions and the effective-weight rule.
//!
//! All logarithms are natural. Several routines work in `L = ln(1 + q)`
//! coordinates so that astronomically large queue lengths (as they appear
//! in the adiabatic thresholds) stay representable.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// The weight-function family `f(q)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightFunction {
    /// `ln(1+x) / ln(e + ln(1+x))`.
    LogOverLogLog,
    /// `ln(1+x)^(1-θ)`, `0 < θ < 1`.
    LogPower { theta: f64 },
    /// `ln ln(e + x)`.
    LogLog,
    /// `x`.
    Linear,
    /// `√x`.
    Sqrt,
}

impl WeightFunction {
    pub const NAMES: [&'static str; 5] = ["LOG_OVER_LOGLOG", "LOG_POWER", "LOGLOG", "LINEAR", "SQRT"];

    /// Parses a config name. `theta` is required for `LOG_POWER` and ignored otherwise.
    pub fn from_name(kind: &str, theta: Option<f64>) -> Result<Self> {
        let f = match kind.to_ascii_uppercase().as_str() {
            "LOG_OVER_LOGLOG" => Self::LogOverLogLog,
            "LOG_POWER" => Self::LogPower {
                theta: theta.ok_or_else(|| {
                    Error::InvalidParameter("LOG_POWER needs weight.theta".into())
                })?,
            },
            "LOGLOG" => Self::LogLog,
            "LINEAR" => Self::Linear,
            "SQRT" => Self::Sqrt,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown weight kind {other:?}; expected one of {:?}",
                    Self::NAMES
                )))
            }
        };
        f.validate()?;
        Ok(f)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LogOverLogLog => "LOG_OVER_LOGLOG",
            Self::LogPower { .. } => "LOG_POWER",
            Self::LogLog => "LOGLOG",
            Self::Linear => "LINEAR",
            Self::Sqrt => "SQRT",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::LogPower { theta } = *self {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "LOG_POWER theta must lie in (0, 1), got {theta}"
                )));
            }
        }
        Ok(())
    }

    /// Members of the strictly concave log family (the throughput-optimal candidates).
    pub fn is_log_family(&self) -> bool {
        matches!(self, Self::LogOverLogLog | Self::LogPower { .. } | Self::LogLog)
    }

    pub fn f(&self, q: f64) -> f64 {
        debug_assert!(q >= 0.0);
        match *self {
            Self::LogOverLogLog => {
                let l = q.ln_1p();
                l / (E + l).ln()
            }
            Self::LogPower { theta } => q.ln_1p().powf(1.0 - theta),
            Self::LogLog => (E + q).ln().ln(),
            Self::Linear => q,
            Self::Sqrt => q.sqrt(),
        }
    }

    /// Analytic derivative. `+∞` where the derivative blows up (`q = 0` for
    /// `LOG_POWER` and `SQRT`).
    pub fn f_prime(&self, q: f64) -> f64 {
        debug_assert!(q >= 0.0);
        match *self {
            Self::LogOverLogLog => {
                let l = q.ln_1p();
                let g = (E + l).ln();
                (g - l / (E + l)) / (g * g * (1.0 + q))
            }
            Self::LogPower { theta } => (1.0 - theta) * q.ln_1p().powf(-theta) / (1.0 + q),
            Self::LogLog => 1.0 / ((E + q) * (E + q).ln()),
            Self::Linear => 1.0,
            Self::Sqrt => 0.5 / q.sqrt(),
        }
    }

    /// `f⁻¹(w)`: closed form where one exists, otherwise a bracketed
    /// bisection polished by Newton steps (relative tolerance 1e-12).
    pub fn f_inverse(&self, w: f64) -> f64 {
        debug_assert!(w >= 0.0);
        match *self {
            Self::Linear => w,
            Self::Sqrt => w * w,
            Self::LogLog => w.exp().exp() - E,
            _ => self.ln1p_inverse(w).exp_m1(),
        }
    }

    /// `ln(1 + f⁻¹(w))`, finite even when `f⁻¹(w)` overflows.
    pub fn ln1p_inverse(&self, w: f64) -> f64 {
        debug_assert!(w >= 0.0);
        if w == 0.0 {
            return 0.0;
        }
        match *self {
            Self::LogOverLogLog => solve_log_over_loglog(w),
            Self::LogPower { theta } => w.powf(1.0 / (1.0 - theta)),
            Self::LogLog => {
                // 1 + e^{e^w} - e = e^{e^w} (1 - (e-1) e^{-e^w})
                let ew = w.exp();
                ew + (-(E - 1.0) * (-ew).exp()).ln_1p()
            }
            Self::Linear => w.ln_1p(),
            Self::Sqrt => (w * w).ln_1p(),
        }
    }

    /// `f(e^L - 1)` evaluated from `L = ln(1+q)`.
    pub fn f_from_ln1p(&self, l: f64) -> f64 {
        match *self {
            Self::LogOverLogLog => l / (E + l).ln(),
            Self::LogPower { theta } => l.powf(1.0 - theta),
            Self::LogLog => ln_e_plus_q(l).ln(),
            Self::Linear => l.exp_m1(),
            Self::Sqrt => l.exp_m1().sqrt(),
        }
    }

    /// `ln f'(e^L - 1)` evaluated from `L = ln(1+q)`.
    pub fn ln_f_prime_from_ln1p(&self, l: f64) -> f64 {
        match *self {
            Self::LogOverLogLog => {
                let g = (E + l).ln();
                ((g - l / (E + l)) / (g * g)).ln() - l
            }
            Self::LogPower { theta } => (1.0 - theta).ln() - theta * l.ln() - l,
            Self::LogLog => {
                let s = ln_e_plus_q(l);
                -s - s.ln()
            }
            Self::Linear => 0.0,
            Self::Sqrt => -std::f64::consts::LN_2 - 0.5 * ln_q(l),
        }
    }

    /// The growth function `g` in `f = ln(1+x)/g(x)`, as a function of `L = ln(1+x)`.
    pub fn growth_from_ln1p(&self, l: f64) -> Option<f64> {
        match *self {
            Self::LogOverLogLog => Some((E + l).ln()),
            Self::LogPower { theta } => Some(l.powf(theta)),
            _ => None,
        }
    }

    /// `ln(1 + g⁻¹(y))`.
    pub fn growth_inverse_ln1p(&self, y: f64) -> Option<f64> {
        match *self {
            Self::LogOverLogLog => Some(y.exp() - E),
            Self::LogPower { theta } => Some(y.powf(1.0 / theta)),
            _ => None,
        }
    }
}

/// `ln(e + q)` from `L = ln(1+q)`.
fn ln_e_plus_q(l: f64) -> f64 {
    l + ((E - 1.0) * (-l).exp()).ln_1p()
}

/// `ln q` from `L = ln(1+q)`.
pub(crate) fn ln_q(l: f64) -> f64 {
    l + (-(-l).exp_m1()).ln()
}

/// Solves `L / ln(e + L) = w` for `L >= 0`.
fn solve_log_over_loglog(w: f64) -> f64 {
    let h = |l: f64| l / (E + l).ln();
    let dh = |l: f64| {
        let g = (E + l).ln();
        (g - l / (E + l)) / (g * g)
    };
    // ln(e + L) >= 1 gives L >= w.
    let mut lo = w;
    let mut hi = 2.0 * w.max(1.0);
    while h(hi) < w {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < w {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let mut l = 0.5 * (lo + hi);
    for _ in 0..3 {
        let step = (h(l) - w) / dh(l);
        if !step.is_finite() {
            break;
        }
        l -= step;
    }
    l
}

/// Weight function plus the parameters of the `w_min` floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightConfig {
    pub function: WeightFunction,
    pub epsilon: f64,
    pub num_links: usize,
    pub use_wmin: bool,
}

impl WeightConfig {
    pub fn new(function: WeightFunction, epsilon: f64, num_links: usize, use_wmin: bool) -> Result<Self> {
        function.validate()?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if num_links == 0 {
            return Err(Error::InvalidParameter("num_links must be positive".into()));
        }
        Ok(Self {
            function,
            epsilon,
            num_links,
            use_wmin,
        })
    }

    /// `(ε / 2N) · f(q_max)`.
    pub fn w_min(&self, q_max: u64) -> f64 {
        self.floor_factor() * self.function.f(q_max as f64)
    }

    pub fn floor_factor(&self) -> f64 {
        self.epsilon / (2.0 * self.num_links as f64)
    }

    pub fn effective_weight(&self, q_l: u64, q_max: u64) -> Result<f64> {
        if q_l > q_max {
            return Err(Error::QueueAboveMax { q_l, q_max });
        }
        Ok(self.effective_weight_unchecked(q_l, q_max))
    }

    #[inline]
    fn effective_weight_unchecked(&self, q_l: u64, q_max: u64) -> f64 {
        let w = self.function.f(q_l as f64);
        if self.use_wmin {
            w.max(self.w_min(q_max))
        } else {
            w
        }
    }

    /// `w̃` for every link, with `q_max` taken from the queue vector itself.
    pub fn effective_weights(&self, queues: &[u64]) -> Vec<f64> {
        let mut out = vec![0.0; queues.len()];
        self.effective_weights_into(queues, &mut out);
        out
    }

    pub fn effective_weights_into(&self, queues: &[u64], out: &mut [f64]) {
        let q_max = queues.iter().copied().max().unwrap_or(0);
        for (w, &q) in out.iter_mut().zip(queues) {
            *w = self.effective_weight_unchecked(q, q_max);
        }
    }
}

/// Outcome of a `(1 ± ε)` sandwich scan for one weight function.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichScan {
    /// First sampled `q` from which every later sample satisfied the sandwich.
    pub threshold: Option<f64>,
    pub samples: usize,
    pub violations: usize,
}

/// Scans `q` geometrically from `max(m1, 1)` to `q_limit` and checks
/// `(1-ε)f(q) <= f(q-m1) <= f(q+m2) <= (1+ε)f(q)`.
pub fn sandwich_scan(f: &WeightFunction, m1: f64, m2: f64, eps: f64, q_limit: f64) -> SandwichScan {
    let mut q = m1.max(1.0);
    let mut threshold = None;
    let (mut samples, mut violations) = (0, 0);
    while q <= q_limit {
        let fq = f.f(q);
        let ok = (1.0 - eps) * fq <= f.f(q - m1) && f.f(q - m1) <= f.f(q + m2) && f.f(q + m2) <= (1.0 + eps) * fq;
        samples += 1;
        if ok {
            threshold.get_or_insert(q);
        } else {
            violations += 1;
            threshold = None;
        }
        q *= 1.05;
    }
    SandwichScan {
        threshold,
        samples,
        violations,
    }
}
