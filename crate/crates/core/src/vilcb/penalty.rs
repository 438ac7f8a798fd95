use ndarray::Array2;

use crate::error::{Error, Result};
use crate::mdp::Kernel;

/// Penalty constant `c_b` and confidence level `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub c_b: f64,
    pub delta: f64,
}

impl PenaltyConfig {
    pub const DEFAULT_DELTA: f64 = 0.1;
    pub const INFINITE_CB: f64 = 144.0;
    pub const FINITE_CB: f64 = 16.0;
    pub const GAMBLER_CB: f64 = 0.05;

    pub fn new(c_b: f64, delta: f64) -> Result<Self> {
        if !(c_b > 0.0 && c_b.is_finite()) {
            return Err(Error::invalid(format!("c_b must be positive, got {c_b}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        Ok(PenaltyConfig { c_b, delta })
    }

    pub fn infinite() -> Self {
        PenaltyConfig {
            c_b: Self::INFINITE_CB,
            delta: Self::DEFAULT_DELTA,
        }
    }

    pub fn finite() -> Self {
        PenaltyConfig {
            c_b: Self::FINITE_CB,
            delta: Self::DEFAULT_DELTA,
        }
    }

    pub fn gambler() -> Self {
        PenaltyConfig {
            c_b: Self::GAMBLER_CB,
            delta: Self::DEFAULT_DELTA,
        }
    }
}

/// Discounted Bernstein penalty of one cell. `n` is the total dataset size.
pub(crate) fn infinite_cell(cfg: &PenaltyConfig, gamma: f64, n: u64, n_sa: u64, var: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let cap = 1.0 / (1.0 - gamma);
    let tail = 5.0 / n as f64;
    if n_sa == 0 {
        return cap + tail;
    }
    let log = (n as f64 / ((1.0 - gamma) * cfg.delta)).ln();
    let k = cfg.c_b * log / n_sa as f64;
    (k * var).sqrt().max(2.0 * k / (1.0 - gamma)).min(cap) + tail
}

/// Episodic Bernstein penalty of one cell at horizon `hz`.
pub(crate) fn finite_cell(cfg: &PenaltyConfig, hz: usize, n: u64, n_sa: u64, var: f64) -> f64 {
    let h = hz as f64;
    if n_sa == 0 {
        return h;
    }
    let log = (n as f64 * h / cfg.delta).ln();
    let k = cfg.c_b * log / n_sa as f64;
    ((k * var).sqrt() + k * h).min(h)
}

fn check_values(v: &[f64], upper: f64, ns: usize) -> Result<()> {
    if v.len() != ns {
        return Err(Error::invalid("value vector has the wrong length"));
    }
    if v.iter().any(|&x| !(x >= -1e-12 && x <= upper + 1e-9)) {
        return Err(Error::invalid(format!("values must lie in [0, {upper}]")));
    }
    Ok(())
}

/// `b(s,a;V)` for every cell of a discounted empirical model; `n` is the size
/// of the dataset the counts come from.
pub fn penalty_bernstein_infinite(
    counts: &Array2<u64>,
    p_hat: &Kernel,
    v: &[f64],
    cfg: &PenaltyConfig,
    gamma: f64,
    n: u64,
) -> Result<Array2<f64>> {
    let (ns, na) = (p_hat.num_states(), p_hat.num_actions());
    if counts.dim() != (ns, na) {
        return Err(Error::invalid("count table has the wrong shape"));
    }
    check_values(v, 1.0 / (1.0 - gamma), ns)?;
    Ok(Array2::from_shape_fn((ns, na), |(s, a)| {
        infinite_cell(cfg, gamma, n, counts[[s, a]], p_hat.row(s, a).variance(v))
    }))
}

/// `b_h(s,a)` for one step of an episodic empirical model, using `V_{h+1}`.
pub fn penalty_bernstein_finite(
    counts_h: &Array2<u64>,
    p_hat_h: &Kernel,
    v_next: &[f64],
    cfg: &PenaltyConfig,
    horizon: usize,
    n: u64,
) -> Result<Array2<f64>> {
    let (ns, na) = (p_hat_h.num_states(), p_hat_h.num_actions());
    if counts_h.dim() != (ns, na) {
        return Err(Error::invalid("count table has the wrong shape"));
    }
    check_values(v_next, horizon as f64, ns)?;
    Ok(Array2::from_shape_fn((ns, na), |(s, a)| {
        finite_cell(
            cfg,
            horizon,
            n,
            counts_h[[s, a]],
            p_hat_h.row(s, a).variance(v_next),
        )
    }))
}
