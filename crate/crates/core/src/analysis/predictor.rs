use crate::error::{Error, Result};

/// Which sample-size bound to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Setting {
    /// i.i.d. transitions, discount `gamma`; the bound is on `N`.
    Infinite { gamma: f64 },
    /// Episodes of length `horizon`; the bound is on `K`.
    Finite { horizon: usize },
    /// Single trajectory with mixing time `t_mix`; the bound is on `T`.
    Markov { gamma: f64, t_mix: f64 },
}

pub const INFINITE_C1_PER_CB: f64 = 21_000.0;
pub const FINITE_CK_PER_CB: f64 = 12_800.0;
pub const MARKOV_C1: f64 = 22_000.0;

/// The bound has the form `n >= coefficient * ln(log_scale * n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    /// Smallest `n` from which the inequality holds for every larger `n`.
    pub sample_size: f64,
    pub coefficient: f64,
    /// Coefficient of the `epsilon^{-2}` term alone.
    pub leading: f64,
    pub log_scale: f64,
}

/// Evaluates the sample-size bound of `setting` for `S` states, clipped
/// concentrability `c_clipped`, accuracy `epsilon` and confidence `delta`.
/// `c_b` enters the constants of the i.i.d. and episodic bounds.
pub fn sample_predictor(
    setting: Setting,
    num_states: usize,
    c_clipped: f64,
    epsilon: f64,
    delta: f64,
    c_b: f64,
) -> Result<Prediction> {
    if !(delta > 0.0 && delta < 1.0) || !(c_clipped > 0.0) || !(c_b > 0.0) || num_states == 0 {
        return Err(Error::invalid(
            "predictor needs positive S, C, c_b and delta in (0,1)",
        ));
    }
    let s = num_states as f64;
    let (leading, coefficient, log_scale, eps_max) = match setting {
        Setting::Infinite { gamma } => {
            check_gamma(gamma)?;
            let g = 1.0 - gamma;
            let lead = INFINITE_C1_PER_CB * c_b * s * c_clipped / (g.powi(3) * epsilon * epsilon);
            (lead, lead, s / (g * delta), 1.0 / g)
        }
        Setting::Finite { horizon } => {
            if horizon == 0 {
                return Err(Error::invalid("horizon must be positive"));
            }
            let h = horizon as f64;
            let lead = FINITE_CK_PER_CB * c_b * h.powi(3) * s * c_clipped / (epsilon * epsilon);
            (lead, lead, h / delta, h)
        }
        Setting::Markov { gamma, t_mix } => {
            check_gamma(gamma)?;
            if !(t_mix > 0.0) {
                return Err(Error::invalid("mixing time must be positive"));
            }
            let g = 1.0 - gamma;
            let lead = MARKOV_C1 * s * c_clipped / (g.powi(3) * epsilon * epsilon);
            let second = MARKOV_C1 * t_mix * s * c_clipped / (g * g * epsilon);
            (
                lead,
                lead + second,
                665.0 * s * t_mix / (g * delta),
                1.0 / g,
            )
        }
    };
    if !(epsilon > 0.0 && epsilon <= eps_max) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, {eps_max}]"
        )));
    }
    Ok(Prediction {
        sample_size: largest_root(coefficient, log_scale),
        coefficient,
        leading,
        log_scale,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("discount factor must lie in (0,1)"))
    }
}

/// Largest `n >= 1` with `n = a ln(b n)`; 1 when `n > a ln(b n)` throughout.
fn largest_root(a: f64, b: f64) -> f64 {
    let f = |n: f64| a * (b * n).ln();
    // beyond n = a the map is a contraction-like increasing function
    let mut n = a.max(1.0);
    for _ in 0..10_000 {
        let next = f(n).max(1.0);
        if (next - n).abs() <= 1e-12 * n.max(1.0) {
            return next;
        }
        n = next;
    }
    n
}
