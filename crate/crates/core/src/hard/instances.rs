use std::io::Write;

use log::warn;
use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::mdp::{DiscountedMDP, EpisodicMDP, EpisodicPolicy, Kernel, Policy, TransitionRow};
use crate::textfmt::fmt17;

pub const FINITE_C1: f64 = 0.25;
pub const FINITE_C2: f64 = 4096.0;
/// Horizon below which the finite construction is outside the proven regime.
pub const FINITE_MIN_H: usize = 32;

/// `mu = 1/(CS) at state 0, 1 - 1/(CS) at state 1`.
fn crucial_distribution(num_states: usize, c: f64) -> Vec<f64> {
    let mut mu = vec![0.0; num_states];
    let m0 = 1.0 / (c * num_states as f64);
    mu[0] = m0;
    mu[1] = 1.0 - m0;
    mu
}

/// `w 1{point} + (1 - w) mu`.
fn mix(w: f64, point: usize, mu: &[f64]) -> TransitionRow {
    let mut row: Vec<f64> = mu.iter().map(|m| (1.0 - w) * m).collect();
    row[point] += w;
    TransitionRow::from_dense(&row)
}

fn state_rewards(num_states: usize) -> Array2<f64> {
    let mut r = Array2::zeros((num_states, 2));
    r[[0, 0]] = 1.0;
    r[[0, 1]] = 1.0;
    r[[1, 0]] = 0.5;
    r
}

fn point_mass(num_states: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_states];
    v[s] = 1.0;
    v
}

fn behavior_distribution(mu: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((mu.len(), 2), |(s, _)| mu[s] / 2.0)
}

/// One member of the two-point discounted family.
#[derive(Clone, Debug)]
pub struct InfiniteHardInstance {
    pub theta: usize,
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub mu: Vec<f64>,
    pub p: f64,
    pub q: f64,
    pub mdp: DiscountedMDP,
    /// Data distribution `d^b(s,a) = mu(s)/2`.
    pub d_b: Array2<f64>,
    pub rho_b: Vec<f64>,
    pub behavior: Policy,
    /// Test distribution, the point mass on state 0.
    pub rho: Vec<f64>,
}

impl InfiniteHardInstance {
    /// `theta C gamma eps`.
    pub fn sidecar_line(&self) -> String {
        format!(
            "{} {} {} {}",
            self.theta,
            fmt17(self.c),
            fmt17(self.gamma),
            fmt17(self.epsilon)
        )
    }
}

/// Both discounted instances `theta = 0, 1` for `S` states.
pub fn build_infinite_pair(
    num_states: usize,
    c: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<[InfiniteHardInstance; 2]> {
    if num_states < 2 {
        return Err(Error::invalid("hard instances need at least two states"));
    }
    if !(2.0 / 3.0..1.0).contains(&gamma) {
        return Err(Error::invalid("constraint 2/3 <= gamma < 1 violated"));
    }
    if !(epsilon > 0.0) || 14.0 * (1.0 - gamma) * epsilon / gamma > 0.5 {
        return Err(Error::invalid(
            "constraint 14 (1 - gamma) eps / gamma <= 1/2 violated",
        ));
    }
    if !(c > 0.0) || 1.0 / (c * num_states as f64) > 1.0 / (4.0 * gamma) {
        return Err(Error::invalid("constraint 1/(CS) <= 1/(4 gamma) violated"));
    }
    let mu = crucial_distribution(num_states, c);
    let shift = 14.0 * (1.0 - gamma).powi(2) * epsilon / gamma;
    let (p, q) = (gamma + shift, gamma - shift);
    let build = |theta: usize| -> Result<InfiniteHardInstance> {
        let mut rows = Vec::with_capacity(2 * num_states);
        for s in 0..num_states {
            for a in 0..2 {
                rows.push(match (s, a) {
                    (0, a) if a == theta => mix(p, 0, &mu),
                    (0, _) => mix(q, 0, &mu),
                    (1, 0) => TransitionRow::point(1),
                    (1, _) => mix(2.0 * gamma - 1.0, 1, &mu),
                    (s, _) => mix(gamma, s, &mu),
                });
            }
        }
        let kernel = Kernel::new(num_states, 2, rows)?;
        Ok(InfiniteHardInstance {
            theta,
            c,
            gamma,
            epsilon,
            mu: mu.clone(),
            p,
            q,
            mdp: DiscountedMDP::new(kernel, state_rewards(num_states), gamma)?,
            d_b: behavior_distribution(&mu),
            rho_b: mu.clone(),
            behavior: Policy::uniform(num_states, 2),
            rho: point_mass(num_states, 0),
        })
    };
    Ok([build(0)?, build(1)?])
}

/// One member of the episodic family indexed by `theta in {0,1}^H`.
#[derive(Clone, Debug)]
pub struct FiniteHardInstance {
    pub theta: Vec<u8>,
    pub c: f64,
    pub epsilon: f64,
    pub mu: Vec<f64>,
    pub p: f64,
    pub q: f64,
    pub mdp: EpisodicMDP,
    /// `d^b_h(s,a) = mu(s)/2` for every step.
    pub d_b: Array3<f64>,
    pub rho_b: Vec<f64>,
    pub behavior: EpisodicPolicy,
    pub rho: Vec<f64>,
}

impl FiniteHardInstance {
    pub fn horizon(&self) -> usize {
        self.theta.len()
    }

    /// `theta_bits C H eps`.
    pub fn sidecar_line(&self) -> String {
        let bits: String = self
            .theta
            .iter()
            .map(|b| if *b == 1 { '1' } else { '0' })
            .collect();
        format!(
            "{bits} {} {} {}",
            fmt17(self.c),
            self.horizon(),
            fmt17(self.epsilon)
        )
    }
}

/// One episodic instance per `theta`.
pub fn build_finite_family(
    num_states: usize,
    c: f64,
    horizon: usize,
    epsilon: f64,
    thetas: &[Vec<u8>],
) -> Result<Vec<FiniteHardInstance>> {
    if num_states < 2 {
        return Err(Error::invalid("hard instances need at least two states"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    if horizon < FINITE_MIN_H {
        warn!("horizon {horizon} is below {FINITE_MIN_H}");
    }
    if !(c > 0.0) || 1.0 / (c * num_states as f64) > 0.25 {
        return Err(Error::invalid("constraint 1/(CS) <= 1/4 violated"));
    }
    let h = horizon as f64;
    if !(epsilon > 0.0) || FINITE_C2 * epsilon / (h * h) > FINITE_C1 / (2.0 * h) {
        return Err(Error::invalid(
            "constraint c2 eps / H^2 <= c1 / (2H) violated",
        ));
    }
    for (i, theta) in thetas.iter().enumerate() {
        if theta.len() != horizon || theta.iter().any(|&b| b > 1) {
            return Err(Error::invalid(format!(
                "theta {i} is not a 0/1 vector of length {horizon}"
            )));
        }
    }
    let mu = crucial_distribution(num_states, c);
    let p = 1.0 - FINITE_C1 / h + FINITE_C2 * epsilon / (h * h);
    let q = 1.0 - FINITE_C1 / h - FINITE_C2 * epsilon / (h * h);
    let reward2 = state_rewards(num_states);
    let reward = Array3::from_shape_fn((horizon, num_states, 2), |(_, s, a)| reward2[[s, a]]);
    let shared_rows = |theta_h: usize| -> Vec<TransitionRow> {
        let mut rows = Vec::with_capacity(2 * num_states);
        for s in 0..num_states {
            for a in 0..2 {
                rows.push(match (s, a) {
                    (0, a) if a == theta_h => mix(p, 0, &mu),
                    (0, _) => mix(q, 0, &mu),
                    (1, 0) => TransitionRow::point(1),
                    (1, _) => mix(1.0 - 2.0 * FINITE_C1 / h, 1, &mu),
                    (s, _) => mix(1.0 - 1.0 / h, s, &mu),
                });
            }
        }
        rows
    };
    let kernels = [
        Kernel::new(num_states, 2, shared_rows(0))?,
        Kernel::new(num_states, 2, shared_rows(1))?,
    ];
    let d_b = Array3::from_shape_fn((horizon, num_states, 2), |(_, s, _)| mu[s] / 2.0);
    thetas
        .iter()
        .map(|theta| {
            let steps = theta.iter().map(|&b| kernels[b as usize].clone()).collect();
            Ok(FiniteHardInstance {
                theta: theta.clone(),
                c,
                epsilon,
                mu: mu.clone(),
                p,
                q,
                mdp: EpisodicMDP::new(steps, reward.clone())?,
                d_b: d_b.clone(),
                rho_b: mu.clone(),
                behavior: EpisodicPolicy::repeat(Policy::uniform(num_states, 2), horizon),
                rho: point_mass(num_states, 0),
            })
        })
        .collect()
}

pub fn write_sidecar<W: Write>(line: &str, w: &mut W) -> Result<()> {
    writeln!(w, "{line}")?;
    Ok(())
}
