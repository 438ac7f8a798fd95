use std::io::Write;

use rayon::prelude::*;

use crate::bench::config::{Algorithm, RunConfig};
use crate::data::{gen_episodic, gen_iid};
use crate::error::{Error, Result};
use crate::hard::{build_finite_family, build_infinite_pair, gilbert_varshamov, GvCode};
use crate::rng::derive_seed;
use crate::textfmt::fmt17;
use crate::vilcb::{
    plain_vi_finite, plain_vi_infinite, vi_lcb_finite, vi_lcb_infinite, DiscountedTask,
    EpisodicTask, IterationControl, PenaltyConfig,
};

#[derive(Clone, Debug, PartialEq)]
pub enum HardFamily {
    Infinite {
        num_states: usize,
        c: f64,
        gamma: f64,
        epsilon: f64,
    },
    /// The first `family_size` words of the greedy code index the family.
    Finite {
        num_states: usize,
        c: f64,
        horizon: usize,
        epsilon: f64,
        family_size: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoRow {
    pub n: u64,
    pub error_rate: f64,
    pub trials: usize,
}

pub fn write_demo_csv<W: Write>(rows: &[DemoRow], w: &mut W) -> Result<()> {
    writeln!(w, "n,error_rate,trials")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.n, fmt17(r.error_rate), r.trials)?;
    }
    Ok(())
}

/// Codeword nearest to `bits` in Hamming distance, lowest index on ties.
fn nearest(code: &GvCode, bits: u128) -> usize {
    (0..code.len())
        .min_by_key(|&i| ((code.codewords[i] ^ bits).count_ones(), i))
        .expect("nonempty code")
}

/// Frequency with which the learned policy misidentifies the hidden index.
/// Trial `t` uses member `t mod |family|`; the first selected algorithm is
/// the estimator. Grid values count transitions (discounted family) or
/// episodes (episodic family).
pub fn run_hard_demo(family: &HardFamily, config: &RunConfig) -> Result<Vec<DemoRow>> {
    config.validate()?;
    let cfg = PenaltyConfig::new(config.c_b, config.delta)?;
    let algo = config.algorithms[0];
    let control = IterationControl {
        tau_max: config.tau_max,
        tol: None,
    };
    let jobs: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    let errors: Vec<bool> = match family {
        HardFamily::Infinite {
            num_states,
            c,
            gamma,
            epsilon,
        } => {
            let pair = build_infinite_pair(*num_states, *c, *gamma, *epsilon)?;
            jobs.par_iter()
                .map(|&(i, t)| {
                    let inst = &pair[t % 2];
                    let seed = derive_seed(config.seed, "hard", (i * config.trials + t) as u64);
                    let data = gen_iid(&inst.mdp, &inst.d_b, config.grid[i] as usize, seed)?;
                    let task = DiscountedTask::of(&inst.mdp);
                    let res = match algo {
                        Algorithm::ViLcb => vi_lcb_infinite(&data, &task, &cfg, control)?,
                        Algorithm::Vi => plain_vi_infinite(&data, &task, control)?,
                    };
                    Ok(res.stationary_policy().action(0) != inst.theta)
                })
                .collect::<Result<_>>()?
        }
        HardFamily::Finite {
            num_states,
            c,
            horizon,
            epsilon,
            family_size,
        } => {
            if *family_size == 0 {
                return Err(Error::invalid("family size must be positive"));
            }
            let code = gilbert_varshamov(*horizon, Some(*family_size), config.seed)?;
            let thetas: Vec<Vec<u8>> = (0..code.len()).map(|i| code.bits(i)).collect();
            let family = build_finite_family(*num_states, *c, *horizon, *epsilon, &thetas)?;
            jobs.par_iter()
                .map(|&(i, t)| {
                    let member = t % family.len();
                    let inst = &family[member];
                    let seed = derive_seed(config.seed, "hard", (i * config.trials + t) as u64);
                    let data = gen_episodic(
                        &inst.mdp,
                        &inst.rho_b,
                        &inst.behavior,
                        config.grid[i] as usize,
                        seed,
                    )?
                    .to_transitions();
                    let task = EpisodicTask::of(&inst.mdp);
                    let res = match algo {
                        Algorithm::ViLcb => vi_lcb_finite(&data, &task, &cfg)?,
                        Algorithm::Vi => plain_vi_finite(&data, &task)?,
                    };
                    let bits = (0..*horizon).fold(0u128, |acc, h| {
                        acc | ((res.policy.step(h).action(0) as u128 & 1) << h)
                    });
                    Ok(nearest(&code, bits) != member)
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(config
        .grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let wrong = errors[i * config.trials..(i + 1) * config.trials]
                .iter()
                .filter(|&&e| e)
                .count();
            DemoRow {
                n,
                error_rate: wrong as f64 / config.trials as f64,
                trials: config.trials,
            }
        })
        .collect())
}
