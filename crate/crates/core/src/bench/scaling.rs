use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;

use crate::bench::config::{Algorithm, RunConfig};
use crate::bench::slope::mean_std;
use crate::data::{gen_episodic, gen_iid, gen_markov};
use crate::error::{Error, Result};
use crate::mdp::{
    solve_optimal_episodic, value_gap_discounted, value_gap_episodic_with, DiscountedMDP,
    EpisodicMDP, EpisodicPolicy, Policy,
};
use crate::rng::derive_seed;
use crate::textfmt::fmt17;
use crate::vilcb::{
    default_tau_max_markov, plain_vi_finite, plain_vi_infinite, subsampled_vi_lcb_finite,
    subsampled_vi_lcb_markov, vi_lcb_infinite, DiscountedTask, EpisodicTask, IterationControl,
    PenaltyConfig,
};

/// One grid point of one algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: u64,
    pub total_samples: u64,
    pub algorithm: Algorithm,
    pub mean_gap: f64,
    pub std_gap: f64,
    pub trials: usize,
}

pub const SCALING_HEADER: &str = "n,total_samples,algorithm,mean_gap,std_gap,trials";

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], w: &mut W) -> Result<()> {
    writeln!(w, "{SCALING_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.n,
            r.total_samples,
            r.algorithm,
            fmt17(r.mean_gap),
            fmt17(r.std_gap),
            r.trials
        )?;
    }
    Ok(())
}

/// `gaps[i * trials + t][j]` is the gap of algorithm `j` in trial `t` at grid
/// point `i`. Rows come out ordered by grid point, then algorithm.
pub(crate) fn aggregate(
    grid: &[u64],
    totals: &[u64],
    algorithms: &[Algorithm],
    trials: usize,
    gaps: &[Vec<f64>],
) -> Vec<ScalingRow> {
    let mut rows = Vec::with_capacity(grid.len() * algorithms.len());
    for (i, (&n, &total)) in grid.iter().zip(totals).enumerate() {
        for (j, &algorithm) in algorithms.iter().enumerate() {
            let values: Vec<f64> = (0..trials).map(|t| gaps[i * trials + t][j]).collect();
            let (mean_gap, std_gap) = mean_std(&values);
            rows.push(ScalingRow {
                n,
                total_samples: total,
                algorithm,
                mean_gap,
                std_gap,
                trials,
            });
        }
    }
    rows
}

/// Data model and ground truth of a scaling experiment. Grid values are the
/// number of transitions (`Iid`), episodes (`Episodic`) or trajectory length
/// (`Markov`).
#[derive(Clone, Debug)]
pub enum Pipeline {
    /// VI-LCB on i.i.d. transitions from `d_b`.
    Iid {
        mdp: DiscountedMDP,
        d_b: Array2<f64>,
        rho: Vec<f64>,
    },
    /// Two-fold subsampled VI-LCB on episodes from `rho_b` under `pi_b`.
    Episodic {
        mdp: EpisodicMDP,
        rho_b: Vec<f64>,
        pi_b: EpisodicPolicy,
        rho: Vec<f64>,
    },
    /// Subsampled VI-LCB on a single trajectory from `s0` under `pi_b`.
    Markov {
        mdp: DiscountedMDP,
        pi_b: Policy,
        s0: usize,
        rho: Vec<f64>,
        t_mix: Option<f64>,
    },
}

impl Pipeline {
    fn samples_per_unit(&self) -> u64 {
        match self {
            Pipeline::Episodic { mdp, .. } => mdp.horizon() as u64,
            _ => 1,
        }
    }
}

struct Truth(Option<crate::mdp::EpisodicSolution>);

/// Gaps of each algorithm on one dataset. The plain-VI baseline runs on the
/// same (subsampled) data with all penalties at zero.
fn scaling_trial(
    pipeline: &Pipeline,
    truth: &Truth,
    n: u64,
    config: &RunConfig,
    cfg: &PenaltyConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let control = IterationControl {
        tau_max: config.tau_max,
        tol: None,
    };
    let algos = &config.algorithms;
    match pipeline {
        Pipeline::Iid { mdp, d_b, rho } => {
            let data = gen_iid(mdp, d_b, n as usize, seed)?;
            let task = DiscountedTask::of(mdp);
            algos
                .iter()
                .map(|a| {
                    let res = match a {
                        Algorithm::ViLcb => vi_lcb_infinite(&data, &task, cfg, control)?,
                        Algorithm::Vi => plain_vi_infinite(&data, &task, control)?,
                    };
                    value_gap_discounted(mdp, rho, res.stationary_policy())
                })
                .collect()
        }
        Pipeline::Episodic {
            mdp,
            rho_b,
            pi_b,
            rho,
        } => {
            let data = gen_episodic(mdp, rho_b, pi_b, n as usize, seed)?;
            let task = EpisodicTask::of(mdp);
            let sub =
                subsampled_vi_lcb_finite(&data, &task, cfg, derive_seed(seed, "subsample", 0))?;
            let star = truth.0.as_ref().expect("episodic ground truth");
            algos
                .iter()
                .map(|a| {
                    let policy = match a {
                        Algorithm::ViLcb => sub.result.policy.clone(),
                        Algorithm::Vi => plain_vi_finite(&sub.kept, &task)?.policy,
                    };
                    value_gap_episodic_with(mdp, star, rho, &policy)
                })
                .collect()
        }
        Pipeline::Markov {
            mdp,
            pi_b,
            s0,
            rho,
            t_mix,
        } => {
            let traj = gen_markov(mdp, pi_b, *s0, n as usize, seed)?;
            let task = DiscountedTask::of(mdp);
            let sub = subsampled_vi_lcb_markov(&traj, &task, cfg, *t_mix, control)?;
            algos
                .iter()
                .map(|a| {
                    let policy = match a {
                        Algorithm::ViLcb => sub.result.stationary_policy().clone(),
                        Algorithm::Vi => {
                            let ctl = IterationControl {
                                tau_max: Some(control.tau_max.unwrap_or_else(|| {
                                    default_tau_max_markov(traj.len(), mdp.gamma())
                                })),
                                tol: None,
                            };
                            plain_vi_infinite(&sub.kept, &task, ctl)?
                                .stationary_policy()
                                .clone()
                        }
                    };
                    value_gap_discounted(mdp, rho, &policy)
                })
                .collect()
        }
    }
}

/// Mean and spread of the gap across `config.trials` datasets per grid point.
pub fn run_scaling(pipeline: &Pipeline, config: &RunConfig) -> Result<Vec<ScalingRow>> {
    config.validate()?;
    if config.total_n && pipeline.samples_per_unit() != 1 {
        return Err(Error::invalid(
            "total sample sizes are only meaningful for per-transition grids",
        ));
    }
    let cfg = PenaltyConfig::new(config.c_b, config.delta)?;
    let truth = Truth(match pipeline {
        Pipeline::Episodic { mdp, .. } => Some(solve_optimal_episodic(mdp)),
        _ => None,
    });
    let jobs: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    let gaps: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let seed = derive_seed(config.seed, "scaling", (i * config.trials + t) as u64);
            scaling_trial(pipeline, &truth, config.grid[i], config, &cfg, seed)
        })
        .collect::<Result<_>>()?;
    let totals: Vec<u64> = config
        .grid
        .iter()
        .map(|n| n * pipeline.samples_per_unit())
        .collect();
    Ok(aggregate(
        &config.grid,
        &totals,
        &config.algorithms,
        config.trials,
        &gaps,
    ))
}
