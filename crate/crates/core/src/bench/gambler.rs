use ndarray::Array3;
use rayon::prelude::*;

use crate::bench::config::{Algorithm, RunConfig};
use crate::bench::scaling::{aggregate, ScalingRow};
use crate::data::gen_per_cell_counts;
use crate::error::{Error, Result};
use crate::mdp::{
    solve_optimal_episodic, value_gap_episodic_with, ActionMask, EpisodicMDP, Kernel, TransitionRow,
};
use crate::rng::derive_seed;
use crate::vilcb::{solve_episodic_counts, EpisodicTask, Penalty, PenaltyConfig};

/// Gambler's problem: balances `0..=goal`, bets `0..=min(s, goal - s)`, a coin
/// with heads probability `p_head`, reward 1 in the goal state.
#[derive(Clone, Debug, PartialEq)]
pub struct GamblerSpec {
    pub goal: usize,
    pub horizon: usize,
    pub p_head: f64,
}

impl Default for GamblerSpec {
    fn default() -> Self {
        GamblerSpec {
            goal: 50,
            horizon: 100,
            p_head: 0.45,
        }
    }
}

impl GamblerSpec {
    pub fn num_states(&self) -> usize {
        self.goal + 1
    }

    pub fn num_actions(&self) -> usize {
        self.goal / 2 + 1
    }

    pub fn is_valid(&self, s: usize, a: usize) -> bool {
        a <= s.min(self.goal - s)
    }

    /// The MDP with bets beyond `min(s, goal - s)` masked out as zero-reward
    /// self-loops. Balances 0 and `goal` are absorbing.
    pub fn build(&self) -> Result<EpisodicMDP> {
        if !(0.0..=1.0).contains(&self.p_head) || self.goal < 2 || self.horizon == 0 {
            return Err(Error::invalid("invalid gambler parameters"));
        }
        let (ns, na) = (self.num_states(), self.num_actions());
        let mut rows = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                rows.push(if !self.is_valid(s, a) || a == 0 {
                    TransitionRow::point(s)
                } else {
                    let mut dense = vec![0.0; ns];
                    dense[s + a] += self.p_head;
                    dense[s - a] += 1.0 - self.p_head;
                    TransitionRow::from_dense(&dense)
                });
            }
        }
        let kernel = Kernel::new(ns, na, rows)?;
        let reward = Array3::from_shape_fn((self.horizon, ns, na), |(_, s, a)| {
            if s == self.goal && self.is_valid(s, a) {
                1.0
            } else {
                0.0
            }
        });
        let mask = ActionMask::from_fn(ns, na, |s, a| self.is_valid(s, a))?;
        EpisodicMDP::new(vec![kernel; self.horizon], reward)?.with_mask(mask)
    }

    /// Number of valid `(h, s, a)` cells.
    pub fn num_cells(&self) -> u64 {
        let per_step: usize = (0..self.num_states())
            .map(|s| s.min(self.goal - s) + 1)
            .sum();
        (per_step * self.horizon) as u64
    }
}

/// Gap of every selected algorithm on a per-cell dataset of size `n`.
pub fn gambler_trial(
    mdp: &EpisodicMDP,
    n: u64,
    algorithms: &[Algorithm],
    cfg: &PenaltyConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let star = solve_optimal_episodic(mdp);
    let rho = vec![1.0 / mdp.num_states() as f64; mdp.num_states()];
    let counts = gen_per_cell_counts(mdp, n, seed);
    algorithms
        .iter()
        .map(|algo| {
            let penalty = match algo {
                Algorithm::ViLcb => Penalty::Bernstein(*cfg),
                Algorithm::Vi => Penalty::Zero,
            };
            let res = solve_episodic_counts(&counts, &EpisodicTask::of(mdp), penalty)?;
            value_gap_episodic_with(mdp, &star, &rho, &res.policy)
        })
        .collect()
}

/// Mean and spread of the gap over `config.trials` datasets per grid point.
/// Trial `t` of grid point `i` draws its data from seed
/// `derive_seed(seed, "gambler", i * trials + t)`, shared by all algorithms.
pub fn run_gambler(spec: &GamblerSpec, config: &RunConfig) -> Result<Vec<ScalingRow>> {
    config.validate()?;
    let mdp = spec.build()?;
    let cfg = PenaltyConfig::new(config.c_b, config.delta)?;
    let cells = spec.num_cells();
    let per_cell: Vec<u64> = config
        .grid
        .iter()
        .map(|&g| if config.total_n { g / cells } else { g })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..per_cell.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    let gaps: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let seed = derive_seed(config.seed, "gambler", (i * config.trials + t) as u64);
            gambler_trial(&mdp, per_cell[i], &config.algorithms, &cfg, seed)
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(
        &per_cell,
        &per_cell.iter().map(|n| n * cells).collect::<Vec<_>>(),
        &config.algorithms,
        config.trials,
        &gaps,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gambler_shape_and_mask() {
        let spec = GamblerSpec::default();
        let m = spec.build().unwrap();
        assert_eq!(
            (m.num_states(), m.num_actions(), m.horizon()),
            (51, 26, 100)
        );
        let mask = m.mask().unwrap();
        assert!(mask.is_allowed(25, 25) && !mask.is_allowed(26, 25) && mask.is_allowed(26, 24));
        assert!(mask.is_allowed(0, 0) && !mask.is_allowed(0, 1) && !mask.is_allowed(50, 1));
        assert_eq!(m.kernel(0).prob(10, 5, 15), 0.45);
        assert_eq!(m.kernel(0).prob(10, 5, 5), 0.55);
        assert_eq!(m.kernel(0).prob(50, 0, 50), 1.0);
        assert_eq!(spec.num_cells(), 100 * (2 * 325 + 26));
    }

    #[test]
    fn optimal_values_are_win_probabilities_times_time() {
        let spec = GamblerSpec {
            goal: 4,
            horizon: 1,
            p_head: 0.45,
        };
        let star = solve_optimal_episodic(&spec.build().unwrap());
        assert_eq!(star.values.row(0).to_vec(), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn huge_data_is_nearly_optimal() {
        let spec = GamblerSpec {
            goal: 10,
            horizon: 10,
            p_head: 0.45,
        };
        let m = spec.build().unwrap();
        let gaps = gambler_trial(
            &m,
            1_000_000,
            &[Algorithm::ViLcb, Algorithm::Vi],
            &PenaltyConfig::gambler(),
            3,
        )
        .unwrap();
        assert!(gaps.iter().all(|&g| g < 0.05), "{gaps:?}");
    }
}
