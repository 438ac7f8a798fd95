//! Pessimistic value iteration with Bernstein-style penalties.

mod dump;
mod penalty;
mod pipeline;
mod solver;

pub use dump::{write_result_csv, write_summary};
pub use penalty::{penalty_bernstein_finite, penalty_bernstein_infinite, PenaltyConfig};
pub use pipeline::{
    subsampled_vi_lcb_finite, subsampled_vi_lcb_markov, Subsampled, MIXING_TRIM_FACTOR,
};
pub use solver::{
    default_tau_max, default_tau_max_markov, pessimistic_operator, plain_vi_finite,
    plain_vi_infinite, solve_discounted_counts, solve_episodic_counts, vi_lcb_finite,
    vi_lcb_infinite, DiscountedTask, EpisodicTask, IterationControl, Penalty, VilcbResult,
};
