//! Exact tabular models: kernels, policies, Bellman evaluation, optimal
//! solvers and occupancy measures.

mod io;
mod model;
mod occupancy;
mod solve;
mod stats;

pub use io::{read_mdp, write_discounted, write_episodic, write_mdp, MdpFile};
pub use model::{
    argmax_lowest, check_distribution, max_allowed, ActionMask, DiscountedMDP, EpisodicMDP,
    EpisodicPolicy, Kernel, Policy, TransitionRow, ROW_SUM_TOL,
};
pub use occupancy::{
    occupancy_discounted, occupancy_discounted_series, occupancy_episodic, Occupancy,
};
pub use solve::{
    policy_eval_discounted, policy_eval_episodic, policy_q_discounted, policy_q_episodic,
    solve_optimal_discounted, solve_optimal_episodic, value_gap_discounted, value_gap_episodic,
    value_gap_episodic_with, DiscountedSolution, EpisodicSolution, DENSE_SOLVE_MAX_STATES,
    SOLVER_TOL, TIE_TOL,
};
pub use stats::variance_under;
