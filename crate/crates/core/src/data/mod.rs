//! Offline datasets: generation, counting, splitting and subsampling.

mod dataset;
mod generate;
mod io;
mod subsample;

pub use dataset::{
    CountTable, EpisodicDataset, MarkovTrajectory, Trajectory, Transition, TransitionDataset,
};
pub use generate::{gen_episodic, gen_iid, gen_markov, gen_per_cell_counts, multinomial_counts};
pub use io::{read_dataset_csv, read_trajectories, write_dataset_csv, write_trajectories};
pub use subsample::{
    adaptive_k, split_episodic, split_markov, subsample_finite, subsample_markov,
    trim_counts_adaptive, trim_counts_finite, trim_counts_markov, visit_index_regroup,
};
