//! Experiment drivers: the gambler's problem, scaling curves for the three
//! data models, hard-instance demonstrations and log-log slope fits.

mod config;
mod gambler;
mod hard_demo;
mod random;
mod scaling;
mod slope;

pub use config::{exp_grid, parse_grid, Algorithm, RunConfig};
pub use gambler::{gambler_trial, run_gambler, GamblerSpec};
pub use hard_demo::{run_hard_demo, write_demo_csv, DemoRow, HardFamily};
pub use random::{random_discounted, random_episodic};
pub use scaling::{run_scaling, write_scaling_csv, Pipeline, ScalingRow, SCALING_HEADER};
pub use slope::{fit_slope, mean_std, SlopeFit};
