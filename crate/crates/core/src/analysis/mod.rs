//! Concentrability, Markov chain mixing, divergences and sample-size bounds.

mod chain;
mod concentrability;
mod divergence;
mod instance;
mod predictor;

pub use chain::{
    mixing_time, state_action_chain, stationary_distribution, total_variation, MarkovChain,
    StateActionChain, DEFAULT_MIXING_DELTA, STATIONARY_MAX_ITERS, STATIONARY_TOL,
};
pub use concentrability::{concentrability, write_report_csv, ConcentrabilityReport};
pub use divergence::{chi2_bernoulli, kl_bernoulli};
pub use instance::instance_bound;
pub use predictor::{
    sample_predictor, Prediction, Setting, FINITE_CK_PER_CB, INFINITE_C1_PER_CB, MARKOV_C1,
};
