//! Model-based offline reinforcement learning for tabular MDPs with
//! pessimistic value iteration (VI-LCB) and Bernstein-style penalties.

pub mod analysis;
pub mod bench;
pub mod data;
pub mod error;
pub mod hard;
pub mod mdp;
pub mod rng;
pub mod textfmt;
pub mod vilcb;

pub use error::{Error, Result};
