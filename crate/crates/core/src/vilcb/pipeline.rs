use ndarray::Array2;

use crate::data::{
    split_episodic, split_markov, subsample_finite, subsample_markov, trim_counts_adaptive,
    trim_counts_finite, trim_counts_markov, EpisodicDataset, MarkovTrajectory, TransitionDataset,
};
use crate::error::{Error, Result};
use crate::vilcb::penalty::PenaltyConfig;
use crate::vilcb::solver::{
    default_tau_max_markov, vi_lcb_finite, vi_lcb_infinite, DiscountedTask, EpisodicTask,
    IterationControl, VilcbResult,
};

/// Multiplier of the mixing time in the known-mixing-time trim rule.
pub const MIXING_TRIM_FACTOR: f64 = 665.0;

/// Result of a two-fold subsampling run together with its intermediate data.
#[derive(Clone, Debug)]
pub struct Subsampled {
    pub result: VilcbResult,
    /// `N^trim` per `(h, s)` for episodic data or per `(s, a)` for Markovian data.
    pub trim: Array2<u64>,
    pub main: TransitionDataset,
    pub kept: TransitionDataset,
}

/// Split, trim using the auxiliary half, subsample the main half at random
/// and run VI-LCB on what is left.
pub fn subsampled_vi_lcb_finite(
    data: &EpisodicDataset,
    task: &EpisodicTask,
    cfg: &PenaltyConfig,
    seed: u64,
) -> Result<Subsampled> {
    if data.horizon != task.horizon() {
        return Err(Error::invalid(
            "dataset and rewards disagree on the horizon",
        ));
    }
    let (main, aux) = split_episodic(data);
    let main = main.to_transitions();
    let trim = trim_counts_finite(&aux.to_transitions().count().state_counts(), cfg.delta)?;
    let kept = subsample_finite(&main, &trim, seed)?;
    let result = vi_lcb_finite(&kept, task, cfg)?;
    Ok(Subsampled {
        result,
        trim,
        main,
        kept,
    })
}

/// Markovian variant. With a known mixing time the trim uses
/// `k = 665 t_mix`; otherwise `k` is chosen per pair. The first `N^trim(s,a)`
/// transitions of every pair are kept. `control.tau_max` defaults to
/// `ceil(ln(T/(1-gamma)) / (1-gamma))`.
pub fn subsampled_vi_lcb_markov(
    traj: &MarkovTrajectory,
    task: &DiscountedTask,
    cfg: &PenaltyConfig,
    t_mix: Option<f64>,
    control: IterationControl,
) -> Result<Subsampled> {
    let (main, aux) = split_markov(traj);
    let aux_counts = aux.count().step_counts(0);
    let trim = match t_mix {
        Some(t) => trim_counts_markov(&aux_counts, MIXING_TRIM_FACTOR * t, cfg.delta)?,
        None => trim_counts_adaptive(&aux_counts, &main.count().step_counts(0), cfg.delta)?,
    };
    let kept = subsample_markov(&main, &trim)?;
    let control = IterationControl {
        tau_max: Some(
            control
                .tau_max
                .unwrap_or_else(|| default_tau_max_markov(traj.len(), task.gamma)),
        ),
        tol: control.tol,
    };
    let result = vi_lcb_infinite(&kept, task, cfg, control)?;
    Ok(Subsampled {
        result,
        trim,
        main,
        kept,
    })
}
