use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Binomial;
use rayon::prelude::*;

use crate::data::dataset::{
    CountTable, EpisodicDataset, MarkovTrajectory, Trajectory, Transition, TransitionDataset,
};
use crate::error::{Error, Result};
use crate::mdp::{
    check_distribution, DiscountedMDP, EpisodicMDP, EpisodicPolicy, Policy, TransitionRow,
};
use crate::rng::stream;

const DIST_TOL: f64 = 1e-9;

fn weighted(weights: &[f64], what: &str) -> Result<WeightedIndex<f64>> {
    check_distribution(weights, DIST_TOL, what)?;
    WeightedIndex::new(weights).map_err(|e| Error::invalid(format!("{what}: {e}")))
}

/// `N` independent draws `(s,a) ~ d_b`, `s' ~ P(.|s,a)`.
pub fn gen_iid(
    mdp: &DiscountedMDP,
    d_b: &Array2<f64>,
    n: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if d_b.dim() != (ns, na) {
        return Err(Error::invalid("behavior distribution has the wrong shape"));
    }
    let flat: Vec<f64> = d_b.iter().copied().collect();
    let pick = weighted(&flat, "behavior distribution")?;
    let mut rng = stream(seed, "iid", 0);
    let transitions = (0..n)
        .map(|_| {
            let i = pick.sample(&mut rng);
            let (s, a) = (i / na, i % na);
            Transition::new(s, a, mdp.kernel().row(s, a).sample(&mut rng, ns))
        })
        .collect();
    TransitionDataset::new(ns, na, None, transitions)
}

/// `K` independent episodes from `rho_b` under `pi_b`. Episode `k` uses its own
/// derived stream, so the result does not depend on the thread schedule.
pub fn gen_episodic(
    mdp: &EpisodicMDP,
    rho_b: &[f64],
    pi_b: &EpisodicPolicy,
    k: usize,
    seed: u64,
) -> Result<EpisodicDataset> {
    let ns = mdp.num_states();
    if rho_b.len() != ns {
        return Err(Error::invalid("initial distribution has the wrong length"));
    }
    pi_b.check_shape(mdp)?;
    let init = weighted(rho_b, "initial distribution")?;
    let hz = mdp.horizon();
    let trajectories = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "episode", i as u64);
            let mut states = Vec::with_capacity(hz + 1);
            let mut actions = Vec::with_capacity(hz);
            let mut s = init.sample(&mut rng);
            states.push(s);
            for h in 0..hz {
                let a = pi_b.step(h).sample(&mut rng, s);
                s = mdp.kernel(h).row(s, a).sample(&mut rng, ns);
                actions.push(a);
                states.push(s);
            }
            Trajectory { states, actions }
        })
        .collect();
    Ok(EpisodicDataset {
        num_states: ns,
        num_actions: mdp.num_actions(),
        horizon: hz,
        trajectories,
        initial: rho_b.to_vec(),
        behavior: pi_b.clone(),
    })
}

/// Single rollout of `T` transitions from `s0` under `pi_b`.
pub fn gen_markov(
    mdp: &DiscountedMDP,
    pi_b: &Policy,
    s0: usize,
    t: usize,
    seed: u64,
) -> Result<MarkovTrajectory> {
    let ns = mdp.num_states();
    pi_b.check_shape(ns, mdp.num_actions())?;
    if s0 >= ns {
        return Err(Error::invalid("initial state out of range"));
    }
    let mut rng = stream(seed, "markov", 0);
    let mut states = Vec::with_capacity(t + 1);
    let mut actions = Vec::with_capacity(t + 1);
    let mut s = s0;
    for _ in 0..t {
        let a = pi_b.sample(&mut rng, s);
        states.push(s);
        actions.push(a);
        s = mdp.kernel().row(s, a).sample(&mut rng, ns);
    }
    states.push(s);
    actions.push(pi_b.sample(&mut rng, s));
    Ok(MarkovTrajectory {
        num_states: ns,
        num_actions: mdp.num_actions(),
        states,
        actions,
        behavior: pi_b.clone(),
    })
}

/// Multinomial successor counts for `n` draws from `row`, via a chain of
/// conditional binomials.
pub fn multinomial_counts<R: Rng + ?Sized>(
    row: &TransitionRow,
    num_states: usize,
    n: u64,
    rng: &mut R,
) -> Vec<(usize, u64)> {
    let entries: Vec<(usize, f64)> = row.iter(num_states).collect();
    let mut out = Vec::new();
    let mut left = n;
    let mut mass = 1.0;
    for (i, &(next, p)) in entries.iter().enumerate() {
        if left == 0 {
            break;
        }
        let x = if i + 1 == entries.len() || mass <= p {
            left
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, q)
                .expect("probability in [0,1]")
                .sample(rng)
        };
        if x > 0 {
            out.push((next, x));
        }
        left -= x;
        mass -= p;
    }
    out
}

/// `n` generative-model draws for every allowed `(h, s, a)` cell, returned as
/// counts. Equal in distribution to sampling the transitions one at a time.
pub fn gen_per_cell_counts(mdp: &EpisodicMDP, n: u64, seed: u64) -> CountTable {
    let (hz, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let cells: Vec<(usize, usize, usize)> = (0..hz)
        .flat_map(|h| (0..ns).flat_map(move |s| (0..na).map(move |a| (h, s, a))))
        .filter(|&(_, s, a)| mdp.mask().is_none_or(|m| m.is_allowed(s, a)))
        .collect();
    let drawn: Vec<Vec<(usize, u64)>> = cells
        .par_iter()
        .map(|&(h, s, a)| {
            let mut rng = stream(seed, "cell", ((h * ns + s) * na + a) as u64);
            multinomial_counts(mdp.kernel(h).row(s, a), ns, n, &mut rng)
        })
        .collect();
    let mut table = CountTable::zeros(hz, ns, na);
    for (&(h, s, a), succ) in cells.iter().zip(drawn) {
        for (next, c) in succ {
            table.add(h, s, a, next, c);
        }
    }
    table
}
