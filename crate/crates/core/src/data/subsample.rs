use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::data::dataset::{EpisodicDataset, MarkovTrajectory, TransitionDataset};
use crate::error::{Error, Result};
use crate::rng::stream;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "delta must lie in (0,1), got {delta}"
        )))
    }
}

/// First `ceil(K/2)` trajectories go to the main half.
pub fn split_episodic(data: &EpisodicDataset) -> (EpisodicDataset, EpisodicDataset) {
    let cut = data.trajectories.len().div_ceil(2);
    let (main, aux) = data.trajectories.split_at(cut);
    (
        data.with_trajectories(main.to_vec()),
        data.with_trajectories(aux.to_vec()),
    )
}

/// `N^trim_h(s) = floor(max{N - 10 sqrt(N ln(HS/delta)), 0})` on the auxiliary
/// state counts `[H, S]`.
pub fn trim_counts_finite(aux_state_counts: &Array2<u64>, delta: f64) -> Result<Array2<u64>> {
    check_delta(delta)?;
    let (hz, ns) = aux_state_counts.dim();
    let log = ((hz * ns) as f64 / delta).ln();
    Ok(aux_state_counts.mapv(|n| {
        let n = n as f64;
        (n - 10.0 * (n * log).sqrt()).max(0.0).floor() as u64
    }))
}

/// Keeps `min{trim_h(s), N^main_h(s)}` transitions of every `(h, s)` cell,
/// chosen uniformly without replacement. Surviving transitions keep their
/// original relative order.
pub fn subsample_finite(
    main: &TransitionDataset,
    trim: &Array2<u64>,
    seed: u64,
) -> Result<TransitionDataset> {
    let hz = main
        .horizon()
        .ok_or_else(|| Error::invalid("random subsampling needs step-annotated transitions"))?;
    let ns = main.num_states();
    if trim.dim() != (hz, ns) {
        return Err(Error::invalid("trim table has the wrong shape"));
    }
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); hz * ns];
    for (i, t) in main.transitions().iter().enumerate() {
        cells[t.step * ns + t.state].push(i);
    }
    let mut keep: Vec<usize> = cells
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(c, mut idx)| {
            let m = (trim[[c / ns, c % ns]] as usize).min(idx.len());
            if m < idx.len() {
                let mut rng = stream(seed, "subsample", c as u64);
                for i in 0..m {
                    let j = rng.random_range(i..idx.len());
                    idx.swap(i, j);
                }
                idx.truncate(m);
            }
            idx
        })
        .collect();
    keep.sort_unstable();
    let all = main.transitions();
    TransitionDataset::new(
        ns,
        main.num_actions(),
        Some(hz),
        keep.into_iter().map(|i| all[i]).collect(),
    )
}

/// First `floor(T/2)` transitions form the main half, the rest the auxiliary half.
pub fn split_markov(traj: &MarkovTrajectory) -> (TransitionDataset, TransitionDataset) {
    let t = traj.len();
    let cut = t / 2;
    (traj.transitions(0..cut), traj.transitions(cut..t))
}

fn markov_cell(n_aux: u64, k: f64, log: f64) -> u64 {
    if n_aux as f64 > k * log {
        n_aux / 3
    } else {
        0
    }
}

fn markov_log(shape: (usize, usize), delta: f64) -> f64 {
    ((shape.0 * shape.1) as f64 / delta).ln()
}

/// `N^trim_k(s,a) = floor(N^aux(s,a)/3) * 1{N^aux(s,a) > k ln(SA/delta)}`.
pub fn trim_counts_markov(aux_counts: &Array2<u64>, k: f64, delta: f64) -> Result<Array2<u64>> {
    check_delta(delta)?;
    let log = markov_log(aux_counts.dim(), delta);
    Ok(aux_counts.mapv(|n| markov_cell(n, k, log)))
}

/// Smallest integer `k >= 0` with `N^trim_k(s,a) <= N^main(s,a)`, per pair.
pub fn adaptive_k(
    aux_counts: &Array2<u64>,
    main_counts: &Array2<u64>,
    delta: f64,
) -> Result<Array2<u64>> {
    check_delta(delta)?;
    if aux_counts.dim() != main_counts.dim() {
        return Err(Error::invalid("count tables differ in shape"));
    }
    let log = markov_log(aux_counts.dim(), delta);
    let fits = |n_aux: u64, n_main: u64, k: u64| markov_cell(n_aux, k as f64, log) <= n_main;
    Ok(ndarray::Zip::from(aux_counts)
        .and(main_counts)
        .map_collect(|&n_aux, &n_main| {
            if fits(n_aux, n_main, 0) {
                return 0;
            }
            // the indicator switches off at k = N^aux / ln(SA/delta)
            let mut k = (n_aux as f64 / log).ceil().max(1.0) as u64;
            while k > 1 && fits(n_aux, n_main, k - 1) {
                k -= 1;
            }
            while !fits(n_aux, n_main, k) {
                k += 1;
            }
            k
        }))
}

/// `N^trim` under the adaptive choice of `k` for every pair.
pub fn trim_counts_adaptive(
    aux_counts: &Array2<u64>,
    main_counts: &Array2<u64>,
    delta: f64,
) -> Result<Array2<u64>> {
    let k = adaptive_k(aux_counts, main_counts, delta)?;
    let log = markov_log(aux_counts.dim(), delta);
    Ok(ndarray::Zip::from(aux_counts)
        .and(&k)
        .map_collect(|&n, &k| markov_cell(n, k as f64, log)))
}

/// Keeps the first `trim(s,a)` transitions from every pair, in trajectory order.
pub fn subsample_markov(main: &TransitionDataset, trim: &Array2<u64>) -> Result<TransitionDataset> {
    if trim.dim() != (main.num_states(), main.num_actions()) {
        return Err(Error::invalid("trim table has the wrong shape"));
    }
    let mut left = trim.clone();
    let kept = main
        .transitions()
        .iter()
        .filter(|t| {
            let slot = &mut left[[t.state, t.action]];
            if *slot > 0 {
                *slot -= 1;
                true
            } else {
                false
            }
        })
        .copied()
        .collect();
    TransitionDataset::new(main.num_states(), main.num_actions(), None, kept)
}

/// Successors `s_{t_i + 1}` for the successive visit times `t_1 < t_2 < ...` of
/// `(s, a)`.
pub fn visit_index_regroup(traj: &MarkovTrajectory, s: usize, a: usize) -> Vec<usize> {
    (0..traj.len())
        .filter(|&t| traj.states[t] == s && traj.actions[t] == a)
        .map(|t| traj.states[t + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::{Trajectory, Transition};
    use crate::mdp::{EpisodicPolicy, Policy};
    use ndarray::array;

    fn episodes(k: usize) -> EpisodicDataset {
        EpisodicDataset {
            num_states: 3,
            num_actions: 2,
            horizon: 2,
            trajectories: (0..k)
                .map(|i| Trajectory {
                    states: vec![i % 3, (i + 1) % 3, (i + 2) % 3],
                    actions: vec![i % 2, (i / 2) % 2],
                })
                .collect(),
            initial: vec![1.0 / 3.0; 3],
            behavior: EpisodicPolicy::repeat(Policy::uniform(3, 2), 2),
        }
    }

    #[test]
    fn episodic_split() {
        let (m, a) = split_episodic(&episodes(2));
        assert_eq!((m.num_trajectories(), a.num_trajectories()), (1, 1));
        let (m, a) = split_episodic(&episodes(0));
        assert_eq!((m.num_trajectories(), a.num_trajectories()), (0, 0));
        let (m, a) = split_episodic(&episodes(7));
        assert_eq!((m.num_trajectories(), a.num_trajectories()), (4, 3));

        let whole = episodes(100);
        let (m, a) = split_episodic(&whole);
        let sum = m.to_transitions().count().visits() + a.to_transitions().count().visits();
        assert_eq!(&sum, whole.to_transitions().count().visits());
    }

    #[test]
    fn finite_trim_formula() {
        // H S / delta = e^4
        let delta = 4.0 / 4f64.exp();
        let t = trim_counts_finite(&array![[0, 400], [10_000, 3]], delta).unwrap();
        assert_eq!(t[[0, 0]], 0);
        assert_eq!(t[[0, 1]], 0);
        assert!((7999..=8000).contains(&t[[1, 0]]), "{}", t[[1, 0]]);
        assert_eq!(t[[1, 1]], 0);
    }

    fn main_half() -> TransitionDataset {
        episodes(40).to_transitions()
    }

    #[test]
    fn finite_subsample_cases() {
        let main = main_half();
        let none = subsample_finite(&main, &Array2::zeros((2, 3)), 1).unwrap();
        assert!(none.is_empty());
        let all = subsample_finite(&main, &Array2::from_elem((2, 3), 1000), 1).unwrap();
        assert_eq!(all, main);

        let trim = array![[2, 100, 5], [0, 7, 1]];
        let sub = subsample_finite(&main, &trim, 8).unwrap();
        let got = sub.count().state_counts();
        let have = main.count().state_counts();
        for h in 0..2 {
            for s in 0..3 {
                assert_eq!(got[[h, s]], trim[[h, s]].min(have[[h, s]]));
            }
        }
        assert_eq!(sub, subsample_finite(&main, &trim, 8).unwrap());
    }

    fn chain(states: Vec<usize>, actions: Vec<usize>) -> MarkovTrajectory {
        MarkovTrajectory {
            num_states: 3,
            num_actions: 2,
            states,
            actions,
            behavior: Policy::uniform(3, 2),
        }
    }

    #[test]
    fn markov_split() {
        let t = chain(vec![0, 1, 2], vec![0, 1, 0]);
        let (m, a) = split_markov(&t);
        assert_eq!(m.transitions(), &[Transition::new(0, 0, 1)]);
        assert_eq!(a.transitions(), &[Transition::new(1, 1, 2)]);
        let (m, a) = split_markov(&chain(vec![2], vec![1]));
        assert!(m.is_empty() && a.is_empty());
        let t = chain(vec![0, 1, 2, 0, 1, 2], vec![0, 1, 0, 1, 0, 1]);
        let (m, a) = split_markov(&t);
        assert_eq!((m.len(), a.len()), (2, 3));
        let sum = m.count().visits() + a.count().visits();
        assert_eq!(&sum, t.transitions(0..5).count().visits());
    }

    #[test]
    fn markov_trim_formula() {
        // SA / delta = e
        let delta = 2.0 / 1f64.exp();
        let aux = array![[300, 9]];
        let t = trim_counts_markov(&aux, 200.0, delta).unwrap();
        assert_eq!(t[[0, 0]], 100);
        assert_eq!(t[[0, 1]], 0);
        assert_eq!(trim_counts_markov(&aux, 0.0, delta).unwrap()[[0, 1]], 3);
        assert_eq!(trim_counts_markov(&aux, 400.0, delta).unwrap()[[0, 0]], 0);
    }

    fn linear_scan(n_aux: u64, n_main: u64, log: f64) -> u64 {
        (0..)
            .find(|&k| markov_cell(n_aux, k as f64, log) <= n_main)
            .unwrap()
    }

    #[test]
    fn adaptive_k_cases() {
        let delta = 2.0 / 1f64.exp();
        let k = adaptive_k(&array![[300, 30]], &array![[50, 10]], delta).unwrap();
        assert_eq!(k, array![[300, 0]]);
        assert_eq!(
            adaptive_k(&array![[0, 0]], &array![[0, 0]], delta).unwrap(),
            array![[0, 0]]
        );
    }

    proptest::proptest! {
        #[test]
        fn adaptive_k_matches_scan(n_aux in 0u64..5000, n_main in 0u64..2000, sa in 1usize..40, delta in 0.01f64..0.99) {
            let aux = Array2::from_elem((1, sa), n_aux);
            let main = Array2::from_elem((1, sa), n_main);
            let k = adaptive_k(&aux, &main, delta).unwrap();
            let log = (sa as f64 / delta).ln();
            proptest::prop_assert_eq!(k[[0, 0]], linear_scan(n_aux, n_main, log));
        }

        #[test]
        fn trims_bounded_and_monotone(n in 0u64..100_000, k1 in 0.0f64..500.0, dk in 0.0f64..500.0) {
            let aux = array![[n]];
            let f = trim_counts_finite(&aux, 0.1).unwrap()[[0, 0]];
            proptest::prop_assert!(f <= n);
            let a = trim_counts_markov(&aux, k1, 0.1).unwrap()[[0, 0]];
            let b = trim_counts_markov(&aux, k1 + dk, 0.1).unwrap()[[0, 0]];
            proptest::prop_assert!(b <= a && a <= n);
        }
    }

    #[test]
    fn markov_take_first() {
        let t = chain(vec![0, 1, 0, 1, 0, 2, 0], vec![0, 0, 0, 1, 0, 0, 0]);
        let all = t.transitions(0..6);
        assert!(subsample_markov(&all, &Array2::zeros((3, 2)))
            .unwrap()
            .is_empty());
        assert_eq!(
            subsample_markov(&all, &Array2::from_elem((3, 2), 9)).unwrap(),
            all
        );
        let sub = subsample_markov(&all, &array![[2, 0], [0, 0], [0, 0]]).unwrap();
        // (0,0) occurs at t = 0, 2, 4; the first two survive
        assert_eq!(
            sub.transitions(),
            &[all.transitions()[0], all.transitions()[2]]
        );
    }

    #[test]
    fn regroup() {
        let t = chain(vec![0, 1, 0, 2, 0, 1], vec![0, 1, 0, 0, 0, 0]);
        assert!(visit_index_regroup(&t, 2, 1).is_empty());
        assert_eq!(visit_index_regroup(&t, 1, 1), vec![0]);
        assert_eq!(visit_index_regroup(&t, 0, 0), vec![1, 2, 1]);
    }
}
