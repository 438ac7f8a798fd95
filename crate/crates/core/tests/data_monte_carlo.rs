use ndarray::Array2;

use vilcb_core::analysis::{stationary_distribution, total_variation, MarkovChain};
use vilcb_core::bench::{random_discounted, random_episodic, GamblerSpec};
use vilcb_core::data::{
    gen_episodic, gen_iid, gen_markov, gen_per_cell_counts, split_episodic, split_markov,
    subsample_finite, subsample_markov, trim_counts_finite, trim_counts_markov,
    visit_index_regroup,
};
use vilcb_core::mdp::{EpisodicPolicy, Policy};

#[test]
fn markov_state_frequencies_approach_stationary_law() {
    let mdp = random_discounted(4, 2, 0.9, 21).unwrap();
    let pi = Policy::uniform(4, 2);
    let p = Array2::from_shape_fn((4, 4), |(s, t)| {
        (0..2)
            .map(|a| 0.5 * mdp.kernel().prob(s, a, t))
            .sum::<f64>()
    });
    let mu = stationary_distribution(&MarkovChain::new(p).unwrap()).unwrap();
    let traj = gen_markov(&mdp, &pi, 0, 200_000, 4).unwrap();
    let mut freq = vec![0.0; 4];
    for &s in &traj.states[..traj.len()] {
        freq[s] += 1.0 / traj.len() as f64;
    }
    assert!(total_variation(&freq, mu.as_slice().unwrap()) < 0.01);
}

#[test]
fn regrouped_successors_follow_the_kernel() {
    let mdp = random_discounted(3, 2, 0.9, 8).unwrap();
    let traj = gen_markov(&mdp, &Policy::uniform(3, 2), 1, 300_000, 2).unwrap();
    for (s, a) in [(0, 0), (2, 1)] {
        let next = visit_index_regroup(&traj, s, a);
        let mut freq = vec![0.0; 3];
        for &x in &next {
            freq[x] += 1.0 / next.len() as f64;
        }
        assert!(total_variation(&freq, &mdp.kernel().row(s, a).to_dense(3)) < 0.02);
    }
}

#[test]
fn iid_frequencies_match_data_distribution() {
    let mdp = random_discounted(3, 2, 0.5, 1).unwrap();
    let d_b = Array2::from_shape_vec((3, 2), vec![0.1, 0.2, 0.3, 0.05, 0.15, 0.2]).unwrap();
    let data = gen_iid(&mdp, &d_b, 100_000, 6).unwrap();
    let counts = data.count().step_counts(0);
    for (c, d) in counts.iter().zip(d_b.iter()) {
        assert!((*c as f64 / 1e5 - d).abs() < 0.01);
    }
}

#[test]
fn per_cell_counts_are_exact_and_masked() {
    let spec = GamblerSpec {
        goal: 6,
        horizon: 3,
        p_head: 0.45,
    };
    let mdp = spec.build().unwrap();
    let counts = gen_per_cell_counts(&mdp, 17, 3);
    for h in 0..3 {
        for s in 0..spec.num_states() {
            for a in 0..spec.num_actions() {
                let expect = if spec.is_valid(s, a) { 17 } else { 0 };
                assert_eq!(counts.get(h, s, a), expect);
            }
        }
    }
    assert_eq!(counts.total(), 17 * spec.num_cells());
}

#[test]
fn trim_stays_below_main_counts_in_most_replications() {
    let mdp = random_episodic(2, 2, 2, 5).unwrap();
    let pi = EpisodicPolicy::repeat(Policy::uniform(2, 2), 2);
    let mut held = 0;
    for rep in 0..100 {
        let data = gen_episodic(&mdp, &[0.5, 0.5], &pi, 3000, rep).unwrap();
        let (main, aux) = split_episodic(&data);
        let trim = trim_counts_finite(&aux.to_transitions().count().state_counts(), 0.1).unwrap();
        let main_t = main.to_transitions();
        let kept = subsample_finite(&main_t, &trim, rep).unwrap();
        let kept_counts = kept.count().state_counts();
        let main_counts = main_t.count().state_counts();
        for ((k, t), m) in kept_counts.iter().zip(trim.iter()).zip(main_counts.iter()) {
            assert_eq!(*k, (*t).min(*m));
        }
        if trim.iter().zip(main_counts.iter()).all(|(t, m)| t <= m) {
            held += 1;
        }
    }
    assert!(held >= 90, "{held}");
}

#[test]
fn markov_subsample_keeps_a_prefix_per_pair() {
    let mdp = random_discounted(3, 2, 0.9, 2).unwrap();
    let traj = gen_markov(&mdp, &Policy::uniform(3, 2), 0, 40_000, 7).unwrap();
    let (main, aux) = split_markov(&traj);
    let trim = trim_counts_markov(&aux.count().step_counts(0), 1.0, 0.1).unwrap();
    let kept = subsample_markov(&main, &trim).unwrap();
    for s in 0..3 {
        for a in 0..2 {
            let from_kept: Vec<usize> = kept
                .transitions()
                .iter()
                .filter(|t| t.state == s && t.action == a)
                .map(|t| t.next_state)
                .collect();
            let prefix: Vec<usize> = main
                .transitions()
                .iter()
                .filter(|t| t.state == s && t.action == a)
                .map(|t| t.next_state)
                .take(from_kept.len())
                .collect();
            assert_eq!(from_kept, prefix);
            assert_eq!(
                from_kept.len() as u64,
                trim[[s, a]].min(main.count().get(0, s, a))
            );
        }
    }
}
