use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::mdp::model::{check_distribution, DiscountedMDP, EpisodicMDP, EpisodicPolicy, Policy};
use crate::mdp::solve::DENSE_SOLVE_MAX_STATES;

const DIST_TOL: f64 = 1e-9;
const SERIES_TAIL: f64 = 1e-10;

/// State and state-action occupancy. The leading axis is the step; discounted
/// occupancies have a single step.
#[derive(Clone, Debug)]
pub struct Occupancy {
    pub state: Array2<f64>,
    pub state_action: Array3<f64>,
    pub initial: Vec<f64>,
}

impl Occupancy {
    pub fn num_steps(&self) -> usize {
        self.state.nrows()
    }

    fn from_states(
        state: Array2<f64>,
        policies: &[&Policy],
        num_actions: usize,
        initial: &[f64],
    ) -> Self {
        let (hz, ns) = state.dim();
        let mut state_action = Array3::zeros((hz, ns, num_actions));
        for h in 0..hz {
            for s in 0..ns {
                for (a, p) in policies[h].action_probs(s) {
                    state_action[[h, s, a]] = state[[h, s]] * p;
                }
            }
        }
        Occupancy {
            state,
            state_action,
            initial: initial.to_vec(),
        }
    }
}

fn check_rho(rho: &[f64], ns: usize) -> Result<()> {
    if rho.len() != ns {
        return Err(Error::invalid("initial distribution has the wrong length"));
    }
    check_distribution(rho, DIST_TOL, "initial distribution")
}

/// Forward recursion `d_1 = rho`, `d_{h+1}^T = d_h^T P_h^pi`.
pub fn occupancy_episodic(
    mdp: &EpisodicMDP,
    policy: &EpisodicPolicy,
    rho: &[f64],
) -> Result<Occupancy> {
    policy.check_shape(mdp)?;
    let ns = mdp.num_states();
    check_rho(rho, ns)?;
    let hz = mdp.horizon();
    let mut state = Array2::<f64>::zeros((hz, ns));
    state.row_mut(0).assign(&ndarray::ArrayView1::from(rho));
    for h in 0..hz - 1 {
        let pi = policy.step(h);
        for s in 0..ns {
            let ds = state[[h, s]];
            if ds == 0.0 {
                continue;
            }
            for (a, pa) in pi.action_probs(s) {
                for (next, p) in mdp.kernel(h).row(s, a).iter(ns) {
                    state[[h + 1, next]] += ds * pa * p;
                }
            }
        }
    }
    let policies: Vec<&Policy> = policy.steps.iter().collect();
    Ok(Occupancy::from_states(
        state,
        &policies,
        mdp.num_actions(),
        rho,
    ))
}

/// Discounted occupancy `d^T = (1 - gamma) rho^T (I - gamma P^pi)^{-1}`.
pub fn occupancy_discounted(
    mdp: &DiscountedMDP,
    policy: &Policy,
    rho: &[f64],
) -> Result<Occupancy> {
    let ns = mdp.num_states();
    policy.check_shape(ns, mdp.num_actions())?;
    check_rho(rho, ns)?;
    if ns > DENSE_SOLVE_MAX_STATES {
        return occupancy_discounted_series(mdp, policy, rho, None);
    }
    let gamma = mdp.gamma();
    // transpose system: (I - gamma P^pi)^T d = (1 - gamma) rho
    let mut m = DMatrix::<f64>::identity(ns, ns);
    for s in 0..ns {
        for (a, pa) in policy.action_probs(s) {
            for (next, p) in mdp.kernel().row(s, a).iter(ns) {
                m[(next, s)] -= gamma * pa * p;
            }
        }
    }
    let b = DVector::from_iterator(ns, rho.iter().map(|p| (1.0 - gamma) * p));
    let d = m
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::invalid("occupancy system is singular"))?;
    let state = Array2::from_shape_fn((1, ns), |(_, s)| d[s].max(0.0));
    Ok(Occupancy::from_states(
        state,
        &[policy],
        mdp.num_actions(),
        rho,
    ))
}

/// Truncated series `(1 - gamma) sum_t gamma^t rho^T (P^pi)^t`. With
/// `terms = None` the series runs until the tail mass `gamma^t` is below 1e-10.
pub fn occupancy_discounted_series(
    mdp: &DiscountedMDP,
    policy: &Policy,
    rho: &[f64],
    terms: Option<usize>,
) -> Result<Occupancy> {
    let ns = mdp.num_states();
    policy.check_shape(ns, mdp.num_actions())?;
    check_rho(rho, ns)?;
    let gamma = mdp.gamma();
    let mut current = rho.to_vec();
    let mut total = vec![0.0; ns];
    let mut weight = 1.0 - gamma;
    let mut discount = 1.0;
    let mut t = 0usize;
    loop {
        let stop = match terms {
            Some(n) => t >= n,
            None => discount <= SERIES_TAIL,
        };
        if stop {
            break;
        }
        for s in 0..ns {
            total[s] += weight * current[s];
        }
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if current[s] == 0.0 {
                continue;
            }
            for (a, pa) in policy.action_probs(s) {
                for (ns2, p) in mdp.kernel().row(s, a).iter(ns) {
                    next[ns2] += current[s] * pa * p;
                }
            }
        }
        current = next;
        weight *= gamma;
        discount *= gamma;
        t += 1;
        if gamma == 0.0 && terms.is_none() {
            break;
        }
    }
    let state = Array2::from_shape_vec((1, ns), total).expect("shape");
    Ok(Occupancy::from_states(
        state,
        &[policy],
        mdp.num_actions(),
        rho,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::model::{Kernel, TransitionRow};
    use ndarray::array;

    #[test]
    fn zero_discount_is_initial() {
        let k = Kernel::new(2, 1, vec![TransitionRow::point(1), TransitionRow::point(0)]).unwrap();
        let mdp = DiscountedMDP::new(k, array![[1.0], [0.0]], 0.0).unwrap();
        let d =
            occupancy_discounted(&mdp, &Policy::Deterministic(vec![0, 0]), &[0.3, 0.7]).unwrap();
        assert!((d.state[[0, 0]] - 0.3).abs() < 1e-15);
        assert!((d.state[[0, 1]] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn absorbing_state_collects_everything() {
        let k = Kernel::new(1, 2, vec![TransitionRow::point(0); 2]).unwrap();
        let mdp = DiscountedMDP::new(k, array![[0.0, 1.0]], 0.9).unwrap();
        let d = occupancy_discounted(&mdp, &Policy::uniform(1, 2), &[1.0]).unwrap();
        assert!((d.state[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((d.state_action[[0, 0, 1]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_step_episodic_is_rho() {
        let k = Kernel::new(2, 1, vec![TransitionRow::Uniform; 2]).unwrap();
        let mdp = EpisodicMDP::stationary(k, array![[0.0], [1.0]], 1).unwrap();
        let pi = EpisodicPolicy::repeat(Policy::Deterministic(vec![0, 0]), 1);
        let d = occupancy_episodic(&mdp, &pi, &[0.25, 0.75]).unwrap();
        assert_eq!(d.state.row(0).to_vec(), vec![0.25, 0.75]);
    }

    #[test]
    fn three_state_chain_matches_matrix_products() {
        let p = [[0.5, 0.5, 0.0], [0.0, 0.2, 0.8], [0.3, 0.0, 0.7]];
        let rows = p.iter().map(|r| TransitionRow::from_dense(r)).collect();
        let k = Kernel::new(3, 1, rows).unwrap();
        let mdp = EpisodicMDP::stationary(k, Array2::zeros((3, 1)), 3).unwrap();
        let pi = EpisodicPolicy::repeat(Policy::Deterministic(vec![0, 0, 0]), 3);
        let rho = [1.0 / 3.0; 3];
        let d = occupancy_episodic(&mdp, &pi, &rho).unwrap();
        let mut oracle = rho;
        for h in 0..3 {
            for s in 0..3 {
                assert!((d.state[[h, s]] - oracle[s]).abs() < 1e-12);
            }
            let mut next = [0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    next[j] += oracle[i] * p[i][j];
                }
            }
            oracle = next;
        }
    }
}
