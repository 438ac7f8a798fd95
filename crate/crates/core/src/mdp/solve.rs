use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};
use crate::mdp::model::{
    argmax_lowest, check_distribution, max_allowed, DiscountedMDP, EpisodicMDP, EpisodicPolicy,
    Policy,
};

/// Largest state space evaluated by a dense linear solve.
pub const DENSE_SOLVE_MAX_STATES: usize = 2000;
/// Sup-norm accuracy targeted by the iterative solvers.
pub const SOLVER_TOL: f64 = 1e-10;
/// Q-values closer than this are treated as tied when extracting the
/// optimal policy from the true model; ties go to the lowest action.
pub const TIE_TOL: f64 = 1e-12;

const DIST_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct DiscountedSolution {
    pub policy: Policy,
    pub values: Array1<f64>,
    pub q: Array2<f64>,
}

/// Values are indexed `[h][s]` with `h = 0..=H`; row `H` is the zero terminal value.
#[derive(Clone, Debug)]
pub struct EpisodicSolution {
    pub policy: EpisodicPolicy,
    pub values: Array2<f64>,
    pub q: Array3<f64>,
}

fn policy_reward(reward: &Array2<f64>, policy: &Policy, s: usize) -> f64 {
    policy
        .action_probs(s)
        .into_iter()
        .map(|(a, p)| p * reward[[s, a]])
        .sum()
}

/// `V^pi` for a discounted MDP, solving `V = r^pi + gamma P^pi V`.
pub fn policy_eval_discounted(mdp: &DiscountedMDP, policy: &Policy) -> Result<Array1<f64>> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    policy.check_shape(ns, na)?;
    let gamma = mdp.gamma();
    let r_pi: Vec<f64> = (0..ns)
        .map(|s| policy_reward(mdp.reward(), policy, s))
        .collect();

    if ns <= DENSE_SOLVE_MAX_STATES {
        let mut m = DMatrix::<f64>::identity(ns, ns);
        for s in 0..ns {
            for (a, pa) in policy.action_probs(s) {
                for (next, p) in mdp.kernel().row(s, a).iter(ns) {
                    m[(s, next)] -= gamma * pa * p;
                }
            }
        }
        let b = DVector::from_vec(r_pi);
        let x = m
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::invalid("policy evaluation system is singular"))?;
        return Ok(Array1::from_iter(x.iter().copied()));
    }

    let mut v = Array1::<f64>::zeros(ns);
    let limit = iteration_limit(gamma);
    for _ in 0..limit {
        let next = Array1::from_shape_fn(ns, |s| {
            r_pi[s]
                + gamma
                    * policy
                        .action_probs(s)
                        .into_iter()
                        .map(|(a, pa)| pa * mdp.kernel().row(s, a).expect(v.as_slice().unwrap()))
                        .sum::<f64>()
        });
        let delta = sup_diff(&next, &v);
        v = next;
        if converged(delta, gamma) {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        what: "policy evaluation",
        limit,
    })
}

/// `Q^pi = r + gamma P V^pi`.
pub fn policy_q_discounted(mdp: &DiscountedMDP, policy: &Policy) -> Result<Array2<f64>> {
    let v = policy_eval_discounted(mdp, policy)?;
    Ok(mdp
        .kernel()
        .backup(mdp.reward(), v.as_slice().unwrap(), mdp.gamma()))
}

/// Backward recursion `V_h = r_h^pi + P_h^pi V_{h+1}` with `V_{H} = 0`
/// (zero-based). Returns `[H + 1][S]`.
pub fn policy_eval_episodic(mdp: &EpisodicMDP, policy: &EpisodicPolicy) -> Result<Array2<f64>> {
    policy.check_shape(mdp)?;
    let (hz, ns) = (mdp.horizon(), mdp.num_states());
    let mut values = Array2::<f64>::zeros((hz + 1, ns));
    for h in (0..hz).rev() {
        let next = values.row(h + 1).to_vec();
        let kernel = mdp.kernel(h);
        let pi = policy.step(h);
        for s in 0..ns {
            values[[h, s]] = pi
                .action_probs(s)
                .into_iter()
                .map(|(a, pa)| pa * (mdp.reward()[[h, s, a]] + kernel.row(s, a).expect(&next)))
                .sum();
        }
    }
    Ok(values)
}

/// `Q_h^pi(s, a) = r_h(s, a) + P_{h,s,a} V_{h+1}^pi`, shape `[H][S][A]`.
pub fn policy_q_episodic(mdp: &EpisodicMDP, policy: &EpisodicPolicy) -> Result<Array3<f64>> {
    let values = policy_eval_episodic(mdp, policy)?;
    Ok(episodic_backup(mdp, &values))
}

fn episodic_backup(mdp: &EpisodicMDP, values: &Array2<f64>) -> Array3<f64> {
    let (hz, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut q = Array3::zeros((hz, ns, na));
    for h in 0..hz {
        let next = values.row(h + 1).to_vec();
        for s in 0..ns {
            for a in 0..na {
                q[[h, s, a]] = mdp.reward()[[h, s, a]] + mdp.kernel(h).row(s, a).expect(&next);
            }
        }
    }
    q
}

fn sup_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// ||V_k - V*|| <= gamma / (1 - gamma) * ||V_k - V_{k-1}||
fn converged(delta: f64, gamma: f64) -> bool {
    delta * gamma <= SOLVER_TOL * (1.0 - gamma)
}

fn iteration_limit(gamma: f64) -> usize {
    if gamma == 0.0 {
        return 2;
    }
    // enough sweeps to shrink an error of 1/(1-gamma) below the tolerance
    let needed = ((SOLVER_TOL * (1.0 - gamma) * (1.0 - gamma)).ln() / gamma.ln()).ceil();
    (needed as usize).saturating_mul(2).max(100)
}

fn greedy(mdp: &DiscountedMDP, q: &Array2<f64>, tol: f64) -> Vec<usize> {
    (0..mdp.num_states())
        .map(|s| argmax_lowest(q.row(s), mdp.mask(), s, tol))
        .collect()
}

/// Optimal deterministic policy, `V*` and `Q*` of a discounted MDP.
///
/// Value iteration runs until the sup-norm error bound drops below
/// [`SOLVER_TOL`]; the greedy policy is then polished by exact policy
/// evaluation so that `V*` is the value of the returned policy.
pub fn solve_optimal_discounted(mdp: &DiscountedMDP) -> Result<DiscountedSolution> {
    let (ns, gamma) = (mdp.num_states(), mdp.gamma());
    let mut v = Array1::<f64>::zeros(ns);
    let limit = iteration_limit(gamma);
    let mut done = false;
    for _ in 0..limit {
        let q = mdp
            .kernel()
            .backup(mdp.reward(), v.as_slice().unwrap(), gamma);
        let next = Array1::from_shape_fn(ns, |s| max_allowed(q.row(s), mdp.mask(), s));
        let delta = sup_diff(&next, &v);
        v = next;
        if converged(delta, gamma) {
            done = true;
            break;
        }
    }
    if !done {
        return Err(Error::NotConverged {
            what: "value iteration",
            limit,
        });
    }

    let q = mdp
        .kernel()
        .backup(mdp.reward(), v.as_slice().unwrap(), gamma);
    let mut actions = greedy(mdp, &q, TIE_TOL);
    // policy-iteration polish: switch only on strict improvement
    for _ in 0..100 {
        let policy = Policy::Deterministic(actions.clone());
        let q_pi = policy_q_discounted(mdp, &policy)?;
        let mut changed = false;
        for s in 0..ns {
            let best = argmax_lowest(q_pi.row(s), mdp.mask(), s, TIE_TOL);
            if q_pi[[s, best]] > q_pi[[s, actions[s]]] + TIE_TOL {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            actions = greedy(mdp, &q_pi, TIE_TOL);
            break;
        }
    }
    let policy = Policy::Deterministic(actions);
    let values = policy_eval_discounted(mdp, &policy)?;
    let q = mdp
        .kernel()
        .backup(mdp.reward(), values.as_slice().unwrap(), gamma);
    Ok(DiscountedSolution { policy, values, q })
}

/// Exact backward dynamic programming for an episodic MDP.
pub fn solve_optimal_episodic(mdp: &EpisodicMDP) -> EpisodicSolution {
    let (hz, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut values = Array2::<f64>::zeros((hz + 1, ns));
    let mut q = Array3::<f64>::zeros((hz, ns, na));
    let mut steps = vec![Policy::Deterministic(Vec::new()); hz];
    for h in (0..hz).rev() {
        let next = values.row(h + 1).to_vec();
        let kernel = mdp.kernel(h);
        let mut actions = Vec::with_capacity(ns);
        for s in 0..ns {
            for a in 0..na {
                q[[h, s, a]] = mdp.reward()[[h, s, a]] + kernel.row(s, a).expect(&next);
            }
            let row = q.slice(ndarray::s![h, s, ..]);
            actions.push(argmax_lowest(row, mdp.mask(), s, TIE_TOL));
            values[[h, s]] = max_allowed(row, mdp.mask(), s);
        }
        steps[h] = Policy::Deterministic(actions);
    }
    EpisodicSolution {
        policy: EpisodicPolicy::new(steps),
        values,
        q,
    }
}

fn dot(rho: &[f64], v: ndarray::ArrayView1<f64>) -> f64 {
    rho.iter().zip(v.iter()).map(|(p, x)| p * x).sum()
}

fn clamp_gap(gap: f64) -> f64 {
    if gap < 0.0 && gap > -1e-10 {
        0.0
    } else {
        gap
    }
}

/// `V*(rho) - V^pi(rho)` for a discounted MDP.
pub fn value_gap_discounted(mdp: &DiscountedMDP, rho: &[f64], policy: &Policy) -> Result<f64> {
    if rho.len() != mdp.num_states() {
        return Err(Error::invalid("initial distribution has the wrong length"));
    }
    check_distribution(rho, DIST_TOL, "initial distribution")?;
    let star = solve_optimal_discounted(mdp)?;
    let v_pi = policy_eval_discounted(mdp, policy)?;
    Ok(clamp_gap(
        dot(rho, star.values.view()) - dot(rho, v_pi.view()),
    ))
}

/// `V*_1(rho) - V^pi_1(rho)` for an episodic MDP.
pub fn value_gap_episodic(mdp: &EpisodicMDP, rho: &[f64], policy: &EpisodicPolicy) -> Result<f64> {
    if rho.len() != mdp.num_states() {
        return Err(Error::invalid("initial distribution has the wrong length"));
    }
    check_distribution(rho, DIST_TOL, "initial distribution")?;
    let star = solve_optimal_episodic(mdp);
    value_gap_episodic_with(mdp, &star, rho, policy)
}

/// Same as [`value_gap_episodic`] with a precomputed optimal solution.
pub fn value_gap_episodic_with(
    mdp: &EpisodicMDP,
    star: &EpisodicSolution,
    rho: &[f64],
    policy: &EpisodicPolicy,
) -> Result<f64> {
    let v_pi = policy_eval_episodic(mdp, policy)?;
    Ok(clamp_gap(
        dot(rho, star.values.row(0)) - dot(rho, v_pi.row(0)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::model::{Kernel, TransitionRow};
    use ndarray::array;

    fn cycle(gamma: f64) -> DiscountedMDP {
        let k = Kernel::new(2, 1, vec![TransitionRow::point(1), TransitionRow::point(0)]).unwrap();
        DiscountedMDP::new(k, array![[1.0], [0.0]], gamma).unwrap()
    }

    #[test]
    fn single_state_geometric_series() {
        let k = Kernel::new(1, 1, vec![TransitionRow::point(0)]).unwrap();
        let mdp = DiscountedMDP::new(k, array![[1.0]], 0.9).unwrap();
        let v = policy_eval_discounted(&mdp, &Policy::Deterministic(vec![0])).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_discount_is_immediate_reward() {
        let mdp = cycle(0.0);
        let v = policy_eval_discounted(&mdp, &Policy::Deterministic(vec![0, 0])).unwrap();
        assert_eq!(v, array![1.0, 0.0]);
    }

    #[test]
    fn deterministic_cycle_by_hand() {
        // V0 = 1 + V1 / 2, V1 = V0 / 2  =>  V0 = 4/3, V1 = 2/3
        let v = policy_eval_discounted(&cycle(0.5), &Policy::Deterministic(vec![0, 0])).unwrap();
        assert!((v[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_action_optimum_is_the_only_policy() {
        let mdp = cycle(0.7);
        let sol = solve_optimal_discounted(&mdp).unwrap();
        let v = policy_eval_discounted(&mdp, &Policy::Deterministic(vec![0, 0])).unwrap();
        assert!(sup_diff(&sol.values, &v) < 1e-12);
        assert_eq!(
            value_gap_discounted(&mdp, &[0.5, 0.5], &sol.policy).unwrap(),
            0.0
        );
    }

    #[test]
    fn episodic_terminal_step_is_reward() {
        let k = Kernel::new(2, 2, vec![TransitionRow::Uniform; 4]).unwrap();
        let mdp = EpisodicMDP::stationary(k, array![[0.2, 0.9], [0.4, 0.1]], 1).unwrap();
        let pi = EpisodicPolicy::repeat(Policy::Deterministic(vec![1, 0]), 1);
        let v = policy_eval_episodic(&mdp, &pi).unwrap();
        assert_eq!(v.row(0).to_vec(), vec![0.9, 0.4]);
        assert_eq!(v.row(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let k = Kernel::new(2, 2, vec![TransitionRow::Uniform; 4]).unwrap();
        let mdp = EpisodicMDP::stationary(k, Array2::zeros((2, 2)), 5).unwrap();
        let sol = solve_optimal_episodic(&mdp);
        assert!(sol.values.iter().all(|&x| x == 0.0));
        // all tied: lowest action everywhere
        assert!(sol
            .policy
            .steps
            .iter()
            .all(|p| *p == Policy::Deterministic(vec![0, 0])));
    }

    #[test]
    fn two_by_two_gap_matches_enumeration() {
        // state 0: a0 stays (r=0.2), a1 -> state 1 (r=0); state 1: a0 stays (r=1), a1 -> 0 (r=0.5)
        let k = Kernel::new(
            2,
            2,
            vec![
                TransitionRow::point(0),
                TransitionRow::point(1),
                TransitionRow::point(1),
                TransitionRow::point(0),
            ],
        )
        .unwrap();
        let mdp = DiscountedMDP::new(k, array![[0.2, 0.0], [1.0, 0.5]], 0.8).unwrap();
        let rho = [0.6, 0.4];
        let value = |pi: &Policy| {
            let v = policy_eval_discounted(&mdp, pi).unwrap();
            rho[0] * v[0] + rho[1] * v[1]
        };
        let mut best = f64::NEG_INFINITY;
        for a0 in 0..2 {
            for a1 in 0..2 {
                best = best.max(value(&Policy::Deterministic(vec![a0, a1])));
            }
        }
        let suboptimal = Policy::Deterministic(vec![0, 1]);
        let gap = value_gap_discounted(&mdp, &rho, &suboptimal).unwrap();
        assert!((gap - (best - value(&suboptimal))).abs() < 1e-10);
        assert!(gap > 0.0);
    }
}
