use ndarray::Array3;

use crate::error::{Error, Result};
use crate::mdp::{occupancy_episodic, solve_optimal_episodic, EpisodicMDP};

/// Dominant term of the instance-dependent gap bound,
/// `12 sum_j sum_s d*_j(s) sqrt(c_b ln(NH/delta) / (K d^b_j(s, pi*_j(s))) Var_{P_j}(V*_{j+1}))`
/// with `N = K H`. `d_b` is the behavior state-action occupancy `[H, S, A]`
/// and `rho` the initial distribution of the optimal occupancy.
pub fn instance_bound(
    mdp: &EpisodicMDP,
    rho: &[f64],
    d_b: &Array3<f64>,
    k: u64,
    delta: f64,
    c_b: f64,
) -> Result<f64> {
    let (hz, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    if d_b.dim() != (hz, ns, na) {
        return Err(Error::invalid("behavior occupancy has the wrong shape"));
    }
    if k == 0 || !(delta > 0.0 && delta < 1.0) || !(c_b > 0.0) {
        return Err(Error::invalid(
            "instance bound needs K >= 1, delta in (0,1) and c_b > 0",
        ));
    }
    let star = solve_optimal_episodic(mdp);
    let occ = occupancy_episodic(mdp, &star.policy, rho)?;
    let log = ((k * hz as u64) as f64 * hz as f64 / delta).ln();
    let mut total = 0.0;
    for j in 0..hz {
        let v_next = star.values.row(j + 1).to_vec();
        for s in 0..ns {
            let ds = occ.state[[j, s]];
            if ds == 0.0 {
                continue;
            }
            let a = star.policy.step(j).action(s);
            let var = mdp.kernel(j).row(s, a).variance(&v_next);
            let db = d_b[[j, s, a]];
            if db == 0.0 {
                return Ok(f64::INFINITY);
            }
            total += ds * (c_b * log / (k as f64 * db) * var).sqrt();
        }
    }
    Ok(12.0 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{EpisodicPolicy, Kernel, Policy, TransitionRow};
    use ndarray::{array, Array2};

    fn uniform_behavior(m: &EpisodicMDP, rho: &[f64]) -> Array3<f64> {
        let pi = EpisodicPolicy::repeat(
            Policy::uniform(m.num_states(), m.num_actions()),
            m.horizon(),
        );
        occupancy_episodic(m, &pi, rho).unwrap().state_action
    }

    #[test]
    fn deterministic_model_gives_zero() {
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
        let m = EpisodicMDP::stationary(k, array![[0.0, 1.0], [1.0, 0.0]], 3).unwrap();
        let rho = [0.5, 0.5];
        assert_eq!(
            instance_bound(&m, &rho, &uniform_behavior(&m, &rho), 100, 0.1, 1.0).unwrap(),
            0.0
        );
    }

    fn noisy() -> EpisodicMDP {
        let p = [
            [0.6, 0.3, 0.1],
            [0.1, 0.1, 0.8],
            [0.3, 0.3, 0.4],
            [0.0, 0.5, 0.5],
            [0.9, 0.0, 0.1],
            [0.2, 0.7, 0.1],
        ];
        let k = Kernel::new(
            3,
            2,
            p.iter().map(|r| TransitionRow::from_dense(r)).collect(),
        )
        .unwrap();
        EpisodicMDP::stationary(k, array![[0.1, 0.5], [0.9, 0.2], [0.0, 0.4]], 3).unwrap()
    }

    #[test]
    fn scales_as_inverse_root_k() {
        let m = noisy();
        let rho = [0.2, 0.3, 0.5];
        let db = uniform_behavior(&m, &rho);
        let a = instance_bound(&m, &rho, &db, 100, 0.1, 1.0).unwrap();
        let b = instance_bound(&m, &rho, &db, 10_000, 0.1, 1.0).unwrap();
        let log = |k: f64| (k * 9.0 / 0.1f64).ln();
        assert!((b / a - 0.1 * (log(10_000.0) / log(100.0)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn term_by_term_oracle() {
        let m = noisy();
        let rho = [0.2, 0.3, 0.5];
        let db = uniform_behavior(&m, &rho);
        let got = instance_bound(&m, &rho, &db, 500, 0.05, 2.0).unwrap();

        // independent backward induction and forward occupancy with dense rows
        let p = m.kernel(0).to_dense();
        let r = m.reward();
        let mut v = Array2::<f64>::zeros((4, 3));
        let mut act = [[0usize; 3]; 3];
        for h in (0..3).rev() {
            for s in 0..3 {
                let q: Vec<f64> = (0..2)
                    .map(|a| {
                        r[[h, s, a]] + (0..3).map(|t| p[[s, a, t]] * v[[h + 1, t]]).sum::<f64>()
                    })
                    .collect();
                act[h][s] = if q[1] > q[0] + 1e-12 { 1 } else { 0 };
                v[[h, s]] = q[act[h][s]];
            }
        }
        let mut d = rho.to_vec();
        let log = (500.0f64 * 3.0 * 3.0 / 0.05).ln();
        let mut sum = 0.0;
        for h in 0..3 {
            let mut next = vec![0.0; 3];
            for s in 0..3 {
                let a = act[h][s];
                let mean: f64 = (0..3).map(|t| p[[s, a, t]] * v[[h + 1, t]]).sum();
                let var: f64 = (0..3)
                    .map(|t| p[[s, a, t]] * (v[[h + 1, t]] - mean).powi(2))
                    .sum();
                sum += d[s] * (2.0 * log / (500.0 * db[[h, s, a]]) * var).sqrt();
                for t in 0..3 {
                    next[t] += d[s] * p[[s, a, t]];
                }
            }
            d = next;
        }
        assert!((got - 12.0 * sum).abs() < 1e-10 * got.max(1.0));
    }

    #[test]
    fn uncovered_optimal_cell_is_infinite() {
        let m = noisy();
        let rho = [1.0, 0.0, 0.0];
        let db = Array3::zeros((3, 3, 2));
        assert!(instance_bound(&m, &rho, &db, 10, 0.1, 1.0)
            .unwrap()
            .is_infinite());
    }
}
