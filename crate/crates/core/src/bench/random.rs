use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::Exp1;

use crate::error::Result;
use crate::mdp::{DiscountedMDP, EpisodicMDP, Kernel, TransitionRow};
use crate::rng::stream;

/// Rows drawn from the flat Dirichlet distribution.
fn random_kernel<R: Rng>(ns: usize, na: usize, rng: &mut R) -> Result<Kernel> {
    let rows = (0..ns * na)
        .map(|_| {
            let w: Vec<f64> = (0..ns).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = w.iter().sum();
            TransitionRow::from_dense(&w.iter().map(|x| x / total).collect::<Vec<_>>())
        })
        .collect();
    Kernel::new(ns, na, rows)
}

/// Dirichlet(1) transition rows and rewards uniform on `[0, 1]`.
pub fn random_discounted(ns: usize, na: usize, gamma: f64, seed: u64) -> Result<DiscountedMDP> {
    let mut rng = stream(seed, "random-mdp", 0);
    let kernel = random_kernel(ns, na, &mut rng)?;
    let reward = Array2::from_shape_fn((ns, na), |_| rng.random::<f64>());
    DiscountedMDP::new(kernel, reward, gamma)
}

/// Episodic analogue with a fresh kernel and reward table per step.
pub fn random_episodic(ns: usize, na: usize, horizon: usize, seed: u64) -> Result<EpisodicMDP> {
    let mut rng = stream(seed, "random-mdp", 1);
    let kernels = (0..horizon)
        .map(|_| random_kernel(ns, na, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let reward = Array3::from_shape_fn((horizon, ns, na), |_| rng.random::<f64>());
    EpisodicMDP::new(kernels, reward)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_stochastic() {
        let a = random_discounted(4, 2, 0.9, 7).unwrap();
        let b = random_discounted(4, 2, 0.9, 7).unwrap();
        assert_eq!(a.kernel().to_dense(), b.kernel().to_dense());
        for row in a.kernel().to_dense().outer_iter() {
            for r in row.outer_iter() {
                assert!((r.sum() - 1.0).abs() < 1e-12);
            }
        }
        let e = random_episodic(3, 2, 5, 1).unwrap();
        assert_eq!(e.horizon(), 5);
        assert!(e.reward().iter().all(|&r| (0.0..1.0).contains(&r)));
    }
}
