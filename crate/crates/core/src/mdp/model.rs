use ndarray::{Array2, Array3, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};

/// Row-sum tolerance used when validating probability vectors.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Successor distribution of a single (s, a) cell.
///
/// Ground-truth kernels are usually sparse (a handful of successors), and
/// empirical kernels fall back to the uniform row for unvisited cells, so
/// neither case stores a dense `S`-vector.
#[derive(Clone, Debug, PartialEq)]
pub enum TransitionRow {
    /// Explicit `(successor, probability)` pairs, sorted by successor, no zeros.
    Sparse(Vec<(usize, f64)>),
    /// Uniform over all states.
    Uniform,
}

impl TransitionRow {
    /// Deterministic transition to `next`.
    pub fn point(next: usize) -> Self {
        TransitionRow::Sparse(vec![(next, 1.0)])
    }

    /// Builds a row from a dense probability vector, dropping zeros.
    pub fn from_dense(probs: &[f64]) -> Self {
        TransitionRow::Sparse(
            probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(s, &p)| (s, p))
                .collect(),
        )
    }

    pub fn prob(&self, next: usize, num_states: usize) -> f64 {
        match self {
            TransitionRow::Uniform => 1.0 / num_states as f64,
            TransitionRow::Sparse(entries) => entries
                .binary_search_by_key(&next, |&(s, _)| s)
                .map(|i| entries[i].1)
                .unwrap_or(0.0),
        }
    }

    pub fn to_dense(&self, num_states: usize) -> Vec<f64> {
        match self {
            TransitionRow::Uniform => vec![1.0 / num_states as f64; num_states],
            TransitionRow::Sparse(entries) => {
                let mut out = vec![0.0; num_states];
                for &(s, p) in entries {
                    out[s] = p;
                }
                out
            }
        }
    }

    /// `P_{s,a} V`.
    pub fn expect(&self, v: &[f64]) -> f64 {
        match self {
            TransitionRow::Uniform => v.iter().sum::<f64>() / v.len() as f64,
            TransitionRow::Sparse(entries) => entries.iter().map(|&(s, p)| p * v[s]).sum(),
        }
    }

    /// `Var_{P_{s,a}}(V)`, clamped at zero.
    pub fn variance(&self, v: &[f64]) -> f64 {
        let (mean, second) = match self {
            TransitionRow::Uniform => {
                let n = v.len() as f64;
                (
                    v.iter().sum::<f64>() / n,
                    v.iter().map(|x| x * x).sum::<f64>() / n,
                )
            }
            TransitionRow::Sparse(entries) => entries.iter().fold((0.0, 0.0), |(m, q), &(s, p)| {
                (m + p * v[s], q + p * v[s] * v[s])
            }),
        };
        (second - mean * mean).max(0.0)
    }

    /// Draws a successor by inverse-CDF over the stored entries.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, num_states: usize) -> usize {
        match self {
            TransitionRow::Uniform => rng.random_range(0..num_states),
            TransitionRow::Sparse(entries) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(s, p) in entries {
                    acc += p;
                    if u < acc {
                        return s;
                    }
                }
                entries.last().map(|&(s, _)| s).unwrap_or(0)
            }
        }
    }

    /// Iterates over `(successor, probability)` pairs with nonzero mass.
    pub fn iter(&self, num_states: usize) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match self {
            TransitionRow::Uniform => {
                let p = 1.0 / num_states as f64;
                Box::new((0..num_states).map(move |s| (s, p)))
            }
            TransitionRow::Sparse(entries) => Box::new(entries.iter().copied()),
        }
    }

    fn validate(&self, num_states: usize) -> std::result::Result<(), String> {
        let TransitionRow::Sparse(entries) = self else {
            return Ok(());
        };
        let mut sum = 0.0;
        let mut prev: Option<usize> = None;
        for &(s, p) in entries {
            if s >= num_states {
                return Err(format!("successor {s} out of range"));
            }
            if prev.is_some_and(|q| q >= s) {
                return Err("successors not strictly increasing".into());
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(format!("probability {p} is not a nonnegative number"));
            }
            prev = Some(s);
            sum += p;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(format!("row sums to {sum}"));
        }
        Ok(())
    }
}

/// Transition kernel `P(s' | s, a)` stored row-wise with index `s * A + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    num_states: usize,
    num_actions: usize,
    rows: Vec<TransitionRow>,
}

impl Kernel {
    pub fn new(num_states: usize, num_actions: usize, rows: Vec<TransitionRow>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::invalid(
                "kernel needs at least one state and one action",
            ));
        }
        if rows.len() != num_states * num_actions {
            return Err(Error::invalid(format!(
                "expected {} rows, got {}",
                num_states * num_actions,
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            row.validate(num_states).map_err(|e| {
                Error::invalid(format!(
                    "kernel row (s={}, a={}): {e}",
                    i / num_actions,
                    i % num_actions
                ))
            })?;
        }
        Ok(Kernel {
            num_states,
            num_actions,
            rows,
        })
    }

    /// Builds a kernel from a dense `[S][A][S]` tensor.
    pub fn from_dense(p: &Array3<f64>) -> Result<Self> {
        let (s, a, s2) = p.dim();
        if s != s2 {
            return Err(Error::invalid("dense kernel must have shape [S][A][S]"));
        }
        let rows = p
            .outer_iter()
            .flat_map(|block| {
                block
                    .outer_iter()
                    .map(|row| TransitionRow::from_dense(&row.to_vec()))
                    .collect::<Vec<_>>()
            })
            .collect();
        Kernel::new(s, a, rows)
    }

    pub fn to_dense(&self) -> Array3<f64> {
        let mut out = Array3::zeros((self.num_states, self.num_actions, self.num_states));
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for (next, p) in self.row(s, a).iter(self.num_states) {
                    out[[s, a, next]] = p;
                }
            }
        }
        out
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize, a: usize) -> &TransitionRow {
        &self.rows[s * self.num_actions + a]
    }

    pub fn rows(&self) -> &[TransitionRow] {
        &self.rows
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a).prob(next, self.num_states)
    }

    /// `Q(s, a) = r(s, a) + scale * P_{s,a} V` for every cell.
    pub fn backup(&self, reward: &Array2<f64>, v: &[f64], scale: f64) -> Array2<f64> {
        Array2::from_shape_fn((self.num_states, self.num_actions), |(s, a)| {
            reward[[s, a]] + scale * self.row(s, a).expect(v)
        })
    }
}

/// Which actions are admissible in each state. Masked actions are skipped
/// by every max/argmax over actions.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionMask {
    num_states: usize,
    num_actions: usize,
    allowed: Vec<bool>,
}

impl ActionMask {
    pub fn new(num_states: usize, num_actions: usize, allowed: Vec<bool>) -> Result<Self> {
        if allowed.len() != num_states * num_actions {
            return Err(Error::invalid("action mask has the wrong size"));
        }
        for s in 0..num_states {
            if !allowed[s * num_actions..(s + 1) * num_actions]
                .iter()
                .any(|&x| x)
            {
                return Err(Error::invalid(format!("state {s} has no allowed action")));
            }
        }
        Ok(ActionMask {
            num_states,
            num_actions,
            allowed,
        })
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        f: impl Fn(usize, usize) -> bool,
    ) -> Result<Self> {
        let allowed = (0..num_states * num_actions)
            .map(|i| f(i / num_actions, i % num_actions))
            .collect();
        ActionMask::new(num_states, num_actions, allowed)
    }

    pub fn is_allowed(&self, s: usize, a: usize) -> bool {
        self.allowed[s * self.num_actions + a]
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
}

pub(crate) fn allowed(mask: Option<&ActionMask>, s: usize, a: usize) -> bool {
    mask.is_none_or(|m| m.is_allowed(s, a))
}

/// Index of the largest entry among allowed actions; ties (within `tol`)
/// go to the lowest action index.
pub fn argmax_lowest(row: ArrayView1<f64>, mask: Option<&ActionMask>, s: usize, tol: f64) -> usize {
    let best = row
        .iter()
        .enumerate()
        .filter(|&(a, _)| allowed(mask, s, a))
        .map(|(_, &q)| q)
        .fold(f64::NEG_INFINITY, f64::max);
    row.iter()
        .enumerate()
        .find(|&(a, &q)| allowed(mask, s, a) && q >= best - tol)
        .map(|(a, _)| a)
        .unwrap_or(0)
}

/// Maximum over allowed actions.
pub fn max_allowed(row: ArrayView1<f64>, mask: Option<&ActionMask>, s: usize) -> f64 {
    row.iter()
        .enumerate()
        .filter(|&(a, _)| allowed(mask, s, a))
        .map(|(_, &q)| q)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn validate_rewards<'a>(rewards: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    for &r in rewards {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid(format!("reward {r} outside [0, 1]")));
        }
    }
    Ok(())
}

fn check_mask(mask: &ActionMask, s: usize, a: usize) -> Result<()> {
    if mask.num_states() != s || mask.num_actions() != a {
        return Err(Error::invalid("action mask shape does not match the model"));
    }
    Ok(())
}

/// Discounted infinite-horizon tabular MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscountedMDP {
    kernel: Kernel,
    reward: Array2<f64>,
    gamma: f64,
    mask: Option<ActionMask>,
}

impl DiscountedMDP {
    pub fn new(kernel: Kernel, reward: Array2<f64>, gamma: f64) -> Result<Self> {
        if reward.dim() != (kernel.num_states(), kernel.num_actions()) {
            return Err(Error::invalid("reward shape must be [S][A]"));
        }
        validate_rewards(reward.iter())?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("discount {gamma} outside [0, 1)")));
        }
        Ok(DiscountedMDP {
            kernel,
            reward,
            gamma,
            mask: None,
        })
    }

    pub fn with_mask(mut self, mask: ActionMask) -> Result<Self> {
        check_mask(&mask, self.num_states(), self.num_actions())?;
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.kernel.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.kernel.num_actions()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn reward(&self) -> &Array2<f64> {
        &self.reward
    }

    pub fn mask(&self) -> Option<&ActionMask> {
        self.mask.as_ref()
    }

    /// Upper end of the value range, `1 / (1 - gamma)`.
    pub fn value_cap(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }
}

/// Episodic finite-horizon MDP with step-dependent kernels and rewards.
/// Steps are zero-based internally: step `h` here is step `h + 1` in the
/// usual 1-based notation.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodicMDP {
    kernels: Vec<Kernel>,
    reward: Array3<f64>,
    mask: Option<ActionMask>,
}

impl EpisodicMDP {
    pub fn new(kernels: Vec<Kernel>, reward: Array3<f64>) -> Result<Self> {
        let Some(first) = kernels.first() else {
            return Err(Error::invalid("horizon must be at least 1"));
        };
        let (s, a) = (first.num_states(), first.num_actions());
        if kernels
            .iter()
            .any(|k| k.num_states() != s || k.num_actions() != a)
        {
            return Err(Error::invalid("all step kernels must share [S][A]"));
        }
        if reward.dim() != (kernels.len(), s, a) {
            return Err(Error::invalid("reward shape must be [H][S][A]"));
        }
        validate_rewards(reward.iter())?;
        Ok(EpisodicMDP {
            kernels,
            reward,
            mask: None,
        })
    }

    /// Same kernel and reward at every step.
    pub fn stationary(kernel: Kernel, reward: Array2<f64>, horizon: usize) -> Result<Self> {
        let (s, a) = reward.dim();
        let stacked = Array3::from_shape_fn((horizon, s, a), |(_, s, a)| reward[[s, a]]);
        EpisodicMDP::new(vec![kernel; horizon], stacked)
    }

    pub fn with_mask(mut self, mask: ActionMask) -> Result<Self> {
        check_mask(&mask, self.num_states(), self.num_actions())?;
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.kernels[0].num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.kernels[0].num_actions()
    }

    pub fn horizon(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernel(&self, h: usize) -> &Kernel {
        &self.kernels[h]
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn reward(&self) -> &Array3<f64> {
        &self.reward
    }

    pub fn mask(&self) -> Option<&ActionMask> {
        self.mask.as_ref()
    }
}

/// Stationary policy: one action per state, or a distribution per state.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Deterministic(Vec<usize>),
    Stochastic(Array2<f64>),
}

impl Policy {
    pub fn deterministic(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::invalid(format!("action {a} out of range")));
        }
        Ok(Policy::Deterministic(actions))
    }

    pub fn stochastic(probs: Array2<f64>) -> Result<Self> {
        for (s, row) in probs.outer_iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::invalid(format!("negative probability in state {s}")));
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(Policy::Stochastic(probs))
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Policy::Stochastic(Array2::from_elem(
            (num_states, num_actions),
            1.0 / num_actions as f64,
        ))
    }

    /// Uniform over allowed actions only.
    pub fn uniform_masked(mask: &ActionMask) -> Self {
        let (s, a) = (mask.num_states(), mask.num_actions());
        let mut probs = Array2::zeros((s, a));
        for st in 0..s {
            let n = (0..a).filter(|&x| mask.is_allowed(st, x)).count() as f64;
            for x in 0..a {
                if mask.is_allowed(st, x) {
                    probs[[st, x]] = 1.0 / n;
                }
            }
        }
        Policy::Stochastic(probs)
    }

    pub fn num_states(&self) -> usize {
        match self {
            Policy::Deterministic(v) => v.len(),
            Policy::Stochastic(p) => p.nrows(),
        }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic(v) => {
                if v[s] == a {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic(p) => p[[s, a]],
        }
    }

    /// `(action, probability)` pairs with nonzero probability in state `s`.
    pub fn action_probs(&self, s: usize) -> Vec<(usize, f64)> {
        match self {
            Policy::Deterministic(v) => vec![(v[s], 1.0)],
            Policy::Stochastic(p) => p
                .row(s)
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 0.0)
                .map(|(a, &q)| (a, q))
                .collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, s: usize) -> usize {
        match self {
            Policy::Deterministic(v) => v[s],
            Policy::Stochastic(p) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last = 0;
                for (a, &q) in p.row(s).iter().enumerate() {
                    if q > 0.0 {
                        acc += q;
                        last = a;
                        if u < acc {
                            return a;
                        }
                    }
                }
                last
            }
        }
    }

    /// Action of a deterministic policy; the most likely action otherwise.
    pub fn action(&self, s: usize) -> usize {
        match self {
            Policy::Deterministic(v) => v[s],
            Policy::Stochastic(p) => argmax_lowest(p.row(s), None, s, 0.0),
        }
    }

    pub(crate) fn check_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        let ok = match self {
            Policy::Deterministic(v) => v.len() == num_states && v.iter().all(|&a| a < num_actions),
            Policy::Stochastic(p) => p.dim() == (num_states, num_actions),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("policy shape does not match the model"))
        }
    }
}

/// Non-stationary policy for episodic problems: one stationary policy per step.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodicPolicy {
    pub steps: Vec<Policy>,
}

impl EpisodicPolicy {
    pub fn new(steps: Vec<Policy>) -> Self {
        EpisodicPolicy { steps }
    }

    /// The same policy at every step.
    pub fn repeat(policy: Policy, horizon: usize) -> Self {
        EpisodicPolicy {
            steps: vec![policy; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, h: usize) -> &Policy {
        &self.steps[h]
    }

    pub(crate) fn check_shape(&self, mdp: &EpisodicMDP) -> Result<()> {
        if self.horizon() != mdp.horizon() {
            return Err(Error::invalid("policy horizon does not match the model"));
        }
        self.steps
            .iter()
            .try_for_each(|p| p.check_shape(mdp.num_states(), mdp.num_actions()))
    }
}

/// Checks that `dist` is a probability vector.
pub fn check_distribution(dist: &[f64], tol: f64, what: &str) -> Result<()> {
    if dist.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::invalid(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::invalid(format!("{what} sums to {sum}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kernel_rejects_unnormalized_rows() {
        let rows = vec![
            TransitionRow::Sparse(vec![(0, 0.5), (1, 0.4)]),
            TransitionRow::point(0),
        ];
        assert!(Kernel::new(2, 1, rows).is_err());
    }

    #[test]
    fn kernel_dense_round_trip() {
        let mut p = Array3::zeros((2, 2, 2));
        p[[0, 0, 1]] = 1.0;
        p[[0, 1, 0]] = 0.25;
        p[[0, 1, 1]] = 0.75;
        p[[1, 0, 0]] = 1.0;
        p[[1, 1, 1]] = 1.0;
        let k = Kernel::from_dense(&p).unwrap();
        assert_eq!(k.to_dense(), p);
        assert_eq!(k.prob(0, 1, 1), 0.75);
    }

    #[test]
    fn rewards_outside_unit_interval_rejected() {
        let k = Kernel::new(1, 1, vec![TransitionRow::point(0)]).unwrap();
        assert!(DiscountedMDP::new(k.clone(), array![[1.5]], 0.5).is_err());
        assert!(DiscountedMDP::new(k.clone(), array![[0.5]], 1.0).is_err());
        assert!(DiscountedMDP::new(k, array![[0.5]], 0.0).is_ok());
    }

    #[test]
    fn argmax_prefers_lowest_index_and_respects_mask() {
        let row = array![1.0, 3.0, 3.0, 2.0];
        assert_eq!(argmax_lowest(row.view(), None, 0, 0.0), 1);
        let mask = ActionMask::new(1, 4, vec![true, false, true, true]).unwrap();
        assert_eq!(argmax_lowest(row.view(), Some(&mask), 0, 0.0), 2);
        assert_eq!(max_allowed(row.view(), Some(&mask), 0), 3.0);
    }

    #[test]
    fn uniform_row_statistics() {
        let v = [0.0, 1.0];
        assert_eq!(TransitionRow::Uniform.expect(&v), 0.5);
        assert_eq!(TransitionRow::Uniform.variance(&v), 0.25);
    }

    #[test]
    fn stochastic_policy_validation() {
        assert!(Policy::stochastic(array![[0.5, 0.4]]).is_err());
        assert!(Policy::stochastic(array![[0.5, 0.5]]).is_ok());
        assert!(Policy::deterministic(vec![2], 2).is_err());
    }
}
