use log::warn;
use ndarray::{Array2, Array3, ArrayView2};

use crate::data::{CountTable, TransitionDataset};
use crate::error::{Error, Result};
use crate::mdp::{
    argmax_lowest, max_allowed, ActionMask, DiscountedMDP, EpisodicMDP, EpisodicPolicy, Kernel,
    Policy,
};
use crate::vilcb::penalty::{finite_cell, infinite_cell, PenaltyConfig};

/// Rewards, discount and action mask of a discounted problem; the kernel is
/// what the learner does not know.
#[derive(Clone, Copy, Debug)]
pub struct DiscountedTask<'a> {
    pub reward: &'a Array2<f64>,
    pub gamma: f64,
    pub mask: Option<&'a ActionMask>,
}

impl<'a> DiscountedTask<'a> {
    pub fn of(mdp: &'a DiscountedMDP) -> Self {
        DiscountedTask {
            reward: mdp.reward(),
            gamma: mdp.gamma(),
            mask: mdp.mask(),
        }
    }
}

/// Rewards `[H, S, A]` and action mask of an episodic problem.
#[derive(Clone, Copy, Debug)]
pub struct EpisodicTask<'a> {
    pub reward: &'a Array3<f64>,
    pub mask: Option<&'a ActionMask>,
}

impl<'a> EpisodicTask<'a> {
    pub fn of(mdp: &'a EpisodicMDP) -> Self {
        EpisodicTask {
            reward: mdp.reward(),
            mask: mdp.mask(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.reward.dim().0
    }
}

/// Penalty used by the solvers. `Zero` gives plain value iteration on the
/// empirical model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Penalty {
    Bernstein(PenaltyConfig),
    Zero,
}

/// Iteration budget of the discounted solver.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IterationControl {
    /// Defaults to `ceil(ln(N/(1-gamma)) / ln(1/gamma))`.
    pub tau_max: Option<usize>,
    /// Stop early once the sup-norm change falls to this level.
    pub tol: Option<f64>,
}

/// Output of a solver run. Discounted runs have a single step.
#[derive(Clone, Debug)]
pub struct VilcbResult {
    pub q: Array3<f64>,
    pub values: Array2<f64>,
    pub penalty: Array3<f64>,
    pub counts: Array3<u64>,
    pub policy: EpisodicPolicy,
    pub iterations: usize,
    pub deltas: Vec<f64>,
    /// Size of the dataset the model was estimated from.
    pub sample_size: u64,
}

impl VilcbResult {
    /// Policy of a discounted run.
    pub fn stationary_policy(&self) -> &Policy {
        self.policy.step(0)
    }

    pub fn q_step(&self, h: usize) -> ArrayView2<'_, f64> {
        self.q.index_axis(ndarray::Axis(0), h)
    }
}

pub fn default_tau_max(n: u64, gamma: f64) -> usize {
    if gamma == 0.0 {
        return 1;
    }
    let n = n.max(1) as f64;
    ((n / (1.0 - gamma)).ln() / (1.0 / gamma).ln())
        .ceil()
        .max(0.0) as usize
}

pub fn default_tau_max_markov(t: usize, gamma: f64) -> usize {
    let t = t.max(1) as f64;
    ((t / (1.0 - gamma)).ln() / (1.0 - gamma)).ceil().max(0.0) as usize
}

fn greedy(q: ArrayView2<f64>, mask: Option<&ActionMask>) -> (Vec<f64>, Policy) {
    let ns = q.nrows();
    let values = (0..ns).map(|s| max_allowed(q.row(s), mask, s)).collect();
    let actions = (0..ns)
        .map(|s| argmax_lowest(q.row(s), mask, s, 0.0))
        .collect();
    (values, Policy::Deterministic(actions))
}

/// One application of the pessimistic Bellman operator, also returning the
/// penalties used.
fn sweep(
    q_in: ArrayView2<f64>,
    p_hat: &Kernel,
    counts: ArrayView2<u64>,
    n: u64,
    task: &DiscountedTask,
    penalty: Penalty,
) -> (Array2<f64>, Array2<f64>) {
    let (ns, na) = q_in.dim();
    let (v, _) = greedy(q_in, task.mask);
    let mut q = Array2::zeros((ns, na));
    let mut b = Array2::zeros((ns, na));
    for s in 0..ns {
        for a in 0..na {
            let row = p_hat.row(s, a);
            let pen = match penalty {
                Penalty::Bernstein(cfg) => {
                    infinite_cell(&cfg, task.gamma, n, counts[[s, a]], row.variance(&v))
                }
                Penalty::Zero => 0.0,
            };
            b[[s, a]] = pen;
            q[[s, a]] = (task.reward[[s, a]] + task.gamma * row.expect(&v) - pen).max(0.0);
        }
    }
    (q, b)
}

fn check_discounted(task: &DiscountedTask, counts: &CountTable) -> Result<()> {
    let (ns, na) = (counts.num_states(), counts.num_actions());
    if counts.num_steps() != 1 {
        return Err(Error::invalid(
            "discounted solver needs unannotated transitions",
        ));
    }
    if task.reward.dim() != (ns, na) {
        return Err(Error::invalid("reward table has the wrong shape"));
    }
    if !(task.gamma >= 0.0 && task.gamma < 1.0) {
        return Err(Error::invalid("discount factor must lie in [0,1)"));
    }
    if task
        .mask
        .is_some_and(|m| m.num_states() != ns || m.num_actions() != na)
    {
        return Err(Error::invalid("action mask has the wrong shape"));
    }
    Ok(())
}

/// `Q_out(s,a) = max{r(s,a) + gamma P_hat V - b(s,a;V), 0}` with `V = max_a Q_in`.
pub fn pessimistic_operator(
    q_in: &Array2<f64>,
    p_hat: &Kernel,
    counts: &Array2<u64>,
    n: u64,
    task: &DiscountedTask,
    cfg: &PenaltyConfig,
) -> Result<Array2<f64>> {
    let dim = (p_hat.num_states(), p_hat.num_actions());
    if q_in.dim() != dim || counts.dim() != dim || task.reward.dim() != dim {
        return Err(Error::invalid(
            "shapes of Q, counts, rewards and kernel disagree",
        ));
    }
    let cap = 1.0 / (1.0 - task.gamma);
    if q_in.iter().any(|&x| !(x >= 0.0 && x <= cap + 1e-9)) {
        return Err(Error::invalid(format!("Q must lie in [0, {cap}]")));
    }
    Ok(sweep(
        q_in.view(),
        p_hat,
        counts.view(),
        n,
        task,
        Penalty::Bernstein(*cfg),
    )
    .0)
}

/// Value iteration from `Q = 0` on the empirical model of `counts`.
pub fn solve_discounted_counts(
    counts: &CountTable,
    task: &DiscountedTask,
    penalty: Penalty,
    control: IterationControl,
) -> Result<VilcbResult> {
    check_discounted(task, counts)?;
    if task.gamma < 0.5 {
        warn!("discount factor {} is below 1/2", task.gamma);
    }
    let n = counts.total();
    let p_hat = counts.empirical_kernel(0);
    let n_sa = counts.step_counts(0);
    let tau_max = control
        .tau_max
        .unwrap_or_else(|| default_tau_max(n, task.gamma));
    let (ns, na) = n_sa.dim();
    let mut q = Array2::zeros((ns, na));
    let mut b = Array2::zeros((ns, na));
    let mut deltas = Vec::with_capacity(tau_max);
    for _ in 0..tau_max {
        let (next, pen) = sweep(q.view(), &p_hat, n_sa.view(), n, task, penalty);
        let delta = (&next - &q).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        q = next;
        b = pen;
        deltas.push(delta);
        if control.tol.is_some_and(|t| delta <= t) {
            break;
        }
    }
    let (v, policy) = greedy(q.view(), task.mask);
    Ok(VilcbResult {
        q: q.insert_axis(ndarray::Axis(0)),
        values: Array2::from_shape_vec((1, ns), v).expect("shape"),
        penalty: b.insert_axis(ndarray::Axis(0)),
        counts: n_sa.insert_axis(ndarray::Axis(0)),
        policy: EpisodicPolicy::new(vec![policy]),
        iterations: deltas.len(),
        deltas,
        sample_size: n,
    })
}

/// Single backward pass `h = H, ..., 1` with `V_{H+1} = 0`.
pub fn solve_episodic_counts(
    counts: &CountTable,
    task: &EpisodicTask,
    penalty: Penalty,
) -> Result<VilcbResult> {
    let hz = task.horizon();
    let (ns, na) = (counts.num_states(), counts.num_actions());
    if counts.num_steps() != hz || task.reward.dim() != (hz, ns, na) {
        return Err(Error::invalid(
            "counts and rewards disagree on the horizon or shape",
        ));
    }
    let n = counts.total();
    let mut q = Array3::zeros((hz, ns, na));
    let mut b = Array3::zeros((hz, ns, na));
    let mut values = Array2::zeros((hz + 1, ns));
    let mut steps = vec![Policy::Deterministic(vec![0; ns]); hz];
    for h in (0..hz).rev() {
        let p_hat = counts.empirical_kernel(h);
        let v_next = values.row(h + 1).to_vec();
        for s in 0..ns {
            for a in 0..na {
                let row = p_hat.row(s, a);
                let pen = match penalty {
                    Penalty::Bernstein(cfg) => {
                        finite_cell(&cfg, hz, n, counts.get(h, s, a), row.variance(&v_next))
                    }
                    Penalty::Zero => 0.0,
                };
                b[[h, s, a]] = pen;
                let x = task.reward[[h, s, a]] + row.expect(&v_next) - pen;
                q[[h, s, a]] = match penalty {
                    Penalty::Bernstein(_) => x.max(0.0),
                    Penalty::Zero => x,
                };
            }
        }
        let (v, pi) = greedy(q.index_axis(ndarray::Axis(0), h), task.mask);
        values.row_mut(h).assign(&ndarray::Array1::from(v));
        steps[h] = pi;
    }
    Ok(VilcbResult {
        q,
        values,
        penalty: b,
        counts: counts.visits().clone(),
        policy: EpisodicPolicy::new(steps),
        iterations: hz,
        deltas: Vec::new(),
        sample_size: n,
    })
}

fn expect_flat(data: &TransitionDataset) -> Result<()> {
    if data.horizon().is_some() {
        return Err(Error::invalid(
            "discounted solver needs unannotated transitions",
        ));
    }
    Ok(())
}

fn expect_steps(data: &TransitionDataset, hz: usize) -> Result<()> {
    if data.horizon() != Some(hz) {
        return Err(Error::invalid(
            "episodic solver needs transitions annotated with steps 1..=H",
        ));
    }
    Ok(())
}

/// VI-LCB for discounted problems.
pub fn vi_lcb_infinite(
    data: &TransitionDataset,
    task: &DiscountedTask,
    cfg: &PenaltyConfig,
    control: IterationControl,
) -> Result<VilcbResult> {
    expect_flat(data)?;
    solve_discounted_counts(&data.count(), task, Penalty::Bernstein(*cfg), control)
}

/// VI-LCB for episodic problems.
pub fn vi_lcb_finite(
    data: &TransitionDataset,
    task: &EpisodicTask,
    cfg: &PenaltyConfig,
) -> Result<VilcbResult> {
    expect_steps(data, task.horizon())?;
    solve_episodic_counts(&data.count(), task, Penalty::Bernstein(*cfg))
}

/// Value iteration on the empirical model without penalties.
pub fn plain_vi_infinite(
    data: &TransitionDataset,
    task: &DiscountedTask,
    control: IterationControl,
) -> Result<VilcbResult> {
    expect_flat(data)?;
    solve_discounted_counts(&data.count(), task, Penalty::Zero, control)
}

pub fn plain_vi_finite(data: &TransitionDataset, task: &EpisodicTask) -> Result<VilcbResult> {
    expect_steps(data, task.horizon())?;
    solve_episodic_counts(&data.count(), task, Penalty::Zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_iid, Transition};
    use crate::mdp::{
        solve_optimal_discounted, solve_optimal_episodic, value_gap_discounted, TransitionRow,
    };
    use ndarray::array;

    fn two_state() -> DiscountedMDP {
        let k = Kernel::new(
            2,
            2,
            vec![
                TransitionRow::from_dense(&[0.7, 0.3]),
                TransitionRow::point(1),
                TransitionRow::from_dense(&[0.4, 0.6]),
                TransitionRow::point(0),
            ],
        )
        .unwrap();
        DiscountedMDP::new(k, array![[0.0, 0.3], [1.0, 0.2]], 0.9).unwrap()
    }

    #[test]
    fn zero_iterations_give_zero() {
        let m = two_state();
        let d = gen_iid(&m, &Array2::from_elem((2, 2), 0.25), 100, 1).unwrap();
        let ctl = IterationControl {
            tau_max: Some(0),
            tol: None,
        };
        let r =
            vi_lcb_infinite(&d, &DiscountedTask::of(&m), &PenaltyConfig::infinite(), ctl).unwrap();
        assert!(r.q.iter().all(|&x| x == 0.0));
        assert_eq!(r.stationary_policy(), &Policy::Deterministic(vec![0, 0]));
    }

    #[test]
    fn empty_dataset_is_all_zero() {
        let m = two_state();
        let d = TransitionDataset::empty(2, 2, None);
        let r = vi_lcb_infinite(
            &d,
            &DiscountedTask::of(&m),
            &PenaltyConfig::infinite(),
            IterationControl::default(),
        )
        .unwrap();
        assert!(r.q.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn scalar_fixed_point() {
        let k = Kernel::new(1, 1, vec![TransitionRow::point(0)]).unwrap();
        let m = DiscountedMDP::new(k, array![[1.0]], 0.9).unwrap();
        let n = 1_000_000u64;
        let d =
            TransitionDataset::new(1, 1, None, vec![Transition::new(0, 0, 0); n as usize]).unwrap();
        let cfg = PenaltyConfig::new(0.01, 0.1).unwrap();
        let ctl = IterationControl {
            tau_max: Some(2000),
            tol: None,
        };
        let r = vi_lcb_infinite(&d, &DiscountedTask::of(&m), &cfg, ctl).unwrap();
        // zero variance: b = 2 c_b L / ((1-gamma) n) + 5/n, fixed point (1 - b)/(1 - gamma)
        let log = (n as f64 / (0.1 * 0.1)).ln();
        let b = 2.0 * 0.01 * log / (0.1 * n as f64) + 5.0 / n as f64;
        assert!((r.q[[0, 0, 0]] - (1.0 - b) / 0.1).abs() < 1e-9);
    }

    #[test]
    fn large_exhaustive_dataset_is_near_optimal() {
        let m = two_state();
        let d = gen_iid(&m, &Array2::from_elem((2, 2), 0.25), 100_000, 5).unwrap();
        let cfg = PenaltyConfig::new(1.0, 0.1).unwrap();
        let r = vi_lcb_infinite(
            &d,
            &DiscountedTask::of(&m),
            &cfg,
            IterationControl::default(),
        )
        .unwrap();
        let gap = value_gap_discounted(&m, &[0.5, 0.5], r.stationary_policy()).unwrap();
        assert!(gap < 0.05 / (1.0 - 0.9), "gap {gap}");
        assert!(r.q.iter().all(|&x| (0.0..=10.0).contains(&x)));
    }

    #[test]
    fn plain_vi_matches_exact_solver() {
        let m = two_state();
        let d = gen_iid(&m, &Array2::from_elem((2, 2), 0.25), 200_000, 6).unwrap();
        let r =
            plain_vi_infinite(&d, &DiscountedTask::of(&m), IterationControl::default()).unwrap();
        let emp =
            DiscountedMDP::new(d.count().empirical_kernel(0), m.reward().clone(), 0.9).unwrap();
        let star = solve_optimal_discounted(&emp).unwrap();
        for s in 0..2 {
            assert!((r.values[[0, s]] - star.values[s]).abs() < 1e-3);
        }
        assert_eq!(r.stationary_policy(), &star.policy);
    }

    #[test]
    fn single_action_has_zero_gap() {
        let k = Kernel::new(2, 1, vec![TransitionRow::Uniform; 2]).unwrap();
        let m = DiscountedMDP::new(k, array![[0.2], [0.9]], 0.8).unwrap();
        let d = gen_iid(&m, &array![[0.5], [0.5]], 50, 2).unwrap();
        let r = vi_lcb_infinite(
            &d,
            &DiscountedTask::of(&m),
            &PenaltyConfig::infinite(),
            IterationControl::default(),
        )
        .unwrap();
        assert_eq!(
            value_gap_discounted(&m, &[0.5, 0.5], r.stationary_policy()).unwrap(),
            0.0
        );
    }

    #[test]
    fn early_stop_shortens_run() {
        let m = two_state();
        let d = gen_iid(&m, &Array2::from_elem((2, 2), 0.25), 5000, 7).unwrap();
        let ctl = IterationControl {
            tau_max: Some(10_000),
            tol: Some(1e-6),
        };
        let r = plain_vi_infinite(&d, &DiscountedTask::of(&m), ctl).unwrap();
        assert!(r.iterations < 10_000);
        assert!(*r.deltas.last().unwrap() <= 1e-6);
    }

    fn episodic_data(hz: usize) -> (EpisodicMDP, TransitionDataset) {
        let m = two_state();
        let e = EpisodicMDP::stationary(m.kernel().clone(), m.reward().clone(), hz).unwrap();
        let t = (0..hz)
            .flat_map(|h| {
                (0..2).flat_map(move |s| {
                    (0..2).map(move |a| Transition::at_step(h, s, a, (s + a) % 2))
                })
            })
            .collect();
        (e, TransitionDataset::new(2, 2, Some(hz), t).unwrap())
    }

    #[test]
    fn one_step_is_pessimistic_bandit() {
        let (m, d) = episodic_data(1);
        let cfg = PenaltyConfig::new(0.1, 0.1).unwrap();
        let r = vi_lcb_finite(&d, &EpisodicTask::of(&m), &cfg).unwrap();
        let log = (4.0f64 / 0.1).ln();
        for s in 0..2 {
            for a in 0..2 {
                let expect = (m.reward()[[0, s, a]] - (0.1 * log).min(1.0)).max(0.0);
                assert!((r.q[[0, s, a]] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_rewards_give_zero() {
        let (m, d) = episodic_data(3);
        let zero = Array3::zeros((3, 2, 2));
        let task = EpisodicTask {
            reward: &zero,
            mask: None,
        };
        let r = vi_lcb_finite(&d, &task, &PenaltyConfig::finite()).unwrap();
        assert!(r.q.iter().all(|&x| x == 0.0));
        let _ = m;
    }

    #[test]
    fn plain_vi_finite_matches_backward_dp() {
        let (m, d) = episodic_data(4);
        let r = plain_vi_finite(&d, &EpisodicTask::of(&m)).unwrap();
        let emp = EpisodicMDP::new(d.count().empirical_kernels(), m.reward().clone()).unwrap();
        let star = solve_optimal_episodic(&emp);
        for h in 0..4 {
            for s in 0..2 {
                assert!((r.values[[h, s]] - star.values[[h, s]]).abs() < 1e-12);
            }
        }
    }
}
