use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::mdp::{EpisodicPolicy, Kernel, Policy, TransitionRow};

/// One sample transition. `step` is the 0-based step for episodic data and 0
/// otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

impl Transition {
    pub fn new(state: usize, action: usize, next_state: usize) -> Self {
        Transition {
            step: 0,
            state,
            action,
            next_state,
        }
    }

    pub fn at_step(step: usize, state: usize, action: usize, next_state: usize) -> Self {
        Transition {
            step,
            state,
            action,
            next_state,
        }
    }
}

/// A flat bag of transitions. `horizon` is set when the transitions carry
/// step annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionDataset {
    num_states: usize,
    num_actions: usize,
    horizon: Option<usize>,
    transitions: Vec<Transition>,
}

impl TransitionDataset {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: Option<usize>,
        transitions: Vec<Transition>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::invalid(
                "dataset needs at least one state and one action",
            ));
        }
        if horizon == Some(0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        for (i, t) in transitions.iter().enumerate() {
            let step_ok = match horizon {
                Some(h) => t.step < h,
                None => t.step == 0,
            };
            if t.state >= num_states
                || t.next_state >= num_states
                || t.action >= num_actions
                || !step_ok
            {
                return Err(Error::invalid(format!("transition {i} is out of range")));
            }
        }
        Ok(TransitionDataset {
            num_states,
            num_actions,
            horizon,
            transitions,
        })
    }

    pub fn empty(num_states: usize, num_actions: usize, horizon: Option<usize>) -> Self {
        TransitionDataset {
            num_states,
            num_actions,
            horizon,
            transitions: Vec::new(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn count(&self) -> CountTable {
        let steps = self.horizon.unwrap_or(1);
        let mut table = CountTable::zeros(steps, self.num_states, self.num_actions);
        for t in &self.transitions {
            table.add(t.step, t.state, t.action, t.next_state, 1);
        }
        table
    }
}

/// `(s_1, a_1, ..., s_H, a_H, s_{H+1})` with 0-based steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        (0..self.actions.len()).map(move |h| {
            Transition::at_step(h, self.states[h], self.actions[h], self.states[h + 1])
        })
    }
}

#[derive(Clone, Debug)]
pub struct EpisodicDataset {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub trajectories: Vec<Trajectory>,
    pub initial: Vec<f64>,
    pub behavior: EpisodicPolicy,
}

impl EpisodicDataset {
    pub fn num_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn to_transitions(&self) -> TransitionDataset {
        let transitions = self
            .trajectories
            .iter()
            .flat_map(|t| t.transitions())
            .collect();
        TransitionDataset {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: Some(self.horizon),
            transitions,
        }
    }

    pub(crate) fn with_trajectories(&self, trajectories: Vec<Trajectory>) -> Self {
        EpisodicDataset {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            trajectories,
            initial: self.initial.clone(),
            behavior: self.behavior.clone(),
        }
    }
}

/// Single Markovian rollout `s_0, a_0, ..., s_T, a_T`.
#[derive(Clone, Debug)]
pub struct MarkovTrajectory {
    pub num_states: usize,
    pub num_actions: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub behavior: Policy,
}

impl MarkovTrajectory {
    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn initial_state(&self) -> usize {
        self.states[0]
    }

    /// Transition `(s_t, a_t, s_{t+1})`.
    pub fn transition(&self, t: usize) -> Transition {
        Transition::new(self.states[t], self.actions[t], self.states[t + 1])
    }

    pub fn transitions(&self, range: std::ops::Range<usize>) -> TransitionDataset {
        TransitionDataset {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: None,
            transitions: range.map(|t| self.transition(t)).collect(),
        }
    }
}

/// Visit counts `N_h(s,a)` and successor counts. Non-episodic data uses a
/// single step.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    visits: Array3<u64>,
    successors: Vec<Vec<(usize, u64)>>,
}

impl CountTable {
    pub fn zeros(steps: usize, num_states: usize, num_actions: usize) -> Self {
        CountTable {
            visits: Array3::zeros((steps, num_states, num_actions)),
            successors: vec![Vec::new(); steps * num_states * num_actions],
        }
    }

    fn index(&self, h: usize, s: usize, a: usize) -> usize {
        let (_, ns, na) = self.visits.dim();
        (h * ns + s) * na + a
    }

    pub fn add(&mut self, h: usize, s: usize, a: usize, next: usize, n: u64) {
        if n == 0 {
            return;
        }
        self.visits[[h, s, a]] += n;
        let i = self.index(h, s, a);
        let cell = &mut self.successors[i];
        match cell.binary_search_by_key(&next, |&(x, _)| x) {
            Ok(j) => cell[j].1 += n,
            Err(j) => cell.insert(j, (next, n)),
        }
    }

    pub fn num_steps(&self) -> usize {
        self.visits.dim().0
    }

    pub fn num_states(&self) -> usize {
        self.visits.dim().1
    }

    pub fn num_actions(&self) -> usize {
        self.visits.dim().2
    }

    pub fn visits(&self) -> &Array3<u64> {
        &self.visits
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[[h, s, a]]
    }

    /// `N_h(s) = sum_a N_h(s,a)` as an `[steps, S]` array.
    pub fn state_counts(&self) -> Array2<u64> {
        self.visits.sum_axis(ndarray::Axis(2))
    }

    /// `N(s,a)` of step `h` as an `[S, A]` array.
    pub fn step_counts(&self, h: usize) -> Array2<u64> {
        self.visits.index_axis(ndarray::Axis(0), h).to_owned()
    }

    pub fn successors(&self, h: usize, s: usize, a: usize) -> &[(usize, u64)] {
        &self.successors[self.index(h, s, a)]
    }

    pub fn total(&self) -> u64 {
        self.visits.sum()
    }

    /// Frequency estimate of the kernel at step `h`; unvisited rows are uniform.
    pub fn empirical_kernel(&self, h: usize) -> Kernel {
        let (_, ns, na) = self.visits.dim();
        let mut rows = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                let n = self.visits[[h, s, a]];
                if n == 0 {
                    rows.push(TransitionRow::Uniform);
                } else {
                    let nf = n as f64;
                    rows.push(TransitionRow::Sparse(
                        self.successors(h, s, a)
                            .iter()
                            .map(|&(x, c)| (x, c as f64 / nf))
                            .collect(),
                    ));
                }
            }
        }
        Kernel::new(ns, na, rows).expect("empirical rows are valid")
    }

    pub fn empirical_kernels(&self) -> Vec<Kernel> {
        (0..self.num_steps())
            .map(|h| self.empirical_kernel(h))
            .collect()
    }
}
