use ndarray::{Array1, Array2};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::mdp::{DiscountedMDP, Policy};

pub const STATIONARY_TOL: f64 = 1e-12;
pub const STATIONARY_MAX_ITERS: usize = 1_000_000;
pub const DEFAULT_MIXING_DELTA: f64 = 0.25;

/// Row-stochastic transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChain {
    p: Array2<f64>,
}

impl MarkovChain {
    pub fn new(p: Array2<f64>) -> Result<Self> {
        let (n, m) = p.dim();
        if n != m || n == 0 {
            return Err(Error::invalid(
                "transition matrix must be square and nonempty",
            ));
        }
        for (i, row) in p.rows().into_iter().enumerate() {
            if row.iter().any(|&x| !(x >= 0.0)) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("row {i} is not a distribution")));
            }
        }
        Ok(MarkovChain { p })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `x^T P`.
    pub fn step(&self, x: &Array1<f64>) -> Array1<f64> {
        x.dot(&self.p)
    }
}

/// Chain over pairs `(s,a) -> (s',a')` with `a' ~ pi_b(.|s')`, indexed
/// `s * A + a`, together with the starting distributions `delta_{s0} x pi_b`.
#[derive(Clone, Debug)]
pub struct StateActionChain {
    pub chain: MarkovChain,
    pub starts: Array2<f64>,
}

pub fn state_action_chain(mdp: &DiscountedMDP, pi_b: &Policy) -> Result<StateActionChain> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if pi_b.num_states() != ns {
        return Err(Error::invalid("policy has the wrong number of states"));
    }
    let n = ns * na;
    let mut p = Array2::zeros((n, n));
    let mut starts = Array2::zeros((ns, n));
    for s in 0..ns {
        for (a, pa) in pi_b.action_probs(s) {
            starts[[s, s * na + a]] = pa;
        }
        for a in 0..na {
            for (next, q) in mdp.kernel().row(s, a).iter(ns) {
                for (b, pb) in pi_b.action_probs(next) {
                    p[[s * na + a, next * na + b]] += q * pb;
                }
            }
        }
    }
    Ok(StateActionChain {
        chain: MarkovChain::new(p)?,
        starts,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Fails unless the chain has a single closed class and that class is aperiodic.
fn check_ergodic(chain: &MarkovChain) -> Result<()> {
    let n = chain.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for ((i, j), &x) in chain.p.indexed_iter() {
        if x > 0.0 {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; n];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            comp[v.index()] = c;
        }
    }
    let closed: Vec<usize> = (0..sccs.len())
        .filter(|&c| {
            sccs[c]
                .iter()
                .all(|v| g.neighbors(*v).all(|w| comp[w.index()] == c))
        })
        .collect();
    if closed.len() != 1 {
        return Err(Error::invalid(format!(
            "chain is reducible with {} closed classes",
            closed.len()
        )));
    }
    // period of the closed class: gcd of level(u) + 1 - level(v) over its edges
    let members = &sccs[closed[0]];
    let root = members[0];
    let mut level = vec![usize::MAX; n];
    level[root.index()] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut period = 0;
    while let Some(u) = queue.pop_front() {
        for w in g.neighbors(u) {
            if level[w.index()] == usize::MAX {
                level[w.index()] = level[u.index()] + 1;
                queue.push_back(w);
            } else {
                let diff = (level[u.index()] + 1).abs_diff(level[w.index()]);
                period = gcd(period, diff);
            }
        }
    }
    if period != 1 {
        return Err(Error::invalid(format!(
            "chain is periodic with period {period}"
        )));
    }
    Ok(())
}

/// Unique stationary distribution by power iteration from the uniform vector.
pub fn stationary_distribution(chain: &MarkovChain) -> Result<Array1<f64>> {
    check_ergodic(chain)?;
    let n = chain.len();
    let mut mu = Array1::from_elem(n, 1.0 / n as f64);
    for _ in 0..STATIONARY_MAX_ITERS {
        let mut next = chain.step(&mu);
        let total = next.sum();
        next /= total;
        let change = (&next - &mu).iter().map(|x| x.abs()).sum::<f64>();
        mu = next;
        if change <= STATIONARY_TOL {
            return Ok(mu);
        }
    }
    Err(Error::NotConverged {
        what: "stationary distribution",
        limit: STATIONARY_MAX_ITERS,
    })
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Smallest `t >= 0` with `max_i TV(starts_i P^t, mu) <= delta`. `starts`
/// defaults to the point masses on every state of the chain.
pub fn mixing_time(
    chain: &MarkovChain,
    starts: Option<&Array2<f64>>,
    delta: f64,
    t_cap: usize,
) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("mixing threshold must lie in (0,1)"));
    }
    let mu = stationary_distribution(chain)?;
    let identity;
    let starts = match starts {
        Some(s) => s,
        None => {
            identity = Array2::eye(chain.len());
            &identity
        }
    };
    if starts.ncols() != chain.len() {
        return Err(Error::invalid(
            "starting distributions have the wrong length",
        ));
    }
    let mu = mu.to_vec();
    let mut rows = starts.clone();
    for t in 0..=t_cap {
        let worst = rows
            .rows()
            .into_iter()
            .map(|r| total_variation(r.as_slice().expect("contiguous"), &mu))
            .fold(0.0, f64::max);
        if worst <= delta {
            return Ok(t);
        }
        rows = rows.dot(chain.matrix());
    }
    Err(Error::NotConverged {
        what: "mixing time",
        limit: t_cap,
    })
}
