use crate::analysis::concentrability;
use crate::error::Result;
use crate::hard::instances::{FiniteHardInstance, InfiniteHardInstance};
use crate::mdp::{
    occupancy_discounted, occupancy_episodic, solve_optimal_discounted, solve_optimal_episodic,
};

pub const VALUE_TOL: f64 = 1e-9;
pub const OCCUPANCY_TOL: f64 = 1e-10;
pub const CONCENTRABILITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckItem {
    pub name: &'static str,
    pub passed: bool,
    /// Largest deviation seen, or 0 for exact checks.
    pub deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub items: Vec<CheckItem>,
}

impl VerifyReport {
    fn push(&mut self, name: &'static str, passed: bool, deviation: f64) {
        self.items.push(CheckItem {
            name,
            passed,
            deviation,
        });
    }

    fn within(&mut self, name: &'static str, deviation: f64, tol: f64) {
        self.push(name, deviation <= tol, deviation);
    }

    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

fn closed_subset(rows: impl Iterator<Item = Vec<f64>>) -> bool {
    rows.into_iter().all(|r| r[2..].iter().all(|&x| x == 0.0))
}

/// Closed-form identities of a discounted instance against the exact solvers.
pub fn verify_infinite(inst: &InfiniteHardInstance) -> Result<VerifyReport> {
    let mdp = &inst.mdp;
    let ns = mdp.num_states();
    let gamma = inst.gamma;
    let star = solve_optimal_discounted(mdp)?;
    let mut report = VerifyReport::default();

    report.within(
        "value_state1",
        (star.values[1] - 0.5 / (1.0 - gamma)).abs(),
        VALUE_TOL,
    );
    report.push(
        "optimal_action_state0",
        star.policy.action(0) == inst.theta,
        0.0,
    );
    report.push("optimal_action_state1", star.policy.action(1) == 0, 0.0);

    let occ_b = occupancy_discounted(mdp, &inst.behavior, &inst.rho_b)?;
    let dev = (0..ns)
        .flat_map(|s| (0..2).map(move |a| (s, a)))
        .map(|(s, a)| (occ_b.state_action[[0, s, a]] - inst.mu[s] / 2.0).abs())
        .fold(0.0, f64::max);
    report.within("behavior_occupancy", dev, OCCUPANCY_TOL);

    let occ_star = occupancy_discounted(mdp, &star.policy, &inst.rho)?;
    let d00 = occ_star.state_action[[0, 0, inst.theta]];
    report.push(
        "optimal_occupancy_state0",
        d00 >= 1.0 / (1.0 + gamma) - VALUE_TOL,
        d00,
    );

    let conc = concentrability(&occ_star.state_action, &occ_b.state_action)?;
    report.within(
        "c_star_clipped",
        (conc.c_star_clipped - 2.0 * inst.c).abs(),
        CONCENTRABILITY_TOL,
    );

    let rows = (0..2).flat_map(|s| (0..2).map(move |a| mdp.kernel().row(s, a).to_dense(ns)));
    report.push("closed_subset", closed_subset(rows), 0.0);
    Ok(report)
}

/// Closed-form identities of an episodic instance against the exact solvers.
/// At the last step both actions in state 0 earn the same value, so only
/// membership of `theta_H` in the argmax is checked there.
pub fn verify_finite(inst: &FiniteHardInstance) -> Result<VerifyReport> {
    let mdp = &inst.mdp;
    let (hz, ns) = (mdp.horizon(), mdp.num_states());
    let star = solve_optimal_episodic(mdp);
    let mut report = VerifyReport::default();

    let dev = (0..hz)
        .map(|h| (star.values[[h, 1]] - (hz - h) as f64 / 2.0).abs())
        .fold(0.0, f64::max);
    report.within("value_state1", dev, VALUE_TOL);
    let slack = (0..hz)
        .map(|h| star.values[[h, 0]] - 2.0 / 3.0 * (hz - h) as f64)
        .fold(f64::INFINITY, f64::min);
    report.push("value_state0_lower", slack >= -VALUE_TOL, slack);

    let state0 = (0..hz).all(|h| {
        let theta = inst.theta[h] as usize;
        if h + 1 < hz {
            star.policy.step(h).action(0) == theta
        } else {
            star.q[[h, 0, theta]] >= star.q[[h, 0, 1 - theta]]
        }
    });
    report.push("optimal_action_state0", state0, 0.0);
    report.push(
        "optimal_action_state1",
        (0..hz).all(|h| star.policy.step(h).action(1) == 0),
        0.0,
    );

    let occ_b = occupancy_episodic(mdp, &inst.behavior, &inst.rho_b)?;
    let dev = occ_b
        .state_action
        .indexed_iter()
        .map(|((_, s, _), &x)| (x - inst.mu[s] / 2.0).abs())
        .fold(0.0, f64::max);
    report.within("behavior_occupancy", dev, OCCUPANCY_TOL);

    let occ_star = occupancy_episodic(mdp, &star.policy, &inst.rho)?;
    let conc = concentrability(&occ_star.state_action, &occ_b.state_action)?;
    report.within(
        "c_star_clipped",
        (conc.c_star_clipped - 2.0 * inst.c).abs(),
        CONCENTRABILITY_TOL,
    );

    let rows = (0..hz).flat_map(|h| {
        (0..2).flat_map(move |s| (0..2).map(move |a| mdp.kernel(h).row(s, a).to_dense(ns)))
    });
    report.push("closed_subset", closed_subset(rows), 0.0);
    Ok(report)
}
