//! Time-indexed policies and the functionals computed from them.

use crate::error::{Error, Result};
use crate::logspace::{entropy, expect_ext, kl_divergence, ln_prob, total_variation};
use crate::mdp::{Mdp, Rewards};
use crate::trajectory::{enumerate_trajectories, Enumerated, Trajectory};
use crate::ROW_SUM_TOL;

/// `pi(a | s, t)` for every `t < T` and every state, stored row-major as
/// `[(t * n_states + s) * n_actions + a]`.
///
/// Priors are policies too; a stationary prior repeats its rows over `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != horizon * n_states * n_actions {
            return Err(Error::InvalidPolicy(format!(
                "expected {} entries, got {}",
                horizon * n_states * n_actions,
                probs.len()
            )));
        }
        let p = Policy { horizon, n_states, n_actions, probs };
        for t in 0..horizon {
            for s in 0..n_states {
                let row = p.row(t, s);
                if row.iter().any(|&x| x < 0.0 || x.is_nan()) {
                    return Err(Error::InvalidPolicy(format!("negative entry at t={t}, s={s}")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidPolicy(format!("row t={t}, s={s} sums to {sum}")));
                }
            }
        }
        Ok(p)
    }

    pub fn uniform(m: &Mdp) -> Self {
        let na = m.n_actions();
        Policy {
            horizon: m.horizon(),
            n_states: m.n_states(),
            n_actions: na,
            probs: vec![1.0 / na as f64; m.horizon() * m.n_states() * na],
        }
    }

    /// Builds a policy row by row.
    pub fn from_fn(m: &Mdp, mut row: impl FnMut(usize, usize) -> Vec<f64>) -> Result<Self> {
        let mut probs = Vec::with_capacity(m.horizon() * m.n_states() * m.n_actions());
        for t in 0..m.horizon() {
            for s in 0..m.n_states() {
                probs.extend(row(t, s));
            }
        }
        Policy::new(m.horizon(), m.n_states(), m.n_actions(), probs)
    }

    /// Point mass on `choose(t, s)`.
    pub fn deterministic(m: &Mdp, mut choose: impl FnMut(usize, usize) -> usize) -> Self {
        let na = m.n_actions();
        Policy::from_fn(m, |t, s| {
            let mut row = vec![0.0; na];
            row[choose(t, s)] = 1.0;
            row
        })
        .expect("point masses are valid rows")
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, t: usize, s: usize) -> &[f64] {
        let start = (t * self.n_states + s) * self.n_actions;
        &self.probs[start..start + self.n_actions]
    }

    pub(crate) fn row_mut(&mut self, t: usize, s: usize) -> &mut [f64] {
        let start = (t * self.n_states + s) * self.n_actions;
        &mut self.probs[start..start + self.n_actions]
    }

    pub fn prob(&self, t: usize, s: usize, a: usize) -> f64 {
        self.row(t, s)[a]
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.chunks(self.n_actions).all(|r| r.contains(&1.0))
    }

    /// True iff every row puts positive mass on every action.
    pub fn has_full_support(&self) -> bool {
        self.probs.iter().all(|&x| x > 0.0)
    }

    /// Largest entrywise difference over all rows, reached or not.
    pub fn max_abs_diff(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn fits(&self, m: &Mdp) -> bool {
        self.horizon == m.horizon() && self.n_states == m.n_states() && self.n_actions == m.n_actions()
    }

    /// Probability of `traj` (a full trajectory) including its dynamics factor.
    pub fn trajectory_prob(&self, e: &Enumerated) -> f64 {
        e.dynamics_prob * self.action_prob(&e.trajectory, 0)
    }

    /// Product of action probabilities along `traj`, whose first action is
    /// taken at time `start`.
    pub fn action_prob(&self, traj: &Trajectory, start: usize) -> f64 {
        traj.states
            .iter()
            .zip(&traj.actions)
            .enumerate()
            .map(|(i, (&s, &a))| self.prob(start + i, s, a))
            .product()
    }
}

/// `d_t(s)`: probability of being in `s` at time `t`, for `t = 0..=T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy {
    n_states: usize,
    table: Vec<f64>,
}

impl Occupancy {
    pub fn at(&self, t: usize, s: usize) -> f64 {
        self.table[t * self.n_states + s]
    }

    pub fn layer(&self, t: usize) -> &[f64] {
        &self.table[t * self.n_states..(t + 1) * self.n_states]
    }

    pub fn horizon(&self) -> usize {
        self.table.len() / self.n_states - 1
    }
}

/// Forward recursion from the initial distribution.
pub fn occupancy(m: &Mdp, pi: &Policy) -> Occupancy {
    let ns = m.n_states();
    let mut table = Vec::with_capacity((m.horizon() + 1) * ns);
    table.extend_from_slice(m.initial());
    for t in 0..m.horizon() {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            let d = table[t * ns + s];
            if d == 0.0 {
                continue;
            }
            for (a, &pa) in pi.row(t, s).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (s2, p) in m.successors(s, a) {
                    next[s2] += d * pa * p;
                }
            }
        }
        table.extend(next);
    }
    Occupancy { n_states: ns, table }
}

/// Every positive-dynamics trajectory with its probability under `pi`.
pub fn trajectory_distribution(m: &Mdp, pi: &Policy) -> Result<Vec<(Trajectory, f64)>> {
    Ok(enumerate_trajectories(m)?
        .into_iter()
        .map(|e| {
            let p = pi.trajectory_prob(&e);
            (e.trajectory, p)
        })
        .collect())
}

/// `J(pi)`: expected sum of step rewards plus terminal reward.
pub fn expected_return(m: &Mdp, pi: &Policy) -> f64 {
    expected_return_with(m, &m.rewards(), pi)
}

pub fn expected_return_with(m: &Mdp, rewards: &Rewards, pi: &Policy) -> f64 {
    let d = occupancy(m, pi);
    let mut total = 0.0;
    for t in 0..m.horizon() {
        for s in 0..m.n_states() {
            let w = d.at(t, s);
            if w == 0.0 {
                continue;
            }
            let r = expect_ext(pi.row(t, s), rewards.step_row(t, s));
            if r == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += w * r;
        }
    }
    let terminal = expect_ext(d.layer(m.horizon()), rewards.terminal_table());
    if terminal == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    total + terminal
}

/// `p_pi(O_{0:T} = 1)` by enumeration.
pub fn success_probability(m: &Mdp, pi: &Policy) -> Result<f64> {
    let rewards = m.rewards();
    Ok(enumerate_trajectories(m)?
        .iter()
        .map(|e| pi.trajectory_prob(e) * e.trajectory.total_reward(&rewards, 0).exp())
        .sum())
}

/// Trajectory KL in occupancy form: `sum_t E_{d_t^pi} KL(pi(.|s) || rho(.|s))`.
pub fn trajectory_kl(m: &Mdp, pi: &Policy, rho: &Policy) -> f64 {
    let d = occupancy(m, pi);
    let mut kl = 0.0;
    for t in 0..m.horizon() {
        for s in 0..m.n_states() {
            let w = d.at(t, s);
            if w == 0.0 {
                continue;
            }
            let k = kl_divergence(pi.row(t, s), rho.row(t, s));
            if k == f64::INFINITY {
                return f64::INFINITY;
            }
            kl += w * k;
        }
    }
    kl
}

/// KL between the two trajectory distributions, by enumeration.
pub fn oracle_trajectory_kl(m: &Mdp, pi: &Policy, rho: &Policy) -> Result<f64> {
    let mut kl = 0.0;
    for e in enumerate_trajectories(m)? {
        let p = pi.trajectory_prob(&e);
        if p == 0.0 {
            continue;
        }
        let q = rho.trajectory_prob(&e);
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        let traj = &e.trajectory;
        // dynamics cancel; take the log-ratio action by action to keep precision
        let log_ratio: f64 = traj
            .states
            .iter()
            .zip(&traj.actions)
            .enumerate()
            .map(|(t, (&s, &a))| ln_prob(pi.prob(t, s, a)) - ln_prob(rho.prob(t, s, a)))
            .sum();
        kl += p * log_ratio;
    }
    Ok(kl.max(0.0))
}

/// Occupancy-weighted sum of per-state policy entropies, in nats.
pub fn causal_entropy(m: &Mdp, pi: &Policy) -> f64 {
    let d = occupancy(m, pi);
    (0..m.horizon())
        .flat_map(|t| (0..m.n_states()).map(move |s| (t, s)))
        .map(|(t, s)| {
            let w = d.at(t, s);
            if w == 0.0 {
                0.0
            } else {
                w * entropy(pi.row(t, s))
            }
        })
        .sum()
}

/// Largest row-wise total variation over `(t, s)` occupied by either policy.
pub fn policy_tv(m: &Mdp, a: &Policy, b: &Policy) -> f64 {
    let da = occupancy(m, a);
    let db = occupancy(m, b);
    let mut worst: f64 = 0.0;
    for t in 0..m.horizon() {
        for s in 0..m.n_states() {
            if da.at(t, s) > 0.0 || db.at(t, s) > 0.0 {
                worst = worst.max(total_variation(a.row(t, s), b.row(t, s)));
            }
        }
    }
    worst
}

/// Largest row-wise total variation over `(t, s)` occupied by `reference`.
pub fn policy_tv_under(m: &Mdp, reference: &Policy, a: &Policy, b: &Policy) -> f64 {
    let d = occupancy(m, reference);
    let mut worst: f64 = 0.0;
    for t in 0..m.horizon() {
        for s in 0..m.n_states() {
            if d.at(t, s) > 0.0 {
                worst = worst.max(total_variation(a.row(t, s), b.row(t, s)));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{mountain_race, temperature_counter};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Root row (up, down) with fixed continuations at mountain and forest.
    pub(crate) fn mountain_policy(m: &Mdp, root: [f64; 2], mountain: [f64; 2], forest: [f64; 2]) -> Policy {
        let (r, mo, fo) = (
            m.state_index("root").unwrap(),
            m.state_index("mountain").unwrap(),
            m.state_index("forest").unwrap(),
        );
        Policy::from_fn(m, |_, s| {
            if s == r {
                root.to_vec()
            } else if s == mo {
                mountain.to_vec()
            } else if s == fo {
                forest.to_vec()
            } else {
                vec![0.5, 0.5]
            }
        })
        .unwrap()
    }

    #[test]
    fn uniform_mountain_leaves_are_quarter() {
        let m = mountain_race();
        let dist = trajectory_distribution(&m, &Policy::uniform(&m)).unwrap();
        assert_eq!(dist.len(), 4);
        for (_, p) in &dist {
            assert!(close(*p, 0.25, 1e-15));
        }
    }

    #[test]
    fn coherent_policy_gold_path() {
        let m = mountain_race();
        let pi = mountain_policy(&m, [4.0 / 7.0, 3.0 / 7.0], [1.0, 0.0], [0.5, 0.5]);
        let gold = m.state_index("gold").unwrap();
        let p: f64 = trajectory_distribution(&m, &pi)
            .unwrap()
            .iter()
            .filter(|(t, _)| t.states[2] == gold)
            .map(|(_, p)| p)
            .sum();
        assert!(close(p, 4.0 / 7.0, 1e-15));
        let d = occupancy(&m, &pi);
        assert!(close(d.at(1, m.state_index("mountain").unwrap()), 4.0 / 7.0, 1e-15));
    }

    #[test]
    fn counter_trajectory_probability() {
        let m = temperature_counter();
        let dist = trajectory_distribution(&m, &Policy::uniform(&m)).unwrap();
        let (_, p) = dist
            .iter()
            .find(|(t, _)| t.actions == [0] && t.states == [0, 1])
            .unwrap();
        // 1/2 * 3/4
        assert!(close(*p, 3.0 / 8.0, 1e-15));
    }

    #[test]
    fn returns() {
        let m = mountain_race();
        assert_eq!(expected_return(&m, &Policy::uniform(&m)), f64::NEG_INFINITY);
        let up = Policy::deterministic(&m, |_, _| 0);
        assert_eq!(expected_return(&m, &up), 0.0);

        // 5/8 log(1/3) + 3/8 log(2/3), the enumeration-weighted expectation
        let c = temperature_counter();
        let expected = 0.625 * (1.0f64 / 3.0).ln() + 0.375 * (2.0f64 / 3.0).ln();
        assert!(close(expected_return(&c, &Policy::uniform(&c)), expected, 1e-14));
        assert!(close(expected, -0.838_682_1, 1e-7));
    }

    #[test]
    fn success_probabilities() {
        let m = mountain_race();
        // 1/2 (1/2 * 1 + 1/2 * 0) + 1/2 * 3/4
        assert!(close(success_probability(&m, &Policy::uniform(&m)).unwrap(), 5.0 / 8.0, 1e-15));
        let up = Policy::deterministic(&m, |_, _| 0);
        assert!(close(success_probability(&m, &up).unwrap(), 1.0, 1e-15));
        let c = temperature_counter();
        assert!(close(success_probability(&c, &Policy::uniform(&c)).unwrap(), 11.0 / 24.0, 1e-15));
    }

    #[test]
    fn occupancy_starts_at_mu_and_rows_sum_to_one() {
        let m = mountain_race();
        let d = occupancy(&m, &Policy::uniform(&m));
        assert_eq!(d.layer(0), m.initial());
        assert!(close(d.at(1, m.state_index("mountain").unwrap()), 0.5, 0.0));
        for t in 0..=m.horizon() {
            assert!(close(d.layer(t).iter().sum(), 1.0, 1e-10));
        }
    }

    #[test]
    fn kl_examples() {
        let m = mountain_race();
        let pi = mountain_policy(&m, [0.4, 0.6], [1.0, 0.0], [0.5, 0.5]);
        let rho = mountain_policy(&m, [4.0 / 7.0, 3.0 / 7.0], [1.0, 0.0], [0.5, 0.5]);
        assert_eq!(trajectory_kl(&m, &pi, &pi), 0.0);
        // closed-form two-point KL at the root: 0.4 ln(0.7) + 0.6 ln(1.4)
        let closed = 0.4 * 0.7f64.ln() + 0.6 * 1.4f64.ln();
        assert!(close(trajectory_kl(&m, &pi, &rho), closed, 1e-14));
        assert!(close(closed, 0.059_213_4, 1e-7));
        assert!(close(oracle_trajectory_kl(&m, &pi, &rho).unwrap(), closed, 1e-12));

        let uniform = Policy::uniform(&m);
        assert_eq!(trajectory_kl(&m, &uniform, &pi), f64::INFINITY);
        assert_eq!(oracle_trajectory_kl(&m, &uniform, &pi).unwrap(), f64::INFINITY);
    }

    #[test]
    fn entropies() {
        let m = mountain_race();
        assert_eq!(causal_entropy(&m, &Policy::deterministic(&m, |_, _| 1)), 0.0);
        assert!(close(causal_entropy(&m, &Policy::uniform(&m)), 2.0 * 2f64.ln(), 1e-15));
        let c = temperature_counter();
        assert!(close(causal_entropy(&c, &Policy::uniform(&c)), 2f64.ln(), 1e-15));
    }

    #[test]
    fn invalid_rows_are_rejected() {
        assert!(Policy::new(1, 1, 2, vec![0.5, 0.4]).is_err());
        assert!(Policy::new(1, 1, 2, vec![1.5, -0.5]).is_err());
        assert!(Policy::new(1, 1, 2, vec![1.0]).is_err());
    }
}
