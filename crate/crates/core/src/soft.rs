//! Soft Q/V values parametrised by a policy, and the oracles built on them.

use crate::error::{Error, Result};
use crate::logspace::log_expect_exp;
use crate::mdp::{Mdp, Rewards};
use crate::policy::Policy;
use crate::trajectory::{enumerate_suffixes, enumerate_trajectories};

/// Tie tolerance on Q values for argmax sets.
pub const ARGMAX_TIE_TOL: f64 = 1e-12;

/// `q[(t * S + s) * A + a]` for `t < T`, `v[t * S + s]` for `t <= T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftValues {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl SoftValues {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn q(&self, t: usize, s: usize, a: usize) -> f64 {
        self.q_row(t, s)[a]
    }

    pub fn q_row(&self, t: usize, s: usize) -> &[f64] {
        let start = (t * self.n_states + s) * self.n_actions;
        &self.q[start..start + self.n_actions]
    }

    pub fn v(&self, t: usize, s: usize) -> f64 {
        self.v[t * self.n_states + s]
    }

    /// `log p(O = 1)` under the initial distribution.
    pub fn log_evidence(&self, initial: &[f64]) -> f64 {
        log_expect_exp(initial, &self.v[..self.n_states])
    }
}

pub fn soft_values(m: &Mdp, pi: &Policy) -> SoftValues {
    soft_values_with(m, &m.rewards(), pi)
}

/// Backward recursion under an explicit (possibly time-varying) reward table.
pub fn soft_values_with(m: &Mdp, rewards: &Rewards, pi: &Policy) -> SoftValues {
    let (ns, na, horizon) = (m.n_states(), m.n_actions(), m.horizon());
    let mut q = vec![f64::NEG_INFINITY; horizon * ns * na];
    let mut v = vec![f64::NEG_INFINITY; (horizon + 1) * ns];
    v[horizon * ns..].copy_from_slice(rewards.terminal_table());
    for t in (0..horizon).rev() {
        let (head, next) = v.split_at_mut((t + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            for a in 0..na {
                let r = rewards.step(t, s, a);
                q[(t * ns + s) * na + a] = if r == f64::NEG_INFINITY {
                    r
                } else {
                    r + log_expect_exp(m.transition_row(s, a), next)
                };
            }
            let row = &q[(t * ns + s) * na..(t * ns + s + 1) * na];
            head[t * ns + s] = log_expect_exp(pi.row(t, s), row);
        }
    }
    SoftValues { horizon, n_states: ns, n_actions: na, q, v }
}

/// `sum_s mu(s) exp V(0, s)`, the success probability read off the values.
pub fn success_from_values(m: &Mdp, sv: &SoftValues) -> f64 {
    sv.log_evidence(m.initial()).exp()
}

/// Largest gap between `exp Q(t, s, a)` (and `exp V(t, s)`) and the
/// brute-force `p(O_{t:T} = 1 | s_t, a_t)` over suffix trajectories, at every
/// reachable `(t, s)`.
pub fn oracle_check_qv(m: &Mdp, pi: &Policy) -> Result<f64> {
    let sv = soft_values(m, pi);
    let rewards = m.rewards();
    let reachable = m.reachable();
    let mut worst: f64 = 0.0;
    for t in 0..m.horizon() {
        for s in (0..m.n_states()).filter(|&s| reachable[t][s]) {
            let mut by_action = vec![0.0; m.n_actions()];
            for e in enumerate_suffixes(m, t, s)? {
                let traj = &e.trajectory;
                let a = traj.actions[0];
                let continuation: f64 = traj.states[1..]
                    .iter()
                    .zip(&traj.actions[1..])
                    .enumerate()
                    .map(|(i, (&s2, &a2))| pi.prob(t + 1 + i, s2, a2))
                    .product();
                by_action[a] += e.dynamics_prob * continuation * traj.total_reward(&rewards, t).exp();
            }
            let mut v = 0.0;
            for (a, &p) in by_action.iter().enumerate() {
                worst = worst.max((sv.q(t, s, a).exp() - p).abs());
                v += pi.prob(t, s, a) * p;
            }
            worst = worst.max((sv.v(t, s).exp() - v).abs());
        }
    }
    Ok(worst)
}

/// Uniform over the indices within [`ARGMAX_TIE_TOL`] of the maximum; an
/// all `-inf` row maps to uniform over every index.
pub fn argmax_uniform(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![1.0 / scores.len() as f64; scores.len()];
    }
    let hits: Vec<bool> = scores.iter().map(|&x| x >= max - ARGMAX_TIE_TOL).collect();
    let count = hits.iter().filter(|&&h| h).count() as f64;
    hits.iter().map(|&h| if h { 1.0 / count } else { 0.0 }).collect()
}

/// Uniform over `argmax_a Q^pi(s_t, a)` at every `(t, s)`.
pub fn limit_policy(m: &Mdp, pi: &Policy) -> Policy {
    let sv = soft_values(m, pi);
    Policy::from_fn(m, |t, s| argmax_uniform(sv.q_row(t, s))).expect("argmax rows are distributions")
}

/// Largest per-trajectory gap between the globally conditioned distribution
/// `p(xi | O)` and the product of locally conditioned steps.
///
/// Refuses stochastic dynamics, and models where success is impossible
/// (both sides are undefined there).
pub fn check_deterministic_factorization(m: &Mdp, prior: &Policy) -> Result<f64> {
    if !m.is_deterministic() {
        return Err(Error::StochasticDynamics);
    }
    let all = enumerate_trajectories(m)?;
    let rewards = m.rewards();
    let weights: Vec<f64> = all
        .iter()
        .map(|e| prior.trajectory_prob(e) * e.trajectory.total_reward(&rewards, 0).exp())
        .collect();
    let evidence: f64 = weights.iter().sum();
    if evidence == 0.0 {
        return Err(Error::InvalidArgument("success probability is zero; p(xi | O) is undefined".into()));
    }

    let sv = soft_values(m, prior);
    let posterior = crate::retraining::goal_condition(m, prior).policy;
    // initial state posterior mu(s0 | O) ∝ mu(s0) exp V(0, s0)
    let log_z = sv.log_evidence(m.initial());
    let mut worst: f64 = 0.0;
    for (e, w) in all.iter().zip(&weights) {
        let s0 = e.trajectory.states[0];
        let mu_post = (m.initial()[s0].ln() + sv.v(0, s0) - log_z).exp();
        let local = mu_post * posterior.action_prob(&e.trajectory, 0);
        worst = worst.max((w / evidence - local).abs());
    }
    Ok(worst)
}
