//! Exhaustive trajectory enumeration, the substrate of every brute-force
//! oracle in the crate.

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Rewards};

/// Default bound on `|S|^(T+1) * |A|^T`.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// `s_0, a_0, s_1, ..., a_{T-1}, s_T` (or a suffix starting at some `t`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    /// Sum of step rewards from time `start` plus the terminal reward.
    pub fn total_reward(&self, rewards: &Rewards, start: usize) -> f64 {
        let mut total = rewards.terminal(*self.states.last().unwrap());
        for (i, (&s, &a)) in self.states.iter().zip(&self.actions).enumerate() {
            total += rewards.step(start + i, s, a);
        }
        total
    }
}

/// A trajectory together with the probability the dynamics (and `mu` for
/// full trajectories) assign to it, independent of any policy.
#[derive(Clone, Debug)]
pub struct Enumerated {
    pub trajectory: Trajectory,
    pub dynamics_prob: f64,
}

/// `|S|^(T+1) * |A|^T`, the bound compared against the cap.
pub fn enumeration_size(m: &Mdp) -> f64 {
    size_for(m, m.horizon())
}

fn size_for(m: &Mdp, steps: usize) -> f64 {
    (m.n_states() as f64).powi(steps as i32 + 1) * (m.n_actions() as f64).powi(steps as i32)
}

fn check_cap(m: &Mdp, steps: usize, cap: u64) -> Result<()> {
    let size = size_for(m, steps);
    if size > cap as f64 {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(())
}

/// All trajectories with positive dynamics probability, each exactly once.
pub fn enumerate_trajectories(m: &Mdp) -> Result<Vec<Enumerated>> {
    enumerate_trajectories_capped(m, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_trajectories_capped(m: &Mdp, cap: u64) -> Result<Vec<Enumerated>> {
    check_cap(m, m.horizon(), cap)?;
    let mut out = Vec::new();
    for (s0, &p0) in m.initial().iter().enumerate() {
        if p0 > 0.0 {
            extend(m, m.horizon(), vec![s0], Vec::new(), p0, &mut out);
        }
    }
    Ok(out)
}

/// Suffixes `s_t = s, a_t, ..., s_T` with positive dynamics probability.
pub fn enumerate_suffixes(m: &Mdp, t: usize, s: usize) -> Result<Vec<Enumerated>> {
    let steps = m.horizon() - t;
    check_cap(m, steps, DEFAULT_ENUMERATION_CAP)?;
    let mut out = Vec::new();
    extend(m, steps, vec![s], Vec::new(), 1.0, &mut out);
    Ok(out)
}

fn extend(
    m: &Mdp,
    steps_left: usize,
    states: Vec<usize>,
    actions: Vec<usize>,
    prob: f64,
    out: &mut Vec<Enumerated>,
) {
    if steps_left == 0 {
        out.push(Enumerated { trajectory: Trajectory { states, actions }, dynamics_prob: prob });
        return;
    }
    let s = *states.last().unwrap();
    for a in 0..m.n_actions() {
        for (s2, p) in m.successors(s, a) {
            let mut st = states.clone();
            st.push(s2);
            let mut ac = actions.clone();
            ac.push(a);
            extend(m, steps_left - 1, st, ac, prob * p, out);
        }
    }
}
