//! The tabular MDP model.
//!
//! Dynamics are stationary; time is carried by the policy (and, after
//! folding, by the reward table). Rewards are log success probabilities:
//! a step reward on each `(state, action)` and a terminal reward on the state
//! reached after the last decision, so `V(s_T) = terminal_reward(s_T)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::ROW_SUM_TOL;

/// Raw tables used to build an [`Mdp`].
///
/// `transition` is indexed `[(s * n_actions + a) * n_states + s_next]`,
/// `step_reward` `[s * n_actions + a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpParts {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub horizon: usize,
    pub transition: Vec<f64>,
    pub initial: Vec<f64>,
    pub step_reward: Vec<f64>,
    pub terminal_reward: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    parts: MdpParts,
}

/// One broken invariant, described in terms of state/action names.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Shape(String),
    Horizon,
    NegativeProbability { entry: String, value: f64 },
    RowSum { row: String, sum: f64 },
    InitialSum { sum: f64 },
    PositiveReward { entry: String, value: f64 },
    NanReward { entry: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(msg) => write!(f, "shape: {msg}"),
            Violation::Horizon => write!(f, "horizon must be >= 1"),
            Violation::NegativeProbability { entry, value } => {
                write!(f, "negative probability {value} at {entry}")
            }
            Violation::RowSum { row, sum } => write!(f, "transition row {row} sums to {sum}"),
            Violation::InitialSum { sum } => write!(f, "initial distribution sums to {sum}"),
            Violation::PositiveReward { entry, value } => {
                write!(f, "positive reward {value} at {entry}")
            }
            Violation::NanReward { entry } => write!(f, "NaN reward at {entry}"),
        }
    }
}

impl Violation {
    fn into_error(self) -> Error {
        match self {
            Violation::RowSum { row, sum } => Error::Stochasticity { row, sum },
            Violation::PositiveReward { entry, value } => Error::PositiveReward { entry, value },
            other => Error::InvalidMdp(other.to_string()),
        }
    }
}

/// Every invariant violation of `m`; empty iff the model is valid.
pub fn validate_mdp(m: &Mdp) -> Vec<Violation> {
    validate_parts(&m.parts)
}

fn validate_parts(p: &MdpParts) -> Vec<Violation> {
    let ns = p.states.len();
    let na = p.actions.len();
    let mut out = Vec::new();
    if ns == 0 || na == 0 {
        out.push(Violation::Shape("at least one state and one action required".into()));
        return out;
    }
    if p.transition.len() != ns * na * ns
        || p.initial.len() != ns
        || p.step_reward.len() != ns * na
        || p.terminal_reward.len() != ns
    {
        out.push(Violation::Shape("table sizes do not match the state/action sets".into()));
        return out;
    }
    if p.horizon == 0 {
        out.push(Violation::Horizon);
    }
    for s in 0..ns {
        for a in 0..na {
            let row = &p.transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            let name = format!("{}/{}", p.states[s], p.actions[a]);
            let mut negative = false;
            for (s2, &x) in row.iter().enumerate() {
                if x < 0.0 || x.is_nan() {
                    negative = true;
                    out.push(Violation::NegativeProbability {
                        entry: format!("{name} -> {}", p.states[s2]),
                        value: x,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if !negative && (sum - 1.0).abs() > ROW_SUM_TOL {
                out.push(Violation::RowSum { row: name.clone(), sum });
            }
            check_reward(&mut out, &format!("step_reward[{name}]"), p.step_reward[s * na + a]);
        }
        check_reward(&mut out, &format!("terminal_reward[{}]", p.states[s]), p.terminal_reward[s]);
    }
    let mut negative = false;
    for (s, &x) in p.initial.iter().enumerate() {
        if x < 0.0 || x.is_nan() {
            negative = true;
            out.push(Violation::NegativeProbability {
                entry: format!("initial[{}]", p.states[s]),
                value: x,
            });
        }
    }
    let sum: f64 = p.initial.iter().sum();
    if !negative && (sum - 1.0).abs() > ROW_SUM_TOL {
        out.push(Violation::InitialSum { sum });
    }
    out
}

fn check_reward(out: &mut Vec<Violation>, entry: &str, r: f64) {
    if r.is_nan() {
        out.push(Violation::NanReward { entry: entry.to_string() });
    } else if r > 0.0 {
        out.push(Violation::PositiveReward { entry: entry.to_string(), value: r });
    }
}

impl Mdp {
    /// Builds a validated model; the first violation becomes the error.
    pub fn from_parts(parts: MdpParts) -> Result<Self> {
        match validate_parts(&parts).into_iter().next() {
            Some(v) => Err(v.into_error()),
            None => Ok(Mdp { parts }),
        }
    }

    /// Builds a model without validation, for diagnosing broken inputs.
    /// Every other operation assumes a valid model.
    pub fn from_parts_unchecked(parts: MdpParts) -> Self {
        Mdp { parts }
    }

    pub fn parts(&self) -> &MdpParts {
        &self.parts
    }

    pub fn into_parts(self) -> MdpParts {
        self.parts
    }

    pub fn n_states(&self) -> usize {
        self.parts.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.parts.actions.len()
    }

    pub fn horizon(&self) -> usize {
        self.parts.horizon
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.parts.states[s]
    }

    pub fn action_name(&self, a: usize) -> &str {
        &self.parts.actions[a]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.parts.states.iter().position(|x| x == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.parts.actions.iter().position(|x| x == name)
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let ns = self.n_states();
        let start = (s * self.n_actions() + a) * ns;
        &self.parts.transition[start..start + ns]
    }

    pub fn transition(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition_row(s, a)[s_next]
    }

    /// Successors of `(s, a)` with positive probability.
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.transition_row(s, a)
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
    }

    pub fn initial(&self) -> &[f64] {
        &self.parts.initial
    }

    pub fn step_reward(&self, s: usize, a: usize) -> f64 {
        self.parts.step_reward[s * self.n_actions() + a]
    }

    pub fn terminal_reward(&self, s: usize) -> f64 {
        self.parts.terminal_reward[s]
    }

    /// The reward tables replicated over time.
    pub fn rewards(&self) -> Rewards {
        let (ns, na, t) = (self.n_states(), self.n_actions(), self.horizon());
        let mut step = Vec::with_capacity(t * ns * na);
        for _ in 0..t {
            step.extend_from_slice(&self.parts.step_reward);
        }
        Rewards {
            horizon: t,
            n_states: ns,
            n_actions: na,
            step,
            terminal: self.parts.terminal_reward.clone(),
        }
    }

    /// True iff every transition row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        (0..self.n_states()).all(|s| {
            (0..self.n_actions()).all(|a| self.transition_row(s, a).contains(&1.0))
        })
    }

    /// `reachable[t][s]`: some action sequence reaches `s` at time `t` with
    /// positive probability.
    pub fn reachable(&self) -> Vec<Vec<bool>> {
        let ns = self.n_states();
        let mut layers = Vec::with_capacity(self.horizon() + 1);
        let mut cur: Vec<bool> = self.initial().iter().map(|&p| p > 0.0).collect();
        for _ in 0..self.horizon() {
            let mut next = vec![false; ns];
            for s in (0..ns).filter(|&s| cur[s]) {
                for a in 0..self.n_actions() {
                    for (s2, _) in self.successors(s, a) {
                        next[s2] = true;
                    }
                }
            }
            layers.push(cur);
            cur = next;
        }
        layers.push(cur);
        layers
    }

    /// Copy with every step and terminal reward multiplied by `alpha > 0`.
    pub fn scale_rewards(&self, alpha: f64) -> Mdp {
        let mut parts = self.parts.clone();
        for r in parts.step_reward.iter_mut().chain(parts.terminal_reward.iter_mut()) {
            *r = scale_log(*r, alpha);
        }
        Mdp { parts }
    }
}

pub(crate) fn scale_log(r: f64, alpha: f64) -> f64 {
    if r == f64::NEG_INFINITY {
        r
    } else {
        alpha * r
    }
}

/// Time-indexed reward tables: `step[(t * n_states + s) * n_actions + a]`.
///
/// Folding the posterior into the reward makes rewards depend on time even
/// when the model's own rewards are stationary.
#[derive(Clone, Debug, PartialEq)]
pub struct Rewards {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    step: Vec<f64>,
    terminal: Vec<f64>,
}

impl Rewards {
    pub fn new(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        step: Vec<f64>,
        terminal: Vec<f64>,
    ) -> Result<Self> {
        if step.len() != horizon * n_states * n_actions || terminal.len() != n_states {
            return Err(Error::InvalidArgument("reward table shape mismatch".into()));
        }
        Ok(Rewards { horizon, n_states, n_actions, step, terminal })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn step(&self, t: usize, s: usize, a: usize) -> f64 {
        self.step[(t * self.n_states + s) * self.n_actions + a]
    }

    pub fn step_row(&self, t: usize, s: usize) -> &[f64] {
        let start = (t * self.n_states + s) * self.n_actions;
        &self.step[start..start + self.n_actions]
    }

    pub(crate) fn step_row_mut(&mut self, t: usize, s: usize) -> &mut [f64] {
        let start = (t * self.n_states + s) * self.n_actions;
        &mut self.step[start..start + self.n_actions]
    }

    pub(crate) fn layer_mut(&mut self, t: usize) -> &mut [f64] {
        let w = self.n_states * self.n_actions;
        &mut self.step[t * w..(t + 1) * w]
    }

    pub fn terminal(&self, s: usize) -> f64 {
        self.terminal[s]
    }

    pub fn terminal_table(&self) -> &[f64] {
        &self.terminal
    }

    pub fn scaled(&self, alpha: f64) -> Rewards {
        let mut out = self.clone();
        for r in out.step.iter_mut().chain(out.terminal.iter_mut()) {
            *r = scale_log(*r, alpha);
        }
        out
    }

    /// Largest finite entry; `None` if every entry is `-inf`.
    pub fn max_entry(&self) -> Option<f64> {
        self.step
            .iter()
            .chain(&self.terminal)
            .copied()
            .filter(|r| r.is_finite())
            .reduce(f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn two_state(row: [f64; 2], reward: f64) -> MdpParts {
        MdpParts {
            states: vec!["a".into(), "b".into()],
            actions: vec!["x".into()],
            horizon: 1,
            transition: vec![row[0], row[1], 0.0, 1.0],
            initial: vec![1.0, 0.0],
            step_reward: vec![reward, 0.0],
            terminal_reward: vec![0.0, 0.0],
        }
    }

    #[test]
    fn builtins_are_valid() {
        for name in builtins::NAMES {
            let m = builtins::builtin_example(name).unwrap();
            assert!(validate_mdp(&m).is_empty(), "{name}");
        }
    }

    #[test]
    fn positive_reward_is_one_violation() {
        let m = Mdp::from_parts_unchecked(two_state([0.5, 0.5], 0.1));
        let v = validate_mdp(&m);
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::PositiveReward { entry, .. } if entry == "step_reward[a/x]"));
    }

    #[test]
    fn negative_probability_is_one_violation() {
        let m = Mdp::from_parts_unchecked(two_state([-0.5, 1.5], 0.0));
        let v = validate_mdp(&m);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0], Violation::NegativeProbability { .. }));
    }

    #[test]
    fn short_row_is_a_stochasticity_error() {
        let err = Mdp::from_parts(two_state([0.5, 0.4], 0.0)).unwrap_err();
        assert!(matches!(err, Error::Stochasticity { ref row, .. } if row == "a/x"));
    }

    #[test]
    fn determinism() {
        assert!(builtins::mountain_race().is_deterministic());
        assert!(!builtins::temperature_counter().is_deterministic());
        let m = Mdp::from_parts(two_state([0.5, 0.5], 0.0)).unwrap();
        assert!(!m.is_deterministic());
    }

    #[test]
    fn scaling_keeps_neg_inf() {
        let m = builtins::mountain_race();
        let s = m.scale_rewards(3.0);
        let skull = m.state_index("skull").unwrap();
        let silver = m.state_index("silver_a").unwrap();
        assert_eq!(s.terminal_reward(skull), f64::NEG_INFINITY);
        assert!((s.terminal_reward(silver) - 3.0 * 0.75f64.ln()).abs() < 1e-15);
    }
}
