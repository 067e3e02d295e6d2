//! n-policy-stability: does preferring `a1` over `a2` under the best
//! `n`-step open-loop continuations agree with preferring `a1` outright?

use std::fmt;

use crate::builtins::stability_tree;
use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::Policy;
use crate::report::{fmt_num, Check, Report};
use crate::soft::{soft_values, SoftValues};
use crate::trajectory::enumerate_suffixes;

/// Tolerance for strict comparisons between success masses.
pub const STABILITY_TOL: f64 = 1e-12;

/// One violated implication.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub t: usize,
    pub state: usize,
    pub actions: (usize, usize),
    /// A best continuation after each first action.
    pub continuations: (Vec<usize>, Vec<usize>),
    /// Success masses under those continuations.
    pub lookahead: (f64, f64),
    /// Success masses of the first actions alone, prior afterwards.
    pub immediate: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub n: usize,
    pub stable: bool,
    pub witnesses: Vec<Witness>,
    /// Largest gap between a witness mass and its enumeration.
    pub oracle_gap: f64,
}

/// `p(O_{t:T} = 1 | s_t = s, actions)` with the prior after `actions` run out.
fn open_loop_success(m: &Mdp, sv: &SoftValues, t: usize, s: usize, actions: &[usize]) -> f64 {
    match actions.split_first() {
        None => sv.v(t, s).exp(),
        Some((&a, rest)) => {
            let r = m.step_reward(s, a).exp();
            if r == 0.0 {
                return 0.0;
            }
            r * m
                .successors(s, a)
                .map(|(s2, p)| p * open_loop_success(m, sv, t + 1, s2, rest))
                .sum::<f64>()
        }
    }
}

/// The same mass by summing over enumerated suffix trajectories.
fn enumerated_success(m: &Mdp, prior: &Policy, t: usize, s: usize, actions: &[usize]) -> Result<f64> {
    let rewards = m.rewards();
    let mut total = 0.0;
    for e in enumerate_suffixes(m, t, s)? {
        let traj = &e.trajectory;
        if traj.actions[..actions.len()] != *actions {
            continue;
        }
        let after: f64 = (actions.len()..traj.actions.len())
            .map(|i| prior.prob(t + i, traj.states[i], traj.actions[i]))
            .product();
        total += e.dynamics_prob * after * traj.total_reward(&rewards, t).exp();
    }
    Ok(total)
}

/// Every action sequence of length `len`, lexicographic.
fn sequences(n_actions: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n_actions).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

/// For each first action, the best mass over continuations of length `w`
/// and the first continuation attaining it.
fn best_lookahead(m: &Mdp, sv: &SoftValues, t: usize, s: usize, w: usize) -> Vec<(f64, Vec<usize>)> {
    let conts = sequences(m.n_actions(), w);
    (0..m.n_actions())
        .map(|a| {
            let mut best = (f64::NEG_INFINITY, Vec::new());
            for c in &conts {
                let mut seq = vec![a];
                seq.extend(c);
                let mass = open_loop_success(m, sv, t, s, &seq);
                if mass > best.0 {
                    best = (mass, c.clone());
                }
            }
            best
        })
        .collect()
}

fn window(m: &Mdp, n: usize, t: usize) -> usize {
    n.min(m.horizon() - 1 - t)
}

fn check_fits(m: &Mdp, n: usize) -> Result<()> {
    if n + 1 > m.horizon() {
        if let Some(s) = m.initial().iter().position(|&p| p > 0.0) {
            return Err(Error::HorizonExceeded { n, state: m.state_name(s).to_string(), t: 0 });
        }
    }
    Ok(())
}

/// Checks, at every reachable `(t, s)` and every ordered pair of first
/// actions, that a strict lookahead preference for `a1` is matched by a
/// strict immediate preference. The lookahead window shrinks near the
/// horizon; `n` must fit at the initial states.
pub fn n_policy_stable(m: &Mdp, prior: &Policy, n: usize) -> Result<StabilityReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("lookahead depth must be >= 1".into()));
    }
    check_fits(m, n)?;
    let sv = soft_values(m, prior);
    let reachable = m.reachable();
    let mut witnesses = Vec::new();
    let mut oracle_gap: f64 = 0.0;
    for t in 0..m.horizon() {
        let w = window(m, n, t);
        for s in (0..m.n_states()).filter(|&s| reachable[t][s]) {
            let best = best_lookahead(m, &sv, t, s, w);
            let immediate: Vec<f64> = sv.q_row(t, s).iter().map(|q| q.exp()).collect();
            for a1 in 0..m.n_actions() {
                for a2 in (0..m.n_actions()).filter(|&a| a != a1) {
                    let (l1, l2) = (best[a1].0, best[a2].0);
                    if l1 > l2 + STABILITY_TOL && immediate[a1] <= immediate[a2] + STABILITY_TOL {
                        let witness = Witness {
                            t,
                            state: s,
                            actions: (a1, a2),
                            continuations: (best[a1].1.clone(), best[a2].1.clone()),
                            lookahead: (l1, l2),
                            immediate: (immediate[a1], immediate[a2]),
                        };
                        oracle_gap = oracle_gap.max(witness_gap(m, prior, &witness)?);
                        witnesses.push(witness);
                    }
                }
            }
        }
    }
    Ok(StabilityReport { n, stable: witnesses.is_empty(), witnesses, oracle_gap })
}

fn witness_gap(m: &Mdp, prior: &Policy, w: &Witness) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for (a, cont, look, imm) in [
        (w.actions.0, &w.continuations.0, w.lookahead.0, w.immediate.0),
        (w.actions.1, &w.continuations.1, w.lookahead.1, w.immediate.1),
    ] {
        let mut seq = vec![a];
        seq.extend(cont);
        gap = gap.max((enumerated_success(m, prior, w.t, w.state, &seq)? - look).abs());
        gap = gap.max((enumerated_success(m, prior, w.t, w.state, &[a])? - imm).abs());
    }
    Ok(gap)
}

impl StabilityReport {
    pub fn describe(&self, m: &Mdp) -> String {
        let mut out = format!(
            "{}-policy-stability: {}",
            self.n,
            if self.stable { "stable" } else { "unstable" }
        );
        for w in &self.witnesses {
            let names = |c: &[usize]| c.iter().map(|&a| m.action_name(a)).collect::<Vec<_>>().join(",");
            out.push_str(&format!(
                "\n  t={} s={}: {}[{}] {} > {}[{}] {} but immediate {} <= {}",
                w.t,
                m.state_name(w.state),
                m.action_name(w.actions.0),
                names(&w.continuations.0),
                fmt_num(w.lookahead.0),
                m.action_name(w.actions.1),
                names(&w.continuations.1),
                fmt_num(w.lookahead.1),
                fmt_num(w.immediate.0),
                fmt_num(w.immediate.1),
            ));
        }
        out
    }
}

/// The strict preference between two first actions at an initial state
/// under one-step and two-step lookahead.
#[derive(Clone, Debug, PartialEq)]
pub struct RootOrdering {
    pub state: usize,
    pub actions: (usize, usize),
    /// Best masses of `(a1, a2)` with one-step lookahead; `a1` wins.
    pub one_step: (f64, f64),
    /// Best masses of `(a1, a2)` with two-step lookahead; `a2` wins.
    pub two_step: (f64, f64),
    pub continuations: (ActionPair, ActionPair),
}

/// Best one-step and two-step action sequences for one root action.
pub type ActionPair = (Vec<usize>, Vec<usize>);

#[derive(Clone, Debug)]
pub struct StabilityConflict {
    pub conflicts: Vec<RootOrdering>,
    pub one: StabilityReport,
    pub two: StabilityReport,
    pub oracle_gap: f64,
}

impl StabilityConflict {
    pub fn confirmed(&self) -> bool {
        !self.conflicts.is_empty()
    }
}

/// Looks for a pair of first actions at an initial state that one-step
/// lookahead strictly orders one way and two-step lookahead the other.
pub fn stability_conflict(m: &Mdp, prior: &Policy) -> Result<StabilityConflict> {
    let one = n_policy_stable(m, prior, 1)?;
    let two = n_policy_stable(m, prior, 2)?;
    let sv = soft_values(m, prior);
    let mut conflicts = Vec::new();
    let mut oracle_gap = one.oracle_gap.max(two.oracle_gap);
    for s in (0..m.n_states()).filter(|&s| m.initial()[s] > 0.0) {
        let b1 = best_lookahead(m, &sv, 0, s, 1);
        let b2 = best_lookahead(m, &sv, 0, s, 2);
        for a1 in 0..m.n_actions() {
            for a2 in (0..m.n_actions()).filter(|&a| a != a1) {
                if b1[a1].0 > b1[a2].0 + STABILITY_TOL && b2[a2].0 > b2[a1].0 + STABILITY_TOL {
                    for (b, a) in [(&b1, a1), (&b1, a2), (&b2, a1), (&b2, a2)] {
                        let mut seq = vec![a];
                        seq.extend(&b[a].1);
                        oracle_gap = oracle_gap.max((enumerated_success(m, prior, 0, s, &seq)? - b[a].0).abs());
                    }
                    conflicts.push(RootOrdering {
                        state: s,
                        actions: (a1, a2),
                        one_step: (b1[a1].0, b1[a2].0),
                        two_step: (b2[a1].0, b2[a2].0),
                        continuations: ((b1[a1].1.clone(), b1[a2].1.clone()), (b2[a1].1.clone(), b2[a2].1.clone())),
                    });
                }
            }
        }
    }
    Ok(StabilityConflict { conflicts, one, two, oracle_gap })
}

/// Report form of [`stability_conflict`]; passes iff a conflict is found and
/// every mass is reproduced by enumeration within [`STABILITY_TOL`].
pub fn conflict_report(m: &Mdp, prior: &Policy) -> Result<Report> {
    let c = stability_conflict(m, prior)?;
    let mut r = Report::new("1- vs 2-policy-stability");
    r.push(Check::flag("root ordering conflict", c.confirmed()));
    r.push(Check::at_most("witness masses vs enumeration", c.oracle_gap, STABILITY_TOL));
    if !c.confirmed() {
        r.note("no conflict");
    }
    for k in &c.conflicts {
        let (a1, a2) = (m.action_name(k.actions.0), m.action_name(k.actions.1));
        r.note(format!(
            "at {}: one-step {a1} {} > {a2} {}; two-step {a2} {} > {a1} {}",
            m.state_name(k.state),
            fmt_num(k.one_step.0),
            fmt_num(k.one_step.1),
            fmt_num(k.two_step.1),
            fmt_num(k.two_step.0),
        ));
    }
    r.note(c.one.describe(m));
    r.note(c.two.describe(m));
    Ok(r)
}

/// The conflict on the builtin tree under a uniform prior.
pub fn stability_conflict_demo() -> Report {
    let m = stability_tree();
    conflict_report(&m, &Policy::uniform(&m)).expect("the builtin tree fits two-step lookahead")
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={} s={} a=({}, {}) lookahead=({}, {}) immediate=({}, {})",
            self.t,
            self.state,
            self.actions.0,
            self.actions.1,
            fmt_num(self.lookahead.0),
            fmt_num(self.lookahead.1),
            fmt_num(self.immediate.0),
            fmt_num(self.immediate.1)
        )
    }
}
