//! Selectors, f-soft policies, incoherence and iterated coherence.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::{occupancy, trajectory_kl, Policy};
use crate::report::{Check, Report};
use crate::retraining::IterationTrace;
use crate::soft::{argmax_uniform, soft_values, ARGMAX_TIE_TOL};

/// Anything that maps a score vector to a distribution over its indices.
pub trait ScoreSelector {
    fn select(&self, scores: &[f64]) -> Vec<f64>;
}

impl<F: Fn(&[f64]) -> Vec<f64>> ScoreSelector for F {
    fn select(&self, scores: &[f64]) -> Vec<f64> {
        self(scores)
    }
}

/// The two order-respecting selectors used throughout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selector {
    /// `exp(x_i / delta)`, normalised.
    Softmax { delta: f64 },
    /// Uniform over the maximisers.
    ArgmaxUniform,
}

impl Selector {
    pub fn softmax(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        Ok(Selector::Softmax { delta })
    }
}

impl ScoreSelector for Selector {
    fn select(&self, scores: &[f64]) -> Vec<f64> {
        match *self {
            Selector::Softmax { delta } => softmax(scores, delta),
            Selector::ArgmaxUniform => argmax_uniform(scores),
        }
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Selector::Softmax { delta } => write!(f, "softmax({delta})"),
            Selector::ArgmaxUniform => write!(f, "argmax"),
        }
    }
}

/// `-inf` scores get weight zero; an all `-inf` row is uniform.
pub fn softmax(scores: &[f64], delta: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![1.0 / scores.len() as f64; scores.len()];
    }
    let w: Vec<f64> = scores.iter().map(|&x| ((x - max) / delta).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Applies `f` to `Q^pi(s_t, .)` at every `(t, s)`.
pub fn f_soft_policy(m: &Mdp, pi: &Policy, f: &dyn ScoreSelector) -> Policy {
    let sv = soft_values(m, pi);
    let mut out = pi.clone();
    for t in 0..m.horizon() {
        for s in 0..m.n_states() {
            out.row_mut(t, s).copy_from_slice(&f.select(sv.q_row(t, s)));
        }
    }
    out
}

/// `kappa_f(pi) = KL(p_pi || p_{f-soft(pi)})` over trajectories.
pub fn incoherence(m: &Mdp, pi: &Policy, f: &dyn ScoreSelector) -> f64 {
    trajectory_kl(m, pi, &f_soft_policy(m, pi, f))
}

/// Result of [`iterate_coherence`].
#[derive(Clone, Debug)]
pub struct CoherenceRun {
    pub trace: IterationTrace,
    /// First `i` with `pi_{i+1} = pi_i` (entrywise within 1e-12), if seen.
    pub fixpoint_at: Option<usize>,
}

/// Fixpoint tolerance, entrywise over every row.
pub const FIXPOINT_TOL: f64 = 1e-12;

/// `pi_{i+1} = f-soft(pi_i)` for `steps` steps; the trace's `kappa` column is
/// `kappa_f`.
pub fn iterate_coherence(m: &Mdp, pi0: &Policy, f: Selector, steps: usize) -> CoherenceRun {
    let mut policies = vec![pi0.clone()];
    let mut fixpoint_at = None;
    for i in 0..steps {
        let next = f_soft_policy(m, &policies[i], &f);
        if fixpoint_at.is_none() && next.max_abs_diff(&policies[i]) <= FIXPOINT_TOL {
            fixpoint_at = Some(i);
        }
        policies.push(next);
    }
    CoherenceRun {
        trace: IterationTrace::from_policies(m, "coherence", &f.to_string(), policies, f),
        fixpoint_at,
    }
}

/// Samples score vectors in `[-5, 0]^dim` and unit-scale coordinate bumps and
/// checks the three order-respecting clauses.
pub fn check_order_respecting(f: &dyn ScoreSelector, trials: usize, dim: usize, seed: u64) -> Report {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut own, mut others, mut order) = (0usize, 0usize, 0usize);
    for _ in 0..trials {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..0.0)).collect();
        let fx = f.select(&x);
        for i in 0..dim {
            for j in 0..dim {
                if i != j && x[i] >= x[j] && fx[i] < fx[j] - TOL {
                    order += 1;
                }
            }
        }
        let i = rng.random_range(0..dim);
        let mut bumped = x.clone();
        bumped[i] += rng.random_range(0.0..1.0);
        let fb = f.select(&bumped);
        if fb[i] < fx[i] - TOL {
            own += 1;
        }
        others += (0..dim).filter(|&j| j != i && fb[j] > fx[j] + TOL).count();
    }
    let mut r = Report::new(format!("order-respecting ({trials} trials, dim {dim}, seed {seed})"));
    r.push(Check::at_most("own-score monotonicity violations", own as f64, 0.0));
    r.push(Check::at_most("other-score antitonicity violations", others as f64, 0.0));
    r.push(Check::at_most("order preservation violations", order as f64, 0.0));
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeVerdict {
    /// Finite along the schedule and settled at its end.
    Bounded,
    /// Infinite or above the ceiling somewhere on the schedule.
    Diverging,
    /// Finite and below the ceiling but still moving at the end.
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct KappaProbe {
    pub values: Vec<(f64, f64)>,
    pub verdict: ProbeVerdict,
}

pub const DEFAULT_KAPPA_CEILING: f64 = 1e6;

/// `delta = 2^-j` for `j = 0..=30`.
pub fn default_delta_schedule() -> Vec<f64> {
    (0..=30).map(|j| 0.5f64.powi(j)).collect()
}

/// Evaluates `kappa_delta(pi)` along a decreasing schedule.
pub fn kappa_optimality_probe(m: &Mdp, pi: &Policy, schedule: &[f64], ceiling: f64) -> Result<KappaProbe> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty delta schedule".into()));
    }
    let mut values = Vec::with_capacity(schedule.len());
    for &delta in schedule {
        values.push((delta, incoherence(m, pi, &Selector::softmax(delta)?)));
    }
    let verdict = if values.iter().any(|&(_, k)| k.is_nan() || k > ceiling) {
        ProbeVerdict::Diverging
    } else {
        let last = values[values.len() - 1].1;
        let prev = values.len().checked_sub(2).map_or(last, |i| values[i].1);
        if (last - prev).abs() <= 1e-6 * (1.0 + last.abs()) {
            ProbeVerdict::Bounded
        } else {
            ProbeVerdict::Inconclusive
        }
    };
    Ok(KappaProbe { values, verdict })
}

/// A deterministic policy on deterministic dynamics is coherent iff it is
/// greedy w.r.t. its own soft Q at every occupied state.
pub fn check_greedy_coherence(m: &Mdp, pi: &Policy) -> Result<bool> {
    if !m.is_deterministic() {
        return Err(Error::StochasticDynamics);
    }
    if !pi.is_deterministic() {
        return Err(Error::StochasticPolicy);
    }
    let sv = soft_values(m, pi);
    let d = occupancy(m, pi);
    for t in 0..m.horizon() {
        for s in 0..m.n_states() {
            if d.at(t, s) == 0.0 {
                continue;
            }
            let q = sv.q_row(t, s);
            let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let a = pi.row(t, s).iter().position(|&p| p == 1.0).unwrap();
            if q[a] < max - ARGMAX_TIE_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::mountain_race;
    use crate::mdp::MdpParts;
    use crate::soft::limit_policy;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn row_close(row: &[f64], want: &[f64], tol: f64) -> bool {
        row.iter().zip(want).all(|(a, b)| close(*a, *b, tol))
    }

    #[test]
    fn boltzmann_first_step() {
        let m = mountain_race();
        let pi = f_soft_policy(&m, &Policy::uniform(&m), &Selector::Softmax { delta: 1.0 });
        assert!(row_close(pi.row(0, 0), &[0.4, 0.6], 1e-12));
        assert_eq!(pi.row(1, m.state_index("mountain").unwrap()), &[1.0, 0.0]);
    }

    #[test]
    fn fixpoint_after_two_steps() {
        let m = mountain_race();
        let run = iterate_coherence(&m, &Policy::uniform(&m), Selector::Softmax { delta: 1.0 }, 4);
        let p2 = &run.trace.entries[2].policy;
        assert!(row_close(p2.row(0, 0), &[4.0 / 7.0, 3.0 / 7.0], 1e-12));
        assert!(row_close(p2.row(1, m.state_index("forest").unwrap()), &[0.5, 0.5], 1e-12));
        assert_eq!(run.fixpoint_at, Some(2));
        assert!(run.trace.entries[2].kappa <= 1e-10);
        assert!(run.trace.entries[4].policy.max_abs_diff(p2) <= 1e-12);
    }

    #[test]
    fn argmax_selector_is_limit_policy() {
        let m = mountain_race();
        let pi = Policy::from_fn(&m, |_, _| vec![0.3, 0.7]).unwrap();
        assert_eq!(f_soft_policy(&m, &pi, &Selector::ArgmaxUniform), limit_policy(&m, &pi));
    }

    #[test]
    fn kappa_of_first_boltzmann_iterate() {
        let m = mountain_race();
        let pi1 = f_soft_policy(&m, &Policy::uniform(&m), &Selector::Softmax { delta: 1.0 });
        let k = incoherence(&m, &pi1, &Selector::Softmax { delta: 1.0 });
        assert!(close(k, 0.4 * 0.7f64.ln() + 0.6 * 1.4f64.ln(), 1e-12));
    }

    #[test]
    fn zero_reward_uniform_is_coherent() {
        let m = Mdp::from_parts(MdpParts {
            terminal_reward: vec![0.0; 7],
            ..mountain_race().into_parts()
        })
        .unwrap();
        for delta in [0.1, 1.0, 10.0] {
            assert_eq!(incoherence(&m, &Policy::uniform(&m), &Selector::Softmax { delta }), 0.0);
        }
    }

    #[test]
    fn selectors_respect_order() {
        assert!(check_order_respecting(&Selector::Softmax { delta: 1.0 }, 1000, 4, 7).passed());
        assert!(check_order_respecting(&Selector::ArgmaxUniform, 1000, 4, 7).passed());
        let reversed = |x: &[f64]| softmax(&x.iter().map(|v| -v).collect::<Vec<_>>(), 1.0);
        assert!(!check_order_respecting(&reversed, 100, 4, 7).passed());
    }

    #[test]
    fn softmax_shift_invariance() {
        let x = [-0.3, -1.2, f64::NEG_INFINITY];
        let a = softmax(&x, 0.7);
        let b = softmax(&x.map(|v| v - 4.0), 0.7);
        assert!(row_close(&a, &b, 1e-15));
        assert_eq!(a[2], 0.0);
    }

    #[test]
    fn probes() {
        let m = mountain_race();
        let sched = default_delta_schedule();
        let best = Policy::deterministic(&m, |_, _| 0);
        let probe = kappa_optimality_probe(&m, &best, &sched, DEFAULT_KAPPA_CEILING).unwrap();
        assert_eq!(probe.verdict, ProbeVerdict::Bounded);
        assert!(probe.values.last().unwrap().1 < 1e-12);
        let probe = kappa_optimality_probe(&m, &Policy::uniform(&m), &sched, DEFAULT_KAPPA_CEILING).unwrap();
        assert_eq!(probe.verdict, ProbeVerdict::Diverging);
    }

    #[test]
    fn greedy_coherence() {
        let m = mountain_race();
        assert!(check_greedy_coherence(&m, &Policy::deterministic(&m, |_, _| 0)).unwrap());
        // down at the root, up afterwards: root Q = (0, log 3/4)
        assert!(!check_greedy_coherence(&m, &Policy::deterministic(&m, |t, _| usize::from(t == 0))).unwrap());
        assert!(matches!(
            check_greedy_coherence(&m, &Policy::uniform(&m)),
            Err(Error::StochasticPolicy)
        ));
    }
}
