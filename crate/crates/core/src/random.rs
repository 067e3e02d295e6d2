//! Seeded random models and priors for property suites.
//!
//! Even seeds produce layered models (states grouped by time step, every
//! transition moves one layer forward); odd seeds produce general graphs with
//! cycles and self-loops. Both stay small enough for exact enumeration.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{Mdp, MdpParts};
use crate::policy::Policy;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomConfig {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_horizon: usize,
    /// Point-mass transition rows only.
    pub deterministic: bool,
    /// Probability that a reward entry is `-inf`.
    pub zero_success: f64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig { max_states: 6, max_actions: 3, max_horizon: 4, deterministic: false, zero_success: 0.1 }
    }
}

impl RandomConfig {
    pub fn deterministic() -> Self {
        RandomConfig { deterministic: true, ..Default::default() }
    }
}

pub fn random_mdp(cfg: &RandomConfig, seed: u64) -> Mdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.random_range(2..=cfg.max_states.max(2));
    let na = rng.random_range(1..=cfg.max_actions.max(1));
    let horizon = rng.random_range(1..=cfg.max_horizon.max(1));
    let layered = seed.is_multiple_of(2);

    // layer of each state; general models put everything in one layer
    let layers = if layered { horizon.min(ns - 1) + 1 } else { 1 };
    let mut layer_of: Vec<usize> = (0..ns).map(|s| s.min(layers - 1)).collect();
    for l in layer_of.iter_mut().skip(layers) {
        *l = rng.random_range(0..layers);
    }
    layer_of.sort_unstable();
    let members = |l: usize| -> Vec<usize> { (0..ns).filter(|&s| layer_of[s] == l).collect() };

    let mut transition = vec![0.0; ns * na * ns];
    for s in 0..ns {
        let targets = if layered { members((layer_of[s] + 1).min(layers - 1)) } else { (0..ns).collect() };
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            let k = if cfg.deterministic { 1 } else { rng.random_range(1..=3usize.min(targets.len())) };
            let mut pool = targets.clone();
            let mut chosen = Vec::with_capacity(k);
            for _ in 0..k {
                chosen.push(pool.swap_remove(rng.random_range(0..pool.len())));
            }
            let weights: Vec<f64> = chosen.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let z: f64 = weights.iter().sum();
            for (&s2, w) in chosen.iter().zip(&weights) {
                row[s2] = w / z;
            }
            // exact unit mass so row sums stay within tolerance
            let sum: f64 = row.iter().sum();
            row[chosen[0]] += 1.0 - sum;
        }
    }

    let starts = members(0);
    let mut initial = vec![0.0; ns];
    let n0 = rng.random_range(1..=starts.len().min(2));
    let w: Vec<f64> = (0..n0).map(|_| rng.random_range(0.1..1.0)).collect();
    let z: f64 = w.iter().sum();
    for (i, wi) in w.iter().enumerate() {
        initial[starts[i]] = wi / z;
    }
    let sum: f64 = initial.iter().sum();
    initial[starts[0]] += 1.0 - sum;

    let reward = |rng: &mut ChaCha8Rng, zero_weight: f64| -> f64 {
        if rng.random_bool(cfg.zero_success) {
            f64::NEG_INFINITY
        } else if rng.random_bool(zero_weight) {
            0.0
        } else {
            rng.random_range(0.05f64..1.0).ln()
        }
    };
    let step_reward = (0..ns * na).map(|_| reward(&mut rng, 0.5)).collect();
    let terminal_reward = (0..ns).map(|_| reward(&mut rng, 0.1)).collect();

    Mdp::from_parts(MdpParts {
        states: (0..ns).map(|s| format!("s{s}")).collect(),
        actions: (0..na).map(|a| format!("a{a}")).collect(),
        horizon,
        transition,
        initial,
        step_reward,
        terminal_reward,
    })
    .expect("generated models are valid")
}

/// A time-varying policy with every entry at least a few percent.
pub fn random_policy(m: &Mdp, seed: u64) -> Policy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    Policy::from_fn(m, |_, _| {
        let w: Vec<f64> = (0..m.n_actions()).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = w.iter().sum();
        let mut row: Vec<f64> = w.iter().map(|x| x / z).collect();
        let sum: f64 = row.iter().sum();
        row[0] += 1.0 - sum;
        row
    })
    .expect("normalised rows")
}

/// `count` models with seeds `seed, seed + 1, ...`, each paired with a
/// random full-support prior.
pub fn random_suite(cfg: &RandomConfig, count: usize, seed: u64) -> Vec<(u64, Mdp, Policy)> {
    (0..count as u64)
        .map(|i| {
            let s = seed.wrapping_add(i);
            let m = random_mdp(cfg, s);
            let p = random_policy(&m, s);
            (s, m, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_mdp;

    #[test]
    fn generated_models_are_valid_and_reproducible() {
        for seed in 0..200 {
            let m = random_mdp(&RandomConfig::default(), seed);
            assert!(validate_mdp(&m).is_empty());
            assert!(m.n_states() <= 6 && m.n_actions() <= 3 && m.horizon() <= 4);
            assert_eq!(m, random_mdp(&RandomConfig::default(), seed));
        }
    }

    #[test]
    fn deterministic_config() {
        for seed in 0..50 {
            assert!(random_mdp(&RandomConfig::deterministic(), seed).is_deterministic());
        }
    }

    #[test]
    fn priors_have_full_support() {
        let m = random_mdp(&RandomConfig::default(), 3);
        assert!(random_policy(&m, 3).has_full_support());
    }
}
