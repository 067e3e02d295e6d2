//! Property tests over seeded random models.

use proptest::prelude::*;

use incoherence::coherence::{f_soft_policy, softmax, Selector};
use incoherence::policy::{occupancy, success_probability, trajectory_distribution, trajectory_kl};
use incoherence::random::{random_mdp, random_policy, RandomConfig};
use incoherence::retraining::{condition_with, goal_condition};
use incoherence::soft::{argmax_uniform, soft_values, soft_values_with};
use incoherence::{Mdp, Policy, Rewards};

fn model(seed: u64) -> (Mdp, Policy) {
    let m = random_mdp(&RandomConfig::default(), seed);
    let p = random_policy(&m, seed);
    (m, p)
}

fn step_table(m: &Mdp, r: &Rewards) -> Vec<f64> {
    let mut out = Vec::new();
    for t in 0..m.horizon() {
        for s in 0..m.n_states() {
            out.extend_from_slice(r.step_row(t, s));
        }
    }
    out
}

fn finite_scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0..20.0f64, 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_distribution_is_normalised(seed in 0u64..10_000) {
        let (m, p) = model(seed);
        let total: f64 = trajectory_distribution(&m, &p).unwrap().iter().map(|(_, q)| q).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let occ = occupancy(&m, &p);
        for t in 0..=m.horizon() {
            prop_assert!((occ.layer(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn self_divergence_is_zero(seed in 0u64..10_000) {
        let (m, p) = model(seed);
        prop_assert_eq!(trajectory_kl(&m, &p, &p), 0.0);
    }

    #[test]
    fn evidence_matches_enumeration(seed in 0u64..10_000) {
        let (m, p) = model(seed);
        let direct = soft_values(&m, &p).log_evidence(m.initial()).exp();
        let brute = success_probability(&m, &p).unwrap();
        prop_assert!((direct - brute).abs() < 1e-12, "{direct} vs {brute}");
    }

    #[test]
    fn softmax_ignores_shifts(x in finite_scores(), c in -50.0..50.0f64, delta in 0.05..5.0f64) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        for (a, b) in softmax(&x, delta).iter().zip(softmax(&shifted, delta)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_ignores_shifts(x in finite_scores(), c in -50.0..50.0f64) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let (a, b) = (argmax_uniform(&x), argmax_uniform(&shifted));
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // ties can only merge under rounding, never split away from the max
        for (i, &w) in b.iter().enumerate() {
            if w > 0.0 {
                prop_assert!(x[i] >= x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1e-9);
            }
        }
        if a.iter().filter(|&&w| w > 0.0).count() == 1 {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn conditioning_ignores_terminal_shift(seed in 0u64..10_000, c in -5.0..5.0f64) {
        let (m, p) = model(seed);
        let r = m.rewards();
        let terminal = r.terminal_table().iter().map(|x| x + c).collect();
        let shifted = Rewards::new(m.horizon(), m.n_states(), m.n_actions(), step_table(&m, &r), terminal).unwrap();
        let a = goal_condition(&m, &p);
        let b = condition_with(&m, &shifted, &p);
        prop_assert_eq!(&a.zero_evidence, &b.zero_evidence);
        prop_assert!(a.policy.max_abs_diff(&b.policy) < 1e-12);
    }

    #[test]
    fn q_is_monotone_in_rewards(seed in 0u64..10_000, bump in 0.0..3.0f64, pick in any::<prop::sample::Index>()) {
        let (m, p) = model(seed);
        let r = m.rewards();
        let mut step = step_table(&m, &r);
        let i = pick.index(step.len());
        step[i] += bump;
        let raised = Rewards::new(m.horizon(), m.n_states(), m.n_actions(), step, r.terminal_table().to_vec()).unwrap();
        let (lo, hi) = (soft_values(&m, &p), soft_values_with(&m, &raised, &p));
        for t in 0..m.horizon() {
            for s in 0..m.n_states() {
                for a in 0..m.n_actions() {
                    let (x, y) = (lo.q(t, s, a), hi.q(t, s, a));
                    prop_assert!(y >= x || y - x >= -1e-12 * x.abs().max(1.0), "Q({t},{s},{a}) fell from {x} to {y}");
                }
            }
        }
    }

    #[test]
    fn soft_selector_under_uniform_prior_is_conditioning(seed in 0u64..10_000) {
        let m = random_mdp(&RandomConfig::default(), seed);
        let u = Policy::uniform(&m);
        let soft = f_soft_policy(&m, &u, &Selector::softmax(1.0).unwrap());
        let post = goal_condition(&m, &u).policy;
        prop_assert!(soft.max_abs_diff(&post) < 1e-12);
    }
}
