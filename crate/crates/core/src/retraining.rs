//! Retraining dynamics: repeated goal conditioning, inverse temperature, and
//! folding the posterior back into the reward.

use crate::coherence::{incoherence, Selector};
use crate::error::{Error, Result};
use crate::logspace::ln_prob;
use crate::mdp::{Mdp, Rewards};
use crate::policy::{causal_entropy, expected_return, policy_tv, Policy};
use crate::report::{Check, Report};
use crate::soft::{limit_policy, soft_values, soft_values_with, success_from_values};

/// Tolerance on policy identities, as largest row-wise total variation.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

/// Slack allowed in monotone-improvement assertions.
pub const IMPROVEMENT_SLACK: f64 = 1e-10;

/// A goal-conditioned policy and the `(t, s)` where success was impossible
/// and the prior row was kept.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub policy: Policy,
    pub zero_evidence: Vec<(usize, usize)>,
}

/// `pi(a | s_t) ∝ prior(a | s_t) p_prior(O_{t:T} = 1 | s_t, a)`.
pub fn goal_condition(m: &Mdp, prior: &Policy) -> Posterior {
    condition_with(m, &m.rewards(), prior)
}

/// Goal conditioning under an explicit reward table.
pub fn condition_with(m: &Mdp, rewards: &Rewards, prior: &Policy) -> Posterior {
    let sv = soft_values_with(m, rewards, prior);
    let mut policy = prior.clone();
    let mut zero_evidence = Vec::new();
    for t in 0..m.horizon() {
        for s in 0..m.n_states() {
            let v = sv.v(t, s);
            if v == f64::NEG_INFINITY {
                zero_evidence.push((t, s));
                continue;
            }
            let q = sv.q_row(t, s);
            let row = policy.row_mut(t, s);
            for (p, &qa) in row.iter_mut().zip(q) {
                *p = if *p == 0.0 { 0.0 } else { *p * (qa - v).exp() };
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= z);
        }
    }
    Posterior { policy, zero_evidence }
}

/// `G_0 = prior`, `G_{i+1} = G(G_i)`, for `i < k`.
pub fn g_sequence(m: &Mdp, prior: &Policy, k: usize) -> Vec<Policy> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(prior.clone());
    for i in 0..k {
        let next = goal_condition(m, &out[i]).policy;
        out.push(next);
    }
    out
}

/// Goal conditioning of the unchanged prior under rewards scaled by `alpha`.
pub fn temperature_policy(m: &Mdp, prior: &Policy, alpha: f64) -> Result<Policy> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    Ok(condition_with(m, &m.rewards().scaled(alpha), prior).policy)
}

/// One element of a folded sequence.
#[derive(Clone, Debug)]
pub struct FoldedState {
    /// `r_k` after normalisation.
    pub rewards: Rewards,
    /// Constant subtracted from each step layer `t` to keep `r_k <= 0`.
    pub shift: Vec<f64>,
    pub policy: Policy,
}

/// `log(pi / prior)` added into `base`, then each step layer is shifted by its
/// largest finite entry.
///
/// A constant per layer adds the same amount to every trajectory, so the
/// posterior is unchanged. Actions the prior never takes get no ratio term.
fn fold(base: &Rewards, pi: &Policy, prior: &Policy) -> (Rewards, Vec<f64>) {
    let mut r = base.clone();
    let (ns, na) = (pi.n_states(), pi.n_actions());
    let mut shift = Vec::with_capacity(pi.horizon());
    for t in 0..pi.horizon() {
        for s in 0..ns {
            let (p, q) = (pi.row(t, s), prior.row(t, s));
            for (a, x) in r.step_row_mut(t, s).iter_mut().enumerate() {
                if q[a] > 0.0 && *x != f64::NEG_INFINITY {
                    *x += ln_prob(p[a]) - q[a].ln();
                }
            }
        }
        let layer = r.layer_mut(t);
        let c = layer.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        let c = if c.is_finite() { c } else { 0.0 };
        layer.iter_mut().for_each(|x| *x -= c);
        shift.push(c);
        debug_assert_eq!(layer.len(), ns * na);
    }
    (r, shift)
}

fn initial_state(m: &Mdp, prior: &Policy) -> FoldedState {
    FoldedState { rewards: m.rewards(), shift: vec![0.0; m.horizon()], policy: prior.clone() }
}

/// `r_{k+1} = r_0 + log(F_k / prior)` and `F_{k+1}` the prior conditioned on
/// `r_{k+1}`; `F_0 = prior`, `F_1 = G(prior)`.
pub fn folded_sequence(m: &Mdp, prior: &Policy, k: usize) -> Vec<FoldedState> {
    let r0 = m.rewards();
    let mut out = vec![initial_state(m, prior)];
    for i in 0..k {
        let (rewards, shift) = if i == 0 {
            (r0.clone(), vec![0.0; m.horizon()])
        } else {
            fold(&r0, &out[i].policy, prior)
        };
        let policy = condition_with(m, &rewards, prior).policy;
        out.push(FoldedState { rewards, shift, policy });
    }
    out
}

/// `H_0 = prior`; for `j >= 1`, `r_j = r_{j-1} + log(P(r_{j-1}) / prior)` and
/// `H_j = P(r_j)`, where `P(r)` is the prior conditioned on `r`.
pub fn cumulative_folded_sequence(m: &Mdp, prior: &Policy, k: usize) -> Vec<FoldedState> {
    let mut out = vec![initial_state(m, prior)];
    let mut r = m.rewards();
    for _ in 0..k {
        let p = condition_with(m, &r, prior).policy;
        let (next, shift) = fold(&r, &p, prior);
        let policy = condition_with(m, &next, prior).policy;
        r = next.clone();
        out.push(FoldedState { rewards: next, shift, policy });
    }
    out
}

/// One row of an [`IterationTrace`].
#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub k: usize,
    pub policy: Policy,
    pub ret: f64,
    pub success: f64,
    pub kappa: f64,
    /// TV to the previous entry; 0 for the first.
    pub tv_step: f64,
    /// TV to the limit policy of the final entry.
    pub tv_to_limit: f64,
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub operator: String,
    pub schedule: String,
    pub entries: Vec<TraceEntry>,
    /// Reward snapshots, for folded operators only.
    pub folded: Vec<FoldedState>,
}

impl IterationTrace {
    /// Evaluates every functional on each policy; `kappa` is taken under `sel`.
    pub fn from_policies(m: &Mdp, operator: &str, schedule: &str, policies: Vec<Policy>, sel: Selector) -> Self {
        let limit = policies.last().map(|p| limit_policy(m, p));
        let mut entries: Vec<TraceEntry> = Vec::with_capacity(policies.len());
        for (k, policy) in policies.into_iter().enumerate() {
            let tv_step = entries.last().map_or(0.0, |prev| policy_tv(m, &prev.policy, &policy));
            let tv_to_limit = policy_tv(m, &policy, limit.as_ref().unwrap());
            entries.push(TraceEntry {
                k,
                ret: expected_return(m, &policy),
                success: success_from_values(m, &soft_values(m, &policy)),
                kappa: incoherence(m, &policy, &sel),
                tv_step,
                tv_to_limit,
                policy,
            });
        }
        IterationTrace { operator: operator.into(), schedule: schedule.into(), entries, folded: Vec::new() }
    }

    pub fn last(&self) -> &TraceEntry {
        self.entries.last().expect("traces are never empty")
    }
}

pub fn iterate_g(m: &Mdp, prior: &Policy, k: usize, sel: Selector) -> IterationTrace {
    IterationTrace::from_policies(m, "G", "step", g_sequence(m, prior, k), sel)
}

/// `pi_{alpha(j)}` for each `alpha` in the schedule, `j` counting from 0.
pub fn iterate_temperature(m: &Mdp, prior: &Policy, alphas: &[f64], schedule: &str, sel: Selector) -> Result<IterationTrace> {
    let policies = alphas.iter().map(|&a| temperature_policy(m, prior, a)).collect::<Result<Vec<_>>>()?;
    Ok(IterationTrace::from_policies(m, "temp", schedule, policies, sel))
}

pub fn iterate_folded(m: &Mdp, prior: &Policy, k: usize, cumulative: bool, sel: Selector) -> IterationTrace {
    let states = if cumulative {
        cumulative_folded_sequence(m, prior, k)
    } else {
        folded_sequence(m, prior, k)
    };
    let policies = states.iter().map(|f| f.policy.clone()).collect();
    let op = if cumulative { "H" } else { "F" };
    let mut trace = IterationTrace::from_policies(m, op, "step", policies, sel);
    trace.folded = states;
    trace
}

/// The three-way identity.
///
/// Deterministic dynamics: `pi_{alpha=2^j} = G_{2^j} = F_{2^j} = H_j` for
/// `1 <= j <= k_max`, and `F_k = pi_{alpha=k}` for `k <= 2^k_max`.
/// Stochastic dynamics: only `F_k = G_k` is asserted; the temperature gaps are
/// reported as measurements.
pub fn check_equivalence(m: &Mdp, prior: &Policy, k_max: usize) -> Result<Report> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    let n = 1usize << k_max;
    let g = g_sequence(m, prior, n);
    let f = folded_sequence(m, prior, n);
    let deterministic = m.is_deterministic();
    let mut r = Report::new(format!(
        "equivalence ({} dynamics, k_max = {k_max})",
        if deterministic { "deterministic" } else { "stochastic" }
    ));
    let tv = |a: &Policy, b: &Policy| policy_tv(m, a, b);

    let worst_fg = (1..=n).map(|k| tv(&f[k].policy, &g[k])).fold(0.0, f64::max);
    r.push(Check::at_most(format!("F_k = G_k, k <= {n}"), worst_fg, EQUIVALENCE_TOL));

    let temps: Vec<Policy> = (1..=n).map(|k| temperature_policy(m, prior, k as f64)).collect::<Result<_>>()?;
    let worst_ft = (1..=n).map(|k| tv(&f[k].policy, &temps[k - 1])).fold(0.0, f64::max);

    let h = cumulative_folded_sequence(m, prior, k_max);
    let mut worst_ht: f64 = 0.0;
    let mut worst_hg: f64 = 0.0;
    let mut worst_gt: f64 = 0.0;
    for j in 1..=k_max {
        let p = 1usize << j;
        worst_ht = worst_ht.max(tv(&h[j].policy, &temps[p - 1]));
        worst_hg = worst_hg.max(tv(&h[j].policy, &g[p]));
        worst_gt = worst_gt.max(tv(&g[p], &temps[p - 1]));
    }
    if deterministic {
        r.push(Check::at_most(format!("F_k = pi_(alpha=k), k <= {n}"), worst_ft, EQUIVALENCE_TOL));
        r.push(Check::at_most(format!("H_j = pi_(alpha=2^j), j <= {k_max}"), worst_ht, EQUIVALENCE_TOL));
        r.push(Check::at_most(format!("H_j = G_(2^j), j <= {k_max}"), worst_hg, EQUIVALENCE_TOL));
        r.push(Check::at_most(format!("G_(2^j) = pi_(alpha=2^j), j <= {k_max}"), worst_gt, EQUIVALENCE_TOL));
    } else {
        r.push(Check::info(format!("max TV(F_k, pi_(alpha=k)), k <= {n}"), worst_ft));
        r.push(Check::info(format!("max TV(H_j, pi_(alpha=2^j)), j <= {k_max}"), worst_ht));
        r.push(Check::info(format!("max TV(H_j, G_(2^j)), j <= {k_max}"), worst_hg));
        r.push(Check::info("TV(F_1, pi_(alpha=2))", tv(&f[1].policy, &temps[1])));
        r.push(Check::info("TV(F_2, pi_(alpha=2))", tv(&f[2].policy, &temps[1])));
    }
    Ok(r)
}

/// Asserts `F_k = pi_{alpha=k}` whatever the dynamics; fails on stochastic
/// models where folding and temperature part ways.
pub fn check_strict_temperature(m: &Mdp, prior: &Policy, k_max: usize) -> Result<Report> {
    let n = 1usize << k_max.max(1);
    let f = folded_sequence(m, prior, n);
    let mut r = Report::new(format!("folding vs temperature, any dynamics (k <= {n})"));
    for k in 1..=n {
        let t = temperature_policy(m, prior, k as f64)?;
        r.push(Check::at_most(format!("F_{k} = pi_(alpha={k})"), policy_tv(m, &f[k].policy, &t), EQUIVALENCE_TOL));
    }
    let t2 = temperature_policy(m, prior, 2.0)?;
    r.push(Check::info("TV(F_1, pi_(alpha=2))", policy_tv(m, &f[1].policy, &t2)));
    Ok(r)
}

/// `J` and the success probability along `G_0..G_k`, both asserted
/// nondecreasing within [`IMPROVEMENT_SLACK`].
pub fn improvement_audit(m: &Mdp, prior: &Policy, k: usize) -> Report {
    let seq = g_sequence(m, prior, k);
    let returns: Vec<f64> = seq.iter().map(|p| expected_return(m, p)).collect();
    let success: Vec<f64> = seq.iter().map(|p| success_from_values(m, &soft_values(m, p))).collect();
    let drop = |xs: &[f64]| {
        xs.windows(2)
            .map(|w| if w[1] == w[0] { 0.0 } else { w[0] - w[1] })
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    };
    let mut r = Report::new(format!("improvement over {k} iterations"));
    r.push(Check::at_most("largest drop in J", drop(&returns), IMPROVEMENT_SLACK));
    r.push(Check::at_most("largest drop in success probability", drop(&success), IMPROVEMENT_SLACK));
    let fmt = |xs: &[f64]| xs.iter().map(|x| crate::report::fmt_num(*x)).collect::<Vec<_>>().join(", ");
    r.note(format!("J: {}", fmt(&returns)));
    r.note(format!("success: {}", fmt(&success)));
    r
}

pub const CONVERGENCE_TV_TOL: f64 = 1e-3;
pub const CONVERGENCE_KAPPA_TOL: f64 = 1e-2;

/// Distance of `G_k` from its own limit policy and `kappa_delta(G_k)`.
pub fn convergence_probe(m: &Mdp, prior: &Policy, k: usize, delta: f64) -> Result<Report> {
    let mut r = Report::new(format!("convergence at k = {k}, delta = {delta}"));
    if !prior.has_full_support() {
        r.push(Check::flag("prior has full support", false));
        r.note("full-support precondition violated");
    }
    let gk = g_sequence(m, prior, k).pop().unwrap();
    let star = limit_policy(m, &gk);
    r.push(Check::at_most("TV(G_k, limit policy)", policy_tv(m, &gk, &star), CONVERGENCE_TV_TOL));
    r.push(Check::at_most(
        "kappa_delta(G_k)",
        incoherence(m, &gk, &Selector::softmax(delta)?),
        CONVERGENCE_KAPPA_TOL,
    ));
    Ok(r)
}

/// One index of [`rate_check`].
#[derive(Clone, Debug)]
pub struct RateRow {
    pub k: usize,
    /// `J(G_k) - J(G_{k-1})`.
    pub actual: f64,
    /// Prefactor `1 / (k (k - 1))`.
    pub predicted: f64,
    /// Prefactor `1 / k`.
    pub predicted_literal: f64,
    pub ratio: f64,
    pub ratio_literal: f64,
}

#[derive(Clone, Debug)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Second differences at `h` and `h / 2` disagree somewhere.
    pub unstable: bool,
    /// No action choice anywhere: both sides vanish identically.
    pub degenerate: bool,
    /// Largest `|J(G_j) - J(pi_{alpha=j})|` seen.
    pub g_temp_gap: f64,
}

/// Relative disagreement between step `h` and `h / 2` above which the
/// finite-difference derivatives are declared unstable.
pub const RICHARDSON_TOL: f64 = 1e-4;

/// Compares the observed return gain `J(G_k) - J(G_{k-1})` with the
/// leading-order prediction `eta J' H' / (J'' + H'' / k)` at `alpha = k`,
/// derivatives in `alpha` by central differences.
pub fn rate_check(m: &Mdp, prior: &Policy, k: usize, h: f64) -> Result<RateReport> {
    if !m.is_deterministic() {
        return Err(Error::StochasticDynamics);
    }
    if k < 4 {
        return Err(Error::InvalidArgument("rate_check needs k >= 4".into()));
    }
    if !(h > 0.0 && h < 1.5) {
        return Err(Error::InvalidArgument(format!("step h must lie in (0, 1.5), got {h}")));
    }
    let eval = |alpha: f64| -> Result<(f64, f64)> {
        let p = temperature_policy(m, prior, alpha)?;
        Ok((expected_return(m, &p), causal_entropy(m, &p)))
    };
    // (J', J'', H', H'') at alpha with step h
    let derivs = |alpha: f64, h: f64| -> Result<[f64; 4]> {
        let (jm, hm) = eval(alpha - h)?;
        let (j0, h0) = eval(alpha)?;
        let (jp, hp) = eval(alpha + h)?;
        Ok([
            (jp - jm) / (2.0 * h),
            (jp - 2.0 * j0 + jm) / (h * h),
            (hp - hm) / (2.0 * h),
            (hp - 2.0 * h0 + hm) / (h * h),
        ])
    };
    let g = g_sequence(m, prior, k);
    let degenerate = m.n_actions() == 1;
    let mut rows = Vec::new();
    let mut unstable = false;
    let mut g_temp_gap: f64 = 0.0;
    for j in 2..=k {
        let alpha = j as f64;
        let jg = expected_return(m, &g[j]);
        let (jt, _) = eval(alpha)?;
        g_temp_gap = g_temp_gap.max(if jg == jt { 0.0 } else { (jg - jt).abs() });
        let actual = jg - expected_return(m, &g[j - 1]);
        let d = derivs(alpha, h)?;
        let d2 = derivs(alpha, h / 2.0)?;
        for i in [1, 3] {
            let scale = d[i].abs().max(d2[i].abs());
            if scale > 1e-9 && (d[i] - d2[i]).abs() > RICHARDSON_TOL * scale {
                unstable = true;
            }
        }
        let core = d[0] * d[2] / (d[1] + d[3] / alpha);
        let (predicted, predicted_literal) = if degenerate {
            (0.0, 0.0)
        } else {
            (core / (alpha * (alpha - 1.0)), core / alpha)
        };
        let ratio_of = |p: f64| if p == 0.0 && actual == 0.0 { 1.0 } else { actual / p };
        rows.push(RateRow {
            k: j,
            actual,
            predicted,
            predicted_literal,
            ratio: ratio_of(predicted),
            ratio_literal: ratio_of(predicted_literal),
        });
    }
    Ok(RateReport { rows, unstable, degenerate, g_temp_gap })
}

/// Verdict on a [`RateReport`]: ratios within `[0.5, 2]` from `k = 8` on, and
/// the last ratio no farther from 1 than the first such one.
pub fn rate_verdict(rate: &RateReport) -> Report {
    let mut r = Report::new("return improvement rate");
    r.push(Check::flag("finite differences stable (h vs h/2)", !rate.unstable));
    r.push(Check::at_most("max |J(G_j) - J(pi_(alpha=j))|", rate.g_temp_gap, 1e-9));
    let late: Vec<&RateRow> = rate.rows.iter().filter(|row| row.k >= 8).collect();
    if rate.degenerate {
        r.note("single action: both sides vanish identically");
    }
    if let (Some(first), Some(last)) = (late.first(), late.last()) {
        let worst = late.iter().map(|row| (row.ratio.ln()).abs()).fold(0.0, f64::max);
        r.push(Check::at_most("max |ln ratio|, k >= 8", worst, 2f64.ln()));
        r.push(Check::at_most(
            format!("|ratio_{} - 1| - |ratio_{} - 1|", last.k, first.k),
            (last.ratio - 1.0).abs() - (first.ratio - 1.0).abs(),
            0.0,
        ));
    }
    for row in &rate.rows {
        r.note(format!(
            "k = {:>2}: actual {} predicted {} ratio {} (1/k prefactor: ratio {})",
            row.k,
            crate::report::fmt_num(row.actual),
            crate::report::fmt_num(row.predicted),
            crate::report::fmt_num(row.ratio),
            crate::report::fmt_num(row.ratio_literal)
        ));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{mountain_race, temperature_counter};
    use crate::mdp::MdpParts;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn root(p: &Policy) -> [f64; 2] {
        [p.row(0, 0)[0], p.row(0, 0)[1]]
    }

    #[test]
    fn mountain_posterior() {
        let m = mountain_race();
        let post = goal_condition(&m, &Policy::uniform(&m));
        assert!(close(root(&post.policy)[0], 0.4, 1e-15));
        assert!(post.zero_evidence.iter().any(|&(t, s)| t == 1 && s == m.state_index("skull").unwrap()));
    }

    #[test]
    fn counter_values() {
        let m = temperature_counter();
        let u = Policy::uniform(&m);
        let g = g_sequence(&m, &u, 2);
        assert!(close(root(&g[1])[0], 5.0 / 11.0, 1e-15));
        assert!(close(root(&g[2])[0], 25.0 / 61.0, 1e-15));
        let t2 = temperature_policy(&m, &u, 2.0).unwrap();
        assert!(close(root(&t2)[0], 7.0 / 17.0, 1e-15));
        assert!(close(root(&t2)[1], 10.0 / 17.0, 1e-15));
        let f = folded_sequence(&m, &u, 2);
        assert!(close(root(&f[1].policy)[0], 5.0 / 11.0, 1e-15));
        assert!(close(root(&f[2].policy)[1], 36.0 / 61.0, 1e-15));
        assert_eq!(f[0].policy, u);
    }

    #[test]
    fn alpha_one_is_goal_conditioning() {
        let m = temperature_counter();
        let u = Policy::uniform(&m);
        assert_eq!(temperature_policy(&m, &u, 1.0).unwrap(), goal_condition(&m, &u).policy);
        assert!(temperature_policy(&m, &u, 0.0).is_err());
    }

    #[test]
    fn large_alpha_is_nearly_greedy() {
        let m = mountain_race();
        let p = temperature_policy(&m, &Policy::uniform(&m), 64.0).unwrap();
        assert!(1.0 - root(&p)[0] < 1e-3);
    }

    #[test]
    fn zero_reward_leaves_prior() {
        let m = Mdp::from_parts(MdpParts { terminal_reward: vec![0.0; 3], ..temperature_counter().into_parts() }).unwrap();
        let prior = Policy::from_fn(&m, |_, _| vec![0.2, 0.8]).unwrap();
        assert!(goal_condition(&m, &prior).policy.max_abs_diff(&prior) < 1e-15);
    }

    #[test]
    fn cumulative_fold_doubles() {
        let m = mountain_race();
        let u = Policy::uniform(&m);
        let h = cumulative_folded_sequence(&m, &u, 3);
        let t2 = temperature_policy(&m, &u, 2.0).unwrap();
        assert!(policy_tv(&m, &h[1].policy, &t2) <= 1e-10);
        let g = g_sequence(&m, &u, 8);
        assert!(policy_tv(&m, &h[3].policy, &g[8]) <= 1e-10);
        for state in &h {
            assert!(state.rewards.max_entry().unwrap() <= 0.0);
        }
    }

    #[test]
    fn equivalence_reports() {
        let m = mountain_race();
        let u = Policy::uniform(&m);
        assert!(check_equivalence(&m, &u, 3).unwrap().passed());
        let c = temperature_counter();
        let uc = Policy::uniform(&c);
        let r = check_equivalence(&c, &uc, 2).unwrap();
        assert!(r.passed());
        let gap = r.find("TV(F_2, pi_(alpha=2))").unwrap().measured;
        assert!(close(gap, 36.0 / 61.0 - 10.0 / 17.0, 1e-12));
        assert!(gap > 1e-3);
        assert!(!check_strict_temperature(&c, &uc, 2).unwrap().passed());
    }

    #[test]
    fn counter_improves_strictly() {
        let m = temperature_counter();
        let r = improvement_audit(&m, &Policy::uniform(&m), 10);
        assert!(r.passed(), "{r}");
        let seq = g_sequence(&m, &Policy::uniform(&m), 10);
        let j: Vec<f64> = seq.iter().map(|p| expected_return(&m, p)).collect();
        assert!(j.windows(2).all(|w| w[1] > w[0]));
    }

    // a gamble (lose everything half the time) against a sure half: the gamble
    // has slightly higher success probability but much lower J
    #[test]
    fn stochastic_gamble_lowers_j() {
        let (ns, na) = (4, 2);
        let mut transition = vec![0.0; ns * na * ns];
        let mut set = |s: usize, a: usize, s2: usize, p: f64| transition[(s * na + a) * ns + s2] = p;
        set(0, 0, 1, 0.5);
        set(0, 0, 2, 0.5);
        set(0, 1, 3, 1.0);
        for s in 1..ns {
            for a in 0..na {
                set(s, a, s, 1.0);
            }
        }
        let m = Mdp::from_parts(MdpParts {
            states: vec!["start".into(), "hi".into(), "lo".into(), "mid".into()],
            actions: vec!["gamble".into(), "safe".into()],
            horizon: 1,
            transition,
            initial: vec![1.0, 0.0, 0.0, 0.0],
            step_reward: vec![0.0; ns * na],
            terminal_reward: vec![f64::NEG_INFINITY, 0.0, 0.01f64.ln(), 0.5f64.ln()],
        })
        .unwrap();
        let r = improvement_audit(&m, &Policy::uniform(&m), 4);
        let j_drop = r.checks[0].measured;
        assert!(!r.checks[0].passed && j_drop > 1e-3, "{r}");
        assert!(r.checks[1].passed, "{r}");
    }

    #[test]
    fn convergence_needs_support() {
        let m = mountain_race();
        let prior = Policy::from_fn(&m, |t, _| if t == 0 { vec![0.0, 1.0] } else { vec![0.5, 0.5] }).unwrap();
        let r = convergence_probe(&m, &prior, 4, 0.25).unwrap();
        assert!(!r.passed());
        assert!(r.notes.iter().any(|n| n.contains("full-support")));
    }

    #[test]
    fn rate_degenerate_and_unstable() {
        let one = Mdp::from_parts(MdpParts {
            states: vec!["a".into(), "b".into()],
            actions: vec!["go".into()],
            horizon: 1,
            transition: vec![0.0, 1.0, 0.0, 1.0],
            initial: vec![1.0, 0.0],
            step_reward: vec![0.0, 0.0],
            terminal_reward: vec![0.0, 0.5f64.ln()],
        })
        .unwrap();
        let rate = rate_check(&one, &Policy::uniform(&one), 4, 1e-3).unwrap();
        assert!(rate.degenerate);
        assert!(rate.rows.iter().all(|r| r.actual == 0.0 && r.ratio == 1.0));

        let m = mountain_race();
        assert!(rate_check(&m, &Policy::uniform(&m), 8, 1.0).unwrap().unstable);
        assert!(!rate_check(&m, &Policy::uniform(&m), 8, 1e-3).unwrap().unstable);
        assert!(matches!(
            rate_check(&temperature_counter(), &Policy::uniform(&temperature_counter()), 8, 1e-3),
            Err(Error::StochasticDynamics)
        ));
    }
}
