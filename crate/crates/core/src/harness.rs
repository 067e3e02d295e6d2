//! Command-line runs: CSV traces, verification reports, golden values.

use std::io::Write;
use std::path::PathBuf;

use crate::builtins::{self, builtin_example};
use crate::coherence::{check_order_respecting, f_soft_policy, iterate_coherence, Selector};
use crate::error::{Error, Result};
use crate::loader::load_mdp_file;
use crate::mdp::Mdp;
use crate::policy::{oracle_trajectory_kl, trajectory_kl, Policy};
use crate::random::{random_suite, RandomConfig};
use crate::report::{fmt_num, Check, CheckKind, Report};
use crate::retraining::{
    check_equivalence, check_strict_temperature, convergence_probe, folded_sequence, g_sequence, goal_condition,
    improvement_audit, iterate_folded, iterate_g, iterate_temperature, rate_check, rate_verdict, temperature_policy,
    IterationTrace,
};
use crate::soft::{check_deterministic_factorization, oracle_check_qv};
use crate::stability::{conflict_report, n_policy_stable};
use crate::trajectory::{enumeration_size, DEFAULT_ENUMERATION_CAP};

/// Header of every trace file.
pub const CSV_HEADER: [&str; 7] = ["k", "operator", "J", "success_prob", "kappa_delta", "tv_step", "tv_to_limit"];

/// Tolerance for golden values and brute-force oracles.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum MdpSource {
    Builtin(String),
    File(PathBuf),
    Random { count: usize },
}

impl MdpSource {
    /// A builtin name, `random`, or a path.
    pub fn parse(text: &str, count: usize) -> Self {
        if builtins::NAMES.contains(&text) {
            MdpSource::Builtin(text.into())
        } else if text == "random" {
            MdpSource::Random { count }
        } else {
            MdpSource::File(text.into())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    G,
    F,
    H,
    Temp,
    Coherence,
}

impl Operator {
    pub fn tag(self) -> &'static str {
        match self {
            Operator::G => "G",
            Operator::F => "F",
            Operator::H => "H",
            Operator::Temp => "temp",
            Operator::Coherence => "coherence",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Pow2,
    Linear,
    Explicit(Vec<f64>),
}

impl Schedule {
    /// `alpha(j)` for `j = 1..=k`.
    pub fn alphas(&self, k: usize) -> Result<Vec<f64>> {
        match self {
            Schedule::Pow2 => Ok((1..=k).map(|j| 2f64.powi(j as i32)).collect()),
            Schedule::Linear => Ok((1..=k).map(|j| j as f64).collect()),
            Schedule::Explicit(list) if list.len() >= k => Ok(list[..k].to_vec()),
            Schedule::Explicit(list) => Err(Error::InvalidArgument(format!(
                "explicit schedule has {} entries, {k} steps requested",
                list.len()
            ))),
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Schedule::Pow2 => "pow2",
            Schedule::Linear => "linear",
            Schedule::Explicit(_) => "explicit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mdp: MdpSource,
    pub operator: Operator,
    /// `None` lets each verifier pick its default.
    pub steps: Option<usize>,
    pub delta: f64,
    pub schedule: Schedule,
    /// Overrides the tolerance of every upper-bound check.
    pub tolerance: Option<f64>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    /// Random suites use deterministic dynamics.
    pub deterministic: bool,
    pub cap: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mdp: MdpSource::Builtin("mountain_race".into()),
            operator: Operator::G,
            steps: None,
            delta: 1.0,
            schedule: Schedule::Pow2,
            tolerance: None,
            output: None,
            seed: 0,
            deterministic: false,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if let Some(t) = self.tolerance {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidArgument(format!("tolerance must be positive, got {t}")));
            }
        }
        if let Schedule::Explicit(list) = &self.schedule {
            if list.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return Err(Error::InvalidArgument("schedule entries must be positive".into()));
            }
        }
        Ok(())
    }
}

pub fn load_single(source: &MdpSource) -> Result<Mdp> {
    match source {
        MdpSource::Builtin(name) => builtin_example(name),
        MdpSource::File(path) => load_mdp_file(path),
        MdpSource::Random { .. } => Err(Error::InvalidArgument("`random` is only available to `verify`".into())),
    }
}

/// Runs one operator for `steps` iterations and renders the trace as CSV.
pub fn iterate_trace(cfg: &RunConfig) -> Result<IterationTrace> {
    cfg.validate()?;
    let m = load_single(&cfg.mdp)?;
    let prior = Policy::uniform(&m);
    let k = cfg.steps.unwrap_or(2);
    let sel = Selector::softmax(cfg.delta)?;
    Ok(match cfg.operator {
        Operator::G => iterate_g(&m, &prior, k, sel),
        Operator::F => iterate_folded(&m, &prior, k, false, sel),
        Operator::H => iterate_folded(&m, &prior, k, true, sel),
        Operator::Temp => {
            // entry 0 is the prior, entry j is pi_{alpha(j)}
            let alphas = cfg.schedule.alphas(k)?;
            let mut trace = iterate_temperature(&m, &prior, &alphas, cfg.schedule.tag(), sel)?;
            let head = IterationTrace::from_policies(&m, "temp", cfg.schedule.tag(), vec![prior], sel);
            let mut entries = head.entries;
            entries.extend(trace.entries.drain(..).map(|mut e| {
                e.k += 1;
                e
            }));
            let limit = crate::soft::limit_policy(&m, &entries.last().unwrap().policy);
            for i in 0..entries.len() {
                entries[i].tv_to_limit = crate::policy::policy_tv(&m, &entries[i].policy, &limit);
                entries[i].tv_step = if i == 0 {
                    0.0
                } else {
                    crate::policy::policy_tv(&m, &entries[i - 1].policy, &entries[i].policy)
                };
            }
            trace.entries = entries;
            trace
        }
        Operator::Coherence => iterate_coherence(&m, &prior, sel, k).trace,
    })
}

pub fn trace_csv(trace: &IterationTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for e in &trace.entries {
        w.write_record([
            e.k.to_string(),
            trace.operator.clone(),
            fmt_num(e.ret),
            fmt_num(e.success),
            fmt_num(e.kappa),
            fmt_num(e.tv_step),
            fmt_num(e.tv_to_limit),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII fields"))
}

/// Writes the CSV trace to `cfg.output`, or returns it for standard output.
pub fn run_iterate(cfg: &RunConfig) -> Result<Option<String>> {
    let csv = trace_csv(&iterate_trace(cfg)?)?;
    match &cfg.output {
        Some(path) => {
            std::fs::File::create(path)?.write_all(csv.as_bytes())?;
            Ok(None)
        }
        None => Ok(Some(csv)),
    }
}

pub const CHECKS: [&str; 11] = [
    "equivalence",
    "equivalence-strict-temp",
    "improvement",
    "qv-oracle",
    "factorization",
    "rate",
    "stability",
    "convergence",
    "kl-oracle",
    "fixpoint",
    "order",
];

fn needs_enumeration(check: &str) -> bool {
    matches!(check, "qv-oracle" | "factorization" | "kl-oracle" | "stability")
}

/// One verifier on one model.
pub fn verify_one(m: &Mdp, prior: &Policy, check: &str, cfg: &RunConfig) -> Result<Report> {
    if needs_enumeration(check) && enumeration_size(m) > cfg.cap as f64 {
        return Err(Error::CapExceeded { size: enumeration_size(m), cap: cfg.cap });
    }
    let mut r = match check {
        "equivalence" => check_equivalence(m, prior, cfg.steps.unwrap_or(3))?,
        "equivalence-strict-temp" => check_strict_temperature(m, prior, cfg.steps.unwrap_or(1))?,
        "improvement" => improvement_audit(m, prior, cfg.steps.unwrap_or(8)),
        "qv-oracle" => {
            let mut r = Report::new("soft values vs suffix enumeration");
            r.push(Check::at_most("max |exp Q - p(O | s, a)|", oracle_check_qv(m, prior)?, ORACLE_TOL));
            r
        }
        "factorization" => {
            let mut r = Report::new("global vs local conditioning");
            r.push(Check::at_most(
                "max |p(xi | O) - p_hat(xi)|",
                check_deterministic_factorization(m, prior)?,
                ORACLE_TOL,
            ));
            r
        }
        "rate" => rate_verdict(&rate_check(m, prior, cfg.steps.unwrap_or(16), 1e-3)?),
        "stability" => conflict_report(m, prior)?,
        "convergence" => {
            let k = cfg.steps.unwrap_or(32);
            convergence_probe(m, prior, k, 1.0 / k as f64)?
        }
        "kl-oracle" => {
            let mut r = Report::new("occupancy KL vs trajectory KL");
            let sel = Selector::softmax(cfg.delta)?;
            let pairs = [
                (prior.clone(), goal_condition(m, prior).policy),
                (goal_condition(m, prior).policy, prior.clone()),
                (prior.clone(), f_soft_policy(m, prior, &sel)),
            ];
            let mut worst: f64 = 0.0;
            for (a, b) in &pairs {
                let (x, y) = (trajectory_kl(m, a, b), oracle_trajectory_kl(m, a, b)?);
                let gap = if x == y { 0.0 } else { (x - y).abs() };
                worst = worst.max(if gap.is_nan() { f64::INFINITY } else { gap });
            }
            r.push(Check::at_most("max |KL_occupancy - KL_trajectory|", worst, ORACLE_TOL));
            r
        }
        "fixpoint" => {
            let t = m.horizon();
            let run = iterate_coherence(m, prior, Selector::softmax(cfg.delta)?, t + 1);
            let mut r = Report::new(format!("iterated coherence fixpoint (T = {t})"));
            let gap = run.trace.entries[t + 1].policy.max_abs_diff(&run.trace.entries[t].policy);
            r.push(Check::at_most("max |pi_(T+1) - pi_T|", gap, crate::coherence::FIXPOINT_TOL));
            r.push(Check::info("first fixpoint step", run.fixpoint_at.map_or(f64::NAN, |i| i as f64)));
            r
        }
        "order" => check_order_respecting(&Selector::softmax(cfg.delta)?, 1000, 4, cfg.seed),
        other => return Err(Error::InvalidArgument(format!("unknown check `{other}`"))),
    };
    if let Some(t) = cfg.tolerance {
        r.override_tolerance(t);
    }
    Ok(r)
}

/// Merges per-model reports: each check keeps its worst measurement.
fn aggregate(title: String, runs: Vec<(u64, Report)>, skipped: Vec<(u64, String)>) -> Report {
    let mut out = Report::new(title);
    let mut failing: Vec<u64> = Vec::new();
    for (seed, r) in &runs {
        if !r.passed() {
            failing.push(*seed);
        }
        for c in &r.checks {
            match out.checks.iter_mut().find(|o| o.name == c.name) {
                None => out.checks.push(c.clone()),
                Some(o) => {
                    let worse = match c.kind {
                        CheckKind::AtLeast => c.measured < o.measured,
                        _ => c.measured > o.measured || c.measured.is_nan(),
                    };
                    if worse {
                        o.measured = c.measured;
                    }
                    o.passed &= c.passed;
                }
            }
        }
    }
    out.note(format!("{} models checked, {} skipped", runs.len(), skipped.len()));
    if !failing.is_empty() {
        out.note(format!("failing seeds: {failing:?}"));
    }
    for (seed, why) in skipped {
        out.note(format!("seed {seed} skipped: {why}"));
    }
    out
}

fn deterministic_only(check: &str) -> bool {
    matches!(check, "factorization" | "rate")
}

/// Runs a named verifier on the configured model or random suite.
pub fn run_verify(cfg: &RunConfig, check: &str) -> Result<Report> {
    cfg.validate()?;
    if !CHECKS.contains(&check) {
        return Err(Error::InvalidArgument(format!("unknown check `{check}`; expected one of {CHECKS:?}")));
    }
    match &cfg.mdp {
        MdpSource::Random { count } => {
            let rc = RandomConfig { deterministic: cfg.deterministic || deterministic_only(check), ..Default::default() };
            let mut runs = Vec::new();
            let mut skipped = Vec::new();
            for (seed, m, prior) in random_suite(&rc, *count, cfg.seed) {
                match verify_one(&m, &prior, check, cfg) {
                    Ok(r) => runs.push((seed, r)),
                    // success impossible under the prior: nothing to condition on
                    Err(Error::InvalidArgument(why)) => skipped.push((seed, why)),
                    Err(Error::HorizonExceeded { .. }) => skipped.push((seed, "horizon too short".into())),
                    Err(e) => return Err(e),
                }
            }
            let kind = if rc.deterministic { "deterministic" } else { "stochastic" };
            Ok(aggregate(format!("{check} on {count} random {kind} models (seed {})", cfg.seed), runs, skipped))
        }
        source => {
            let m = load_single(source)?;
            verify_one(&m, &Policy::uniform(&m), check, cfg)
        }
    }
}

/// A golden value: name, measured, expected.
pub type Golden = (String, f64, f64);

/// Recomputes every reference value, taking models from `provider`.
pub fn golden_values(provider: &dyn Fn(&str) -> Result<Mdp>) -> Result<Vec<Golden>> {
    let mut out = Vec::new();
    let mountain = provider("mountain_race")?;
    let u = Policy::uniform(&mountain);
    let run = iterate_coherence(&mountain, &u, Selector::Softmax { delta: 1.0 }, 2);
    let root = mountain.initial().iter().position(|&p| p > 0.0).unwrap_or(0);
    let r1 = run.trace.entries[1].policy.row(0, root).to_vec();
    let r2 = run.trace.entries[2].policy.row(0, root).to_vec();
    out.push(("mountain_race coherence step 2, root up".into(), r2[0], 4.0 / 7.0));
    out.push(("mountain_race coherence step 2, root down".into(), r2[1], 3.0 / 7.0));
    out.push(("mountain_race coherence step 1, root up".into(), r1[0], 2.0 / 5.0));
    out.push(("mountain_race coherence step 1, root down".into(), r1[1], 3.0 / 5.0));

    let counter = provider("temperature_counter")?;
    let u = Policy::uniform(&counter);
    let start = counter.initial().iter().position(|&p| p > 0.0).unwrap_or(0);
    let f = folded_sequence(&counter, &u, 2);
    let g = g_sequence(&counter, &u, 2);
    let t2 = temperature_policy(&counter, &u, 2.0)?;
    out.push(("temperature_counter F_1, a1".into(), f[1].policy.row(0, start)[0], 5.0 / 11.0));
    out.push(("temperature_counter F_1, a2".into(), f[1].policy.row(0, start)[1], 6.0 / 11.0));
    out.push(("temperature_counter F_2, a1".into(), f[2].policy.row(0, start)[0], 25.0 / 61.0));
    out.push(("temperature_counter F_2, a2".into(), f[2].policy.row(0, start)[1], 36.0 / 61.0));
    out.push(("temperature_counter G_2, a1".into(), g[2].row(0, start)[0], 25.0 / 61.0));
    out.push(("temperature_counter alpha=2, a1".into(), t2.row(0, start)[0], 7.0 / 17.0));
    out.push(("temperature_counter alpha=2, a2".into(), t2.row(0, start)[1], 10.0 / 17.0));
    Ok(out)
}

pub fn run_examples_with(provider: &dyn Fn(&str) -> Result<Mdp>) -> Result<Report> {
    let mut r = Report::new("reference values");
    for (name, measured, expected) in golden_values(provider)? {
        let mut c = Check::at_most(format!("{name} = {}", fmt_num(expected)), (measured - expected).abs(), ORACLE_TOL);
        if measured.is_nan() {
            c.passed = false;
        }
        r.push(c);
    }
    Ok(r)
}

pub fn run_examples() -> Report {
    run_examples_with(&builtin_example).expect("builtins load")
}

/// `n`-policy-stability on one model under a uniform prior, or the
/// one- vs two-step conflict when `n` is `None`.
pub fn run_stability(source: &MdpSource, n: Option<usize>) -> Result<Report> {
    let m = load_single(source)?;
    let prior = Policy::uniform(&m);
    match n {
        None => conflict_report(&m, &prior),
        Some(n) => {
            let s = n_policy_stable(&m, &prior, n)?;
            let mut r = Report::new(format!("{n}-policy-stability"));
            r.push(Check::flag("stable", s.stable));
            r.push(Check::at_most("witness masses vs enumeration", s.oracle_gap, 1e-12));
            r.note(s.describe(&m));
            Ok(r)
        }
    }
}
