//! JSON model files.
//!
//! ```json
//! {
//!   "states": ["start", "s1", "s2"],
//!   "actions": ["a1", "a2"],
//!   "horizon": 1,
//!   "initial": {"start": 1},
//!   "transitions": {
//!     "start/a1": {"s1": "3/4", "s2": "1/4"},
//!     "start/a2": {"s1": 0.5, "s2": 0.5},
//!     "s1/a1": {"s1": 1}, "s1/a2": {"s1": 1},
//!     "s2/a1": {"s2": 1}, "s2/a2": {"s2": 1}
//!   },
//!   "terminal_success": {"s1": "1/3", "s2": "2/3"}
//! }
//! ```
//!
//! Every `state/action` pair needs a transition entry. `step_success` and
//! `terminal_success` default to 1 for omitted keys. Probabilities are JSON
//! numbers, decimal strings, or exact fractions `"a/b"`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::ln_prob;
use crate::mdp::{Mdp, MdpParts};

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MdpDocument {
    states: Vec<String>,
    actions: Vec<String>,
    horizon: usize,
    initial: BTreeMap<String, ProbValue>,
    transitions: BTreeMap<String, BTreeMap<String, ProbValue>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    step_success: BTreeMap<String, ProbValue>,
    #[serde(default)]
    terminal_success: BTreeMap<String, ProbValue>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum ProbValue {
    Number(f64),
    Text(String),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

impl ProbValue {
    fn value(&self, path: &str) -> Result<f64> {
        match self {
            ProbValue::Number(x) => Ok(*x),
            ProbValue::Text(t) => parse_probability(t)
                .ok_or_else(|| schema(path, format!("cannot parse probability `{t}`"))),
        }
    }
}

/// Parses `"0.25"` or `"1/4"`.
pub fn parse_probability(text: &str) -> Option<f64> {
    let text = text.trim();
    match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().ok()?;
            let den: f64 = den.trim().parse().ok()?;
            (den != 0.0).then(|| num / den)
        }
        None => text.parse().ok(),
    }
}

/// Parses and validates a model document.
pub fn load_mdp(document: &str) -> Result<Mdp> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: MdpDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    build(doc)
}

pub fn load_mdp_file(path: impl AsRef<Path>) -> Result<Mdp> {
    load_mdp(&std::fs::read_to_string(path)?)
}

fn build(doc: MdpDocument) -> Result<Mdp> {
    let ns = doc.states.len();
    let na = doc.actions.len();
    if ns == 0 {
        return Err(schema("states", "at least one state required"));
    }
    if na == 0 {
        return Err(schema("actions", "at least one action required"));
    }
    for (field, names) in [("states", &doc.states), ("actions", &doc.actions)] {
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(schema(format!("{field}[{i}]"), format!("duplicate name `{n}`")));
            }
            if n.contains('/') {
                return Err(schema(format!("{field}[{i}]"), "names may not contain `/`"));
            }
        }
    }
    if doc.horizon == 0 {
        return Err(schema("horizon", "horizon must be >= 1"));
    }
    let state = |path: &str, name: &str| {
        doc.states
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| schema(path, format!("unknown state `{name}`")))
    };
    let pair = |path: &str, key: &str| -> Result<(usize, usize)> {
        let (s, a) = key
            .split_once('/')
            .ok_or_else(|| schema(path, format!("expected `state/action`, got `{key}`")))?;
        let s = state(path, s)?;
        let a = doc
            .actions
            .iter()
            .position(|x| x == a)
            .ok_or_else(|| schema(path, format!("unknown action `{a}`")))?;
        Ok((s, a))
    };

    let mut initial = vec![0.0; ns];
    for (name, p) in &doc.initial {
        let path = format!("initial.{name}");
        initial[state(&path, name)?] = p.value(&path)?;
    }

    let mut transition = vec![0.0; ns * na * ns];
    let mut seen = vec![false; ns * na];
    for (key, row) in &doc.transitions {
        let path = format!("transitions.{key}");
        let (s, a) = pair(&path, key)?;
        seen[s * na + a] = true;
        for (to, p) in row {
            let path = format!("{path}.{to}");
            transition[(s * na + a) * ns + state(&path, to)?] = p.value(&path)?;
        }
    }
    if let Some(i) = seen.iter().position(|&x| !x) {
        let key = format!("{}/{}", doc.states[i / na], doc.actions[i % na]);
        return Err(schema(format!("transitions.{key}"), "missing transition row"));
    }

    let success_to_reward = |path: &str, p: f64| -> Result<f64> {
        if p.is_nan() || p < 0.0 {
            return Err(schema(path, format!("success probability {p} is negative")));
        }
        if p > 1.0 {
            return Err(Error::PositiveReward { entry: path.to_string(), value: p.ln() });
        }
        Ok(ln_prob(p))
    };
    let mut step_reward = vec![0.0; ns * na];
    for (key, p) in &doc.step_success {
        let path = format!("step_success.{key}");
        let (s, a) = pair(&path, key)?;
        step_reward[s * na + a] = success_to_reward(&path, p.value(&path)?)?;
    }
    let mut terminal_reward = vec![0.0; ns];
    for (name, p) in &doc.terminal_success {
        let path = format!("terminal_success.{name}");
        terminal_reward[state(&path, name)?] = success_to_reward(&path, p.value(&path)?)?;
    }

    Mdp::from_parts(MdpParts {
        states: doc.states,
        actions: doc.actions,
        horizon: doc.horizon,
        transition,
        initial,
        step_reward,
        terminal_reward,
    })
}

/// Serialises a model in the same schema, with decimal probabilities.
pub fn to_json(m: &Mdp) -> String {
    let p = m.parts();
    let ns = m.n_states();
    let mut transitions = BTreeMap::new();
    let mut step_success = BTreeMap::new();
    for s in 0..ns {
        for a in 0..m.n_actions() {
            let key = format!("{}/{}", p.states[s], p.actions[a]);
            let row = m
                .successors(s, a)
                .map(|(s2, q)| (p.states[s2].clone(), ProbValue::Number(q)))
                .collect();
            transitions.insert(key.clone(), row);
            if m.step_reward(s, a) != 0.0 {
                step_success.insert(key, ProbValue::Number(m.step_reward(s, a).exp()));
            }
        }
    }
    let doc = MdpDocument {
        states: p.states.clone(),
        actions: p.actions.clone(),
        horizon: p.horizon,
        initial: (0..ns)
            .filter(|&s| p.initial[s] > 0.0)
            .map(|s| (p.states[s].clone(), ProbValue::Number(p.initial[s])))
            .collect(),
        transitions,
        step_success,
        terminal_success: (0..ns)
            .map(|s| (p.states[s].clone(), ProbValue::Number(m.terminal_reward(s).exp())))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("document serialises")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    const MOUNTAIN: &str = r#"{
        "states": ["root", "mountain", "forest", "gold", "skull", "silver_a", "silver_b"],
        "actions": ["up", "down"],
        "horizon": 2,
        "initial": {"root": 1},
        "transitions": {
            "root/up": {"mountain": 1}, "root/down": {"forest": 1},
            "mountain/up": {"gold": 1}, "mountain/down": {"skull": 1},
            "forest/up": {"silver_a": 1}, "forest/down": {"silver_b": 1},
            "gold/up": {"gold": 1}, "gold/down": {"gold": 1},
            "skull/up": {"skull": 1}, "skull/down": {"skull": 1},
            "silver_a/up": {"silver_a": 1}, "silver_a/down": {"silver_a": 1},
            "silver_b/up": {"silver_b": 1}, "silver_b/down": {"silver_b": 1}
        },
        "terminal_success": {"gold": 1, "skull": 0, "silver_a": "3/4", "silver_b": "0.75"}
    }"#;

    #[test]
    fn mountain_file_matches_builtin() {
        let m = load_mdp(MOUNTAIN).unwrap();
        assert_eq!((m.n_states(), m.n_actions(), m.horizon()), (7, 2, 2));
        assert_eq!(m, builtins::mountain_race());
    }

    #[test]
    fn zero_terminal_probability_is_neg_inf() {
        let m = load_mdp(MOUNTAIN).unwrap();
        assert_eq!(m.terminal_reward(m.state_index("skull").unwrap()), f64::NEG_INFINITY);
    }

    #[test]
    fn short_row_names_the_row() {
        let doc = MOUNTAIN.replace(r#""root/up": {"mountain": 1}"#, r#""root/up": {"mountain": 0.9}"#);
        match load_mdp(&doc).unwrap_err() {
            Error::Stochasticity { row, sum } => {
                assert_eq!(row, "root/up");
                assert!((sum - 0.9).abs() < 1e-15);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn schema_errors_name_their_path() {
        let doc = MOUNTAIN.replace(r#""horizon": 2"#, r#""horizon": "two""#);
        assert!(matches!(load_mdp(&doc).unwrap_err(), Error::Schema { path, .. } if path == "horizon"));

        let doc = MOUNTAIN.replace(r#""gold/up": {"gold": 1}, "#, "");
        assert!(matches!(load_mdp(&doc).unwrap_err(),
            Error::Schema { path, .. } if path == "transitions.gold/up"));

        let doc = MOUNTAIN.replace(r#""root/up": {"mountain": 1}"#, r#""root/up": {"summit": 1}"#);
        assert!(matches!(load_mdp(&doc).unwrap_err(),
            Error::Schema { path, .. } if path == "transitions.root/up.summit"));
    }

    #[test]
    fn success_above_one_is_a_positive_reward() {
        let doc = MOUNTAIN.replace(r#""gold": 1,"#, r#""gold": 1.5,"#);
        assert!(matches!(load_mdp(&doc).unwrap_err(),
            Error::PositiveReward { entry, .. } if entry == "terminal_success.gold"));
    }

    #[test]
    fn fractions() {
        assert_eq!(parse_probability("3/4"), Some(0.75));
        assert_eq!(parse_probability(" 1 / 3 "), Some(1.0 / 3.0));
        assert_eq!(parse_probability("0.5"), Some(0.5));
        assert_eq!(parse_probability("1/0"), None);
        assert_eq!(parse_probability("half"), None);
    }

    #[test]
    fn serialised_builtins_reload() {
        for name in builtins::NAMES {
            let m = builtins::builtin_example(name).unwrap();
            let back = load_mdp(&to_json(&m)).unwrap();
            assert_eq!(back.horizon(), m.horizon());
            assert_eq!(back.parts().transition, m.parts().transition);
        }
    }
}
