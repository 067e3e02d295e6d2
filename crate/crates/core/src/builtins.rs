//! The three worked examples as ready-made models.
//!
//! Leaves are absorbing so every transition row is a distribution; they are
//! only ever visited at `t = T`.

use crate::error::{Error, Result};
use crate::logspace::ln_prob;
use crate::mdp::{Mdp, MdpParts};

pub const NAMES: [&str; 3] = ["mountain_race", "temperature_counter", "stability_tree"];

pub fn builtin_example(name: &str) -> Result<Mdp> {
    match name {
        "mountain_race" => Ok(mountain_race()),
        "temperature_counter" => Ok(temperature_counter()),
        "stability_tree" => Ok(stability_tree()),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

/// Two-step race: `up` from the root climbs the ridge (gold or a chasm),
/// `down` takes the forest where both trails reach silver.
pub fn mountain_race() -> Mdp {
    let mut b = Builder::new(
        &["root", "mountain", "forest", "gold", "skull", "silver_a", "silver_b"],
        &["up", "down"],
        2,
    );
    b.initial("root", 1.0);
    b.det("root", "up", "mountain");
    b.det("root", "down", "forest");
    b.det("mountain", "up", "gold");
    b.det("mountain", "down", "skull");
    b.det("forest", "up", "silver_a");
    b.det("forest", "down", "silver_b");
    b.terminal("gold", 1.0);
    b.terminal("skull", 0.0);
    b.terminal("silver_a", 0.75);
    b.terminal("silver_b", 0.75);
    b.build()
}

/// One stochastic decision: `a1` lands in `s1` w.p. 3/4, `a2` is a fair coin.
pub fn temperature_counter() -> Mdp {
    let mut b = Builder::new(&["start", "s1", "s2"], &["a1", "a2"], 1);
    b.initial("start", 1.0);
    b.split("start", "a1", &[("s1", 0.75), ("s2", 0.25)]);
    b.split("start", "a2", &[("s1", 0.5), ("s2", 0.5)]);
    b.terminal("s1", 1.0 / 3.0);
    b.terminal("s2", 2.0 / 3.0);
    b.build()
}

/// Three-step tree on which one- and two-step lookahead disagree at the root.
///
/// `up` leads through a forced chain to a leaf with success 1/2. `down`
/// leads to `s2p`, where `up` splits 2/3 to a certain success and 1/3 to a
/// certain failure, and `down` fails outright.
pub fn stability_tree() -> Mdp {
    let mut b = Builder::new(
        &["s0", "s1", "s1p", "s2", "s2p", "s3", "s3p", "s3pp"],
        &["up", "down"],
        3,
    );
    b.initial("s0", 1.0);
    b.det("s0", "up", "s1");
    b.det("s0", "down", "s1p");
    b.det("s1", "up", "s2");
    b.det("s1", "down", "s2");
    b.det("s2", "up", "s3");
    b.det("s2", "down", "s3");
    b.det("s1p", "up", "s2p");
    b.det("s1p", "down", "s2p");
    b.split("s2p", "up", &[("s3p", 2.0 / 3.0), ("s3pp", 1.0 / 3.0)]);
    b.det("s2p", "down", "s3pp");
    b.terminal("s3", 0.5);
    b.terminal("s3p", 1.0);
    b.terminal("s3pp", 0.0);
    b.build()
}

/// Same shape as [`stability_tree`] with the split at `s2p` set to `(p, 1 - p)`.
pub fn stability_tree_with_split(p: f64) -> Mdp {
    let mut parts = stability_tree().into_parts();
    let ns = parts.states.len();
    let na = parts.actions.len();
    let s2p = 4;
    let row = &mut parts.transition[(s2p * na) * ns..(s2p * na + 1) * ns];
    row[6] = p;
    row[7] = 1.0 - p;
    Mdp::from_parts(parts).expect("valid split")
}

struct Builder {
    parts: MdpParts,
}

impl Builder {
    fn new(states: &[&str], actions: &[&str], horizon: usize) -> Self {
        let ns = states.len();
        let na = actions.len();
        // absorbing by default
        let mut transition = vec![0.0; ns * na * ns];
        for s in 0..ns {
            for a in 0..na {
                transition[(s * na + a) * ns + s] = 1.0;
            }
        }
        Builder {
            parts: MdpParts {
                states: states.iter().map(|s| s.to_string()).collect(),
                actions: actions.iter().map(|s| s.to_string()).collect(),
                horizon,
                transition,
                initial: vec![0.0; ns],
                step_reward: vec![0.0; ns * na],
                terminal_reward: vec![0.0; ns],
            },
        }
    }

    fn s(&self, name: &str) -> usize {
        self.parts.states.iter().position(|x| x == name).unwrap()
    }

    fn a(&self, name: &str) -> usize {
        self.parts.actions.iter().position(|x| x == name).unwrap()
    }

    fn initial(&mut self, state: &str, p: f64) {
        let s = self.s(state);
        self.parts.initial[s] = p;
    }

    fn det(&mut self, state: &str, action: &str, to: &str) {
        self.split(state, action, &[(to, 1.0)]);
    }

    fn split(&mut self, state: &str, action: &str, to: &[(&str, f64)]) {
        let (s, a) = (self.s(state), self.a(action));
        let ns = self.parts.states.len();
        let na = self.parts.actions.len();
        let targets: Vec<(usize, f64)> = to.iter().map(|&(n, p)| (self.s(n), p)).collect();
        let row = &mut self.parts.transition[(s * na + a) * ns..(s * na + a + 1) * ns];
        row.iter_mut().for_each(|x| *x = 0.0);
        for (s2, p) in targets {
            row[s2] = p;
        }
    }

    fn terminal(&mut self, state: &str, p: f64) {
        let s = self.s(state);
        self.parts.terminal_reward[s] = ln_prob(p);
    }

    fn build(self) -> Mdp {
        Mdp::from_parts(self.parts).expect("builtin examples are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mountain_race_shape() {
        let m = builtin_example("mountain_race").unwrap();
        assert_eq!((m.n_states(), m.n_actions(), m.horizon()), (7, 2, 2));
        let silver = m.state_index("silver_a").unwrap();
        assert_eq!(m.terminal_reward(silver), 0.75f64.ln());
        assert_eq!(m.terminal_reward(m.state_index("skull").unwrap()), f64::NEG_INFINITY);
        assert_eq!(m.terminal_reward(m.state_index("gold").unwrap()), 0.0);
    }

    #[test]
    fn counter_dynamics() {
        let m = builtin_example("temperature_counter").unwrap();
        let start = m.state_index("start").unwrap();
        assert_eq!(m.transition_row(start, 0), &[0.0, 0.75, 0.25]);
        assert_eq!(m.transition_row(start, 1), &[0.0, 0.5, 0.5]);
        assert_eq!(m.terminal_reward(1), (1.0f64 / 3.0).ln());
    }

    #[test]
    fn stability_tree_split() {
        let m = builtin_example("stability_tree").unwrap();
        let s2p = m.state_index("s2p").unwrap();
        let up = m.action_index("up").unwrap();
        let row = m.transition_row(s2p, up);
        assert_eq!(row[m.state_index("s3p").unwrap()], 2.0 / 3.0);
        assert_eq!(row[m.state_index("s3pp").unwrap()], 1.0 / 3.0);
        assert!(!m.is_deterministic());
        let split = stability_tree_with_split(2.0 / 3.0);
        let gap = split.parts().transition.iter().zip(&m.parts().transition).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-15);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_example("nope"), Err(Error::UnknownBuiltin(_))));
    }
}
