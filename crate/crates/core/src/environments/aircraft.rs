//! Collision avoidance between a controlled aircraft and an adversary.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use super::EnvironmentError;
use crate::model::{Mdp, ModelBuilder};
use crate::spec::{Direction, Specification};

const BUNDLED: &str = include_str!("../../layouts/aircraft.txt");

pub const CLIMB_SUCCESS: f64 = 0.8;
/// Adversary moves up, down or stays.
pub const ADVERSARY: [f64; 3] = [0.3, 0.3, 0.4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AircraftLayout {
    pub altitudes: usize,
    pub steps: usize,
    pub own_start: usize,
    pub adversary_start: usize,
}

impl AircraftLayout {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled aircraft layout is valid")
    }

    /// Parses `key value` lines for `altitudes`, `steps`, `own_start` and
    /// `adversary_start`.
    pub fn parse(text: &str) -> Result<Self, EnvironmentError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| EnvironmentError::Layout {
                line: i + 1,
                message: m,
            };
            let (key, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| err(format!("expected 'key value', got '{line}'")))?;
            if !["altitudes", "steps", "own_start", "adversary_start"].contains(&key) {
                return Err(err(format!("unknown key '{key}'")));
            }
            let value = value
                .trim()
                .parse::<usize>()
                .map_err(|_| err(format!("invalid value for '{key}'")))?;
            values.insert(key, value);
        }
        let get = |k: &str| {
            values.get(k).copied().ok_or_else(|| EnvironmentError::Layout {
                line: 0,
                message: format!("missing key '{k}'"),
            })
        };
        let layout = Self {
            altitudes: get("altitudes")?,
            steps: get("steps")?,
            own_start: get("own_start")?,
            adversary_start: get("adversary_start")?,
        };
        if layout.altitudes == 0
            || layout.steps == 0
            || layout.own_start >= layout.altitudes
            || layout.adversary_start >= layout.altitudes
        {
            return Err(EnvironmentError::Layout {
                line: 0,
                message: "start altitudes must lie on a nonempty ladder and steps must be positive".into(),
            });
        }
        Ok(layout)
    }
}

impl fmt::Display for AircraftLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "altitudes={} steps={} own_start={} adversary_start={}",
            self.altitudes, self.steps, self.own_start, self.adversary_start
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Flying { time: usize, own: usize, adversary: usize },
    Collision,
    Passed,
}

/// Altitude reached by moving `delta` from `alt`, if it stays on the ladder.
fn shift(alt: usize, delta: isize, altitudes: usize) -> Option<usize> {
    alt.checked_add_signed(delta).filter(|&a| a < altitudes)
}

/// The controlled aircraft climbs, descends (each succeeding with 0.8, else
/// keeping altitude) or holds; moves off the ladder are disabled. The
/// adversary climbs, descends or holds with 0.3/0.3/0.4, holding instead of
/// leaving the ladder. After the last step the aircraft pass each other and
/// collide if they share an altitude. The objective is the maximal
/// probability of passing without collision.
pub fn build_aircraft_with(layout: &AircraftLayout) -> (Mdp, Specification) {
    let n_alt = layout.altitudes;
    let start = Node::Flying {
        time: 0,
        own: layout.own_start,
        adversary: layout.adversary_start,
    };
    let mut index = BTreeMap::from([(start, 0)]);
    let mut order = vec![start];
    let mut queue = VecDeque::from([start]);
    let mut edges = Vec::new();
    while let Some(node) = queue.pop_front() {
        let s = index[&node];
        let outgoing: Vec<(usize, Vec<(Node, f64)>)> = match node {
            Node::Collision | Node::Passed => vec![(2, vec![(node, 1.0)])],
            Node::Flying { time, own, adversary } => {
                let mut adv = BTreeMap::new();
                for (delta, p) in [(1isize, ADVERSARY[0]), (-1, ADVERSARY[1]), (0, ADVERSARY[2])] {
                    let alt = shift(adversary, delta, n_alt).unwrap_or(adversary);
                    *adv.entry(alt).or_insert(0.0) += p;
                }
                let mut actions = Vec::new();
                for (a, delta) in [(0usize, 1isize), (1, -1), (2, 0)] {
                    let Some(target) = shift(own, delta, n_alt) else {
                        continue;
                    };
                    let own_outcomes = if delta == 0 {
                        vec![(own, 1.0)]
                    } else {
                        vec![(target, CLIMB_SUCCESS), (own, 1.0 - CLIMB_SUCCESS)]
                    };
                    let mut joint = BTreeMap::new();
                    for &(o, po) in &own_outcomes {
                        for (&b, &pb) in &adv {
                            let next = if time + 1 == layout.steps {
                                if o == b {
                                    Node::Collision
                                } else {
                                    Node::Passed
                                }
                            } else {
                                Node::Flying {
                                    time: time + 1,
                                    own: o,
                                    adversary: b,
                                }
                            };
                            *joint.entry(next).or_insert(0.0) += po * pb;
                        }
                    }
                    actions.push((a, joint.into_iter().collect()));
                }
                actions
            }
        };
        for (a, outcomes) in outgoing {
            for &(t, _) in &outcomes {
                if let std::collections::btree_map::Entry::Vacant(e) = index.entry(t) {
                    e.insert(order.len());
                    order.push(t);
                    queue.push_back(t);
                }
            }
            edges.push((s, a, outcomes));
        }
    }

    for node in [Node::Collision, Node::Passed] {
        if let std::collections::btree_map::Entry::Vacant(e) = index.entry(node) {
            e.insert(order.len());
            edges.push((order.len(), 2, vec![(node, 1.0)]));
            order.push(node);
        }
    }

    let labels = order
        .iter()
        .map(|n| match n {
            Node::Flying { time, own, adversary } => format!("t{time}o{own}a{adversary}"),
            Node::Collision => "collision".into(),
            Node::Passed => "passed".into(),
        })
        .collect();
    let mut b = ModelBuilder::new(order.len(), 0)
        .state_labels(labels)
        .action_labels(["up", "down", "hold"].map(String::from).to_vec());
    for (s, a, outcomes) in edges {
        b.choice(s, a, 0.0, outcomes.into_iter().map(|(t, p)| (index[&t], p)).collect());
    }
    let mdp = b.build().expect("aircraft model is well formed");
    let spec = Specification::reach_avoid([index[&Node::Passed]], [index[&Node::Collision]], Direction::Max);
    (mdp, spec)
}

pub fn build_aircraft() -> (Mdp, Specification) {
    build_aircraft_with(&AircraftLayout::bundled())
}
