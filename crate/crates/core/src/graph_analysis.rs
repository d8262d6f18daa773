//! Qualitative analysis on the support graph: which states reach the target
//! with probability zero or one, and which make an expected reward infinite.
//!
//! Only positivity of transitions matters, so the same result holds for an
//! MDP and for any interval MDP over its graph. Avoid states are treated as
//! absorbing non-target states.

use std::collections::VecDeque;

use crate::model::{Graph, StateId};
use crate::spec::{Direction, Objective, Specification};

#[derive(Debug, Clone, PartialEq)]
pub struct StateClassification {
    /// Value 0: target unreachable (probability specs) or no reward can be
    /// collected before the target (reward specs).
    pub prob0: Vec<bool>,
    /// Value 1 for probability specs; the target itself for reward specs.
    pub prob1: Vec<bool>,
    /// Expected reward is infinite: the target is not reached almost surely.
    pub reward_divergent: Vec<bool>,
    /// For maximal reachability, a choice per `prob1` non-target state that
    /// reaches the target almost surely when followed everywhere.
    pub reach_choice: Vec<Option<usize>>,
    /// For minimal reachability, a choice per `prob0` state that keeps the
    /// run inside `prob0`.
    pub avoid_choice: Vec<Option<usize>>,
}

impl StateClassification {
    /// States whose value is fixed by the graph alone; sampling restarts there.
    pub fn is_decided(&self, s: StateId) -> bool {
        self.prob0[s] || self.prob1[s] || self.reward_divergent[s]
    }

    pub fn prob0_states(&self) -> Vec<StateId> {
        members(&self.prob0)
    }

    pub fn prob1_states(&self) -> Vec<StateId> {
        members(&self.prob1)
    }

    pub fn divergent_states(&self) -> Vec<StateId> {
        members(&self.reward_divergent)
    }
}

pub fn members(set: &[bool]) -> Vec<StateId> {
    set.iter().enumerate().filter_map(|(s, &m)| m.then_some(s)).collect()
}

pub fn classify_states(graph: &Graph, spec: &Specification) -> StateClassification {
    let n = graph.num_states();
    let analysis = Analysis::new(graph, spec);
    let target = &analysis.target;
    let none = vec![false; n];
    let mut out = StateClassification {
        prob0: none.clone(),
        prob1: none.clone(),
        reward_divergent: none,
        reach_choice: vec![None; n],
        avoid_choice: vec![None; n],
    };

    match (spec.kind, spec.direction) {
        (Objective::ExpectedReward, direction) => {
            let proper = match direction {
                Direction::Min => analysis.prob1_exists().0,
                Direction::Max => analysis.prob1_all(),
            };
            out.reward_divergent = proper.iter().map(|&p| !p).collect();
            let positive = analysis.positive_reward_reach();
            for s in 0..n {
                out.prob1[s] = target[s];
                out.prob0[s] = !target[s] && !positive[s] && proper[s];
            }
        }
        (_, Direction::Max) => {
            let reach = analysis.exists_reach(target, &analysis.avoid);
            let (prob1, strategy) = analysis.prob1_exists();
            for s in 0..n {
                out.prob0[s] = !reach[s];
                out.prob1[s] = prob1[s];
            }
            out.reach_choice = strategy;
        }
        (_, Direction::Min) => {
            let (zero, strategy) = analysis.prob0_exists();
            out.prob1 = analysis.prob1_all_given(&zero);
            out.prob0 = zero;
            out.avoid_choice = strategy;
        }
    }
    out
}

struct Analysis<'a> {
    graph: &'a Graph,
    target: Vec<bool>,
    avoid: Vec<bool>,
    /// For each state, the choices with a transition into it.
    pred: Vec<Vec<usize>>,
}

impl<'a> Analysis<'a> {
    fn new(graph: &'a Graph, spec: &Specification) -> Self {
        let n = graph.num_states();
        let mut target = vec![false; n];
        let mut avoid = vec![false; n];
        for &s in &spec.targets {
            target[s] = true;
        }
        for &s in &spec.avoid {
            avoid[s] = true;
        }
        let mut pred = vec![Vec::new(); n];
        for c in 0..graph.num_choices() {
            for &succ in graph.successors(c) {
                pred[succ].push(c);
            }
        }
        Self {
            graph,
            target,
            avoid,
            pred,
        }
    }

    /// Target and avoid states never move.
    fn frozen(&self, s: StateId) -> bool {
        self.target[s] || self.avoid[s]
    }

    /// States with a path to `goal` that does not pass through `blocked`.
    fn exists_reach(&self, goal: &[bool], blocked: &[bool]) -> Vec<bool> {
        let mut reached = goal.to_vec();
        let mut queue: VecDeque<_> = members(goal).into();
        while let Some(v) = queue.pop_front() {
            for &c in &self.pred[v] {
                let p = self.graph.choice_state(c);
                if !reached[p] && !blocked[p] {
                    reached[p] = true;
                    queue.push_back(p);
                }
            }
        }
        reached
    }

    /// Some policy reaches the target almost surely; returns the set and an
    /// attractor strategy for its non-target members.
    fn prob1_exists(&self) -> (Vec<bool>, Vec<Option<usize>>) {
        let n = self.graph.num_states();
        let mut candidates = self.exists_reach(&self.target, &self.avoid);
        loop {
            let mut reached = self.target.clone();
            let mut strategy = vec![None; n];
            let mut queue: VecDeque<_> = members(&self.target).into();
            while let Some(v) = queue.pop_front() {
                for &c in &self.pred[v] {
                    let p = self.graph.choice_state(c);
                    if reached[p] || !candidates[p] || self.frozen(p) {
                        continue;
                    }
                    if self.graph.successors(c).iter().all(|&t| candidates[t]) {
                        reached[p] = true;
                        strategy[p] = Some(c);
                        queue.push_back(p);
                    }
                }
            }
            if reached == candidates {
                return (reached, strategy);
            }
            candidates = reached;
        }
    }

    /// Some policy avoids the target forever; returns the set and a choice per
    /// member that stays inside it.
    fn prob0_exists(&self) -> (Vec<bool>, Vec<Option<usize>>) {
        let g = self.graph;
        let n = g.num_states();
        let mut inside: Vec<bool> = self.target.iter().map(|&t| !t).collect();
        let mut outside_succ: Vec<usize> = (0..g.num_choices())
            .map(|c| g.successors(c).iter().filter(|&&t| !inside[t]).count())
            .collect();
        let mut staying: Vec<usize> = (0..n)
            .map(|s| g.choices(s).filter(|&c| outside_succ[c] == 0).count())
            .collect();
        let mut queue: VecDeque<StateId> = (0..n)
            .filter(|&s| inside[s] && !self.avoid[s] && staying[s] == 0)
            .collect();
        for &s in &queue {
            inside[s] = false;
        }
        while let Some(v) = queue.pop_front() {
            for &c in &self.pred[v] {
                outside_succ[c] += 1;
                if outside_succ[c] == 1 {
                    let p = g.choice_state(c);
                    staying[p] -= 1;
                    if staying[p] == 0 && inside[p] && !self.avoid[p] {
                        inside[p] = false;
                        queue.push_back(p);
                    }
                }
            }
        }
        let strategy = (0..n)
            .map(|s| {
                if inside[s] {
                    g.choices(s).find(|&c| outside_succ[c] == 0)
                } else {
                    None
                }
            })
            .collect();
        (inside, strategy)
    }

    /// Every policy reaches the target almost surely, given the set of states
    /// from which some policy avoids it forever.
    fn prob1_all_given(&self, zero: &[bool]) -> Vec<bool> {
        self.exists_reach(zero, &self.target).into_iter().map(|r| !r).collect()
    }

    fn prob1_all(&self) -> Vec<bool> {
        self.prob1_all_given(&self.prob0_exists().0)
    }

    /// States that can collect a positive reward before reaching the target.
    fn positive_reward_reach(&self) -> Vec<bool> {
        let g = self.graph;
        let seed: Vec<bool> = (0..g.num_states())
            .map(|s| !self.target[s] && g.choices(s).any(|c| g.reward(c) > 0.0))
            .collect();
        self.exists_reach(&seed, &self.target)
    }
}
