//! Explicit finite models.
//!
//! An MDP and an interval MDP over the same state space share one [`Graph`]:
//! states, enabled actions, supported successors and the (known) rewards. The
//! per-transition payload differs: a probability for an [`Mdp`], an
//! [`Interval`] for an [`UncertainMdp`]. Every layout is compressed sparse rows
//! indexed by dense integers, so a transition index identifies the same
//! `(state, action, successor)` triple across all models built on one graph.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use thiserror::Error;

use crate::learning::Strength;

pub type StateId = usize;
pub type ActionId = usize;

/// Tolerance on probability sums used by validation and parsing.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state {0} out of range")]
    StateOutOfRange(StateId),
    #[error("duplicate action {action} at state {state}")]
    DuplicateChoice { state: StateId, action: ActionId },
    #[error("duplicate successor {successor} for action {action} at state {state}")]
    DuplicateSuccessor {
        state: StateId,
        action: ActionId,
        successor: StateId,
    },
    #[error("policy has no entry for state {0}")]
    PolicyIncomplete(StateId),
    #[error("policy chooses action {action} which is not enabled at state {state}")]
    DisabledAction { state: StateId, action: ActionId },
    #[error("policy weights at state {state} sum to {sum}")]
    PolicyWeights { state: StateId, sum: f64 },
    #[error("prior epsilon must lie in (0, 0.5), got {0}")]
    InvalidEpsilon(f64),
    #[error("prior strength must satisfy 1 <= lo <= hi, got [{0}, {1}]")]
    InvalidStrength(u64, u64),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("models do not share the same graph")]
    GraphMismatch,
}

/// A closed probability interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn point(p: f64) -> Self {
        Self { lower: p, upper: p }
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// States, enabled actions, supported successors and rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    initial: StateId,
    state_choices: Vec<usize>,
    choice_state: Vec<StateId>,
    choice_action: Vec<ActionId>,
    choice_reward: Vec<f64>,
    choice_transitions: Vec<usize>,
    successors: Vec<StateId>,
    num_actions: usize,
    state_labels: Option<Vec<String>>,
    action_labels: Option<Vec<String>>,
}

impl Graph {
    pub fn num_states(&self) -> usize {
        self.state_choices.len() - 1
    }

    pub fn initial_state(&self) -> StateId {
        self.initial
    }

    pub fn num_choices(&self) -> usize {
        self.choice_state.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.successors.len()
    }

    /// Size of the action index space (one past the largest action id used).
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Choice indices enabled at `state`, ordered by ascending action id.
    pub fn choices(&self, state: StateId) -> Range<usize> {
        self.state_choices[state]..self.state_choices[state + 1]
    }

    pub fn choice_state(&self, choice: usize) -> StateId {
        self.choice_state[choice]
    }

    pub fn choice_action(&self, choice: usize) -> ActionId {
        self.choice_action[choice]
    }

    pub fn reward(&self, choice: usize) -> f64 {
        self.choice_reward[choice]
    }

    /// Transition indices of `choice`, ordered by ascending successor.
    pub fn transitions(&self, choice: usize) -> Range<usize> {
        self.choice_transitions[choice]..self.choice_transitions[choice + 1]
    }

    pub fn successor(&self, transition: usize) -> StateId {
        self.successors[transition]
    }

    pub fn successors(&self, choice: usize) -> &[StateId] {
        &self.successors[self.transitions(choice)]
    }

    /// A choice with a single supported successor, i.e. probability one.
    pub fn is_deterministic(&self, choice: usize) -> bool {
        self.transitions(choice).len() == 1
    }

    pub fn find_choice(&self, state: StateId, action: ActionId) -> Option<usize> {
        self.choices(state).find(|&c| self.choice_action[c] == action)
    }

    pub fn enabled_actions(&self, state: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.choices(state).map(move |c| self.choice_action[c])
    }

    /// Owning choice of every transition.
    pub fn transition_choices(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_transitions()];
        for c in 0..self.num_choices() {
            for t in self.transitions(c) {
                out[t] = c;
            }
        }
        out
    }

    pub fn state_label(&self, state: StateId) -> String {
        match &self.state_labels {
            Some(labels) => labels[state].clone(),
            None => state.to_string(),
        }
    }

    pub fn action_label(&self, action: ActionId) -> String {
        match &self.action_labels {
            Some(labels) if action < labels.len() => labels[action].clone(),
            _ => action.to_string(),
        }
    }

    pub fn has_state_labels(&self) -> bool {
        self.state_labels.is_some()
    }

    pub fn state_index(&self, label: &str) -> Option<StateId> {
        match &self.state_labels {
            Some(labels) => labels.iter().position(|l| l == label),
            None => label.parse().ok().filter(|&s: &usize| s < self.num_states()),
        }
    }

    pub fn action_index(&self, label: &str) -> Option<ActionId> {
        match &self.action_labels {
            Some(labels) => labels.iter().position(|l| l == label),
            None => label.parse().ok().filter(|&a: &usize| a < self.num_actions),
        }
    }

    fn location(&self, choice: usize) -> String {
        format!(
            "({},{})",
            self.state_label(self.choice_state[choice]),
            self.action_label(self.choice_action[choice])
        )
    }
}

/// A model whose transitions carry a payload of type `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    graph: Arc<Graph>,
    values: Vec<T>,
}

pub type Mdp = Model<f64>;
pub type UncertainMdp = Model<Interval>;

impl<T> Model<T> {
    /// Attach per-transition values to an existing graph.
    ///
    /// Panics if `values` does not have one entry per transition.
    pub fn from_parts(graph: Arc<Graph>, values: Vec<T>) -> Self {
        assert_eq!(graph.num_transitions(), values.len(), "one value per transition");
        Self { graph, values }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<Graph> {
        Arc::clone(&self.graph)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, transition: usize) -> &T {
        &self.values[transition]
    }

    pub fn with_values<U>(&self, values: Vec<U>) -> Model<U> {
        Model::from_parts(self.shared_graph(), values)
    }

    pub fn num_states(&self) -> usize {
        self.graph.num_states()
    }

    pub fn initial_state(&self) -> StateId {
        self.graph.initial_state()
    }

    /// `(successor, value)` pairs of a choice.
    pub fn outcomes(&self, choice: usize) -> impl Iterator<Item = (StateId, &T)> + '_ {
        self.graph
            .transitions(choice)
            .map(move |t| (self.graph.successor(t), &self.values[t]))
    }

    pub fn same_graph<U>(&self, other: &Model<U>) -> bool {
        Arc::ptr_eq(&self.graph, &other.graph) || *self.graph == *other.graph
    }
}

/// Collects choices in any order and lays them out canonically.
#[derive(Debug, Clone)]
pub struct ModelBuilder<T> {
    num_states: usize,
    initial: StateId,
    choices: Vec<PendingChoice<T>>,
    state_labels: Option<Vec<String>>,
    action_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
struct PendingChoice<T> {
    state: StateId,
    action: ActionId,
    reward: f64,
    outcomes: Vec<(StateId, T)>,
}

impl<T> ModelBuilder<T> {
    pub fn new(num_states: usize, initial: StateId) -> Self {
        Self {
            num_states,
            initial,
            choices: Vec::new(),
            state_labels: None,
            action_labels: None,
        }
    }

    pub fn state_labels(mut self, labels: Vec<String>) -> Self {
        self.state_labels = Some(labels);
        self
    }

    pub fn action_labels(mut self, labels: Vec<String>) -> Self {
        self.action_labels = Some(labels);
        self
    }

    pub fn choice(&mut self, state: StateId, action: ActionId, reward: f64, outcomes: Vec<(StateId, T)>) -> &mut Self {
        self.choices.push(PendingChoice {
            state,
            action,
            reward,
            outcomes,
        });
        self
    }

    pub fn build(self) -> Result<Model<T>, ModelError> {
        let n = self.num_states;
        if self.initial >= n {
            return Err(ModelError::StateOutOfRange(self.initial));
        }
        if let Some(labels) = &self.state_labels {
            if labels.len() != n {
                return Err(ModelError::Invalid(format!(
                    "{} state labels for {} states",
                    labels.len(),
                    n
                )));
            }
        }
        let mut choices = self.choices;
        for c in &choices {
            if c.state >= n {
                return Err(ModelError::StateOutOfRange(c.state));
            }
            if let Some(&(s, _)) = c.outcomes.iter().find(|(s, _)| *s >= n) {
                return Err(ModelError::StateOutOfRange(s));
            }
        }
        choices.sort_by_key(|c| (c.state, c.action));
        for w in choices.windows(2) {
            if w[0].state == w[1].state && w[0].action == w[1].action {
                return Err(ModelError::DuplicateChoice {
                    state: w[0].state,
                    action: w[0].action,
                });
            }
        }

        let num_actions = choices
            .iter()
            .map(|c| c.action + 1)
            .max()
            .unwrap_or(0)
            .max(self.action_labels.as_ref().map_or(0, Vec::len));
        let mut state_choices = vec![0; n + 1];
        let mut choice_state = Vec::with_capacity(choices.len());
        let mut choice_action = Vec::with_capacity(choices.len());
        let mut choice_reward = Vec::with_capacity(choices.len());
        let mut choice_transitions = Vec::with_capacity(choices.len() + 1);
        let mut successors = Vec::new();
        let mut values = Vec::new();
        choice_transitions.push(0);
        for mut c in choices {
            state_choices[c.state + 1] += 1;
            c.outcomes.sort_by_key(|(s, _)| *s);
            for w in c.outcomes.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(ModelError::DuplicateSuccessor {
                        state: c.state,
                        action: c.action,
                        successor: w[0].0,
                    });
                }
            }
            choice_state.push(c.state);
            choice_action.push(c.action);
            choice_reward.push(c.reward);
            for (s, v) in c.outcomes {
                successors.push(s);
                values.push(v);
            }
            choice_transitions.push(successors.len());
        }
        for s in 0..n {
            state_choices[s + 1] += state_choices[s];
        }

        let graph = Graph {
            initial: self.initial,
            state_choices,
            choice_state,
            choice_action,
            choice_reward,
            choice_transitions,
            successors,
            num_actions,
            state_labels: self.state_labels,
            action_labels: self.action_labels,
        };
        Ok(Model::from_parts(Arc::new(graph), values))
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NoEnabledAction,
    NoSuccessor,
    NegativeReward,
    ProbabilityOutOfRange,
    ProbabilitySum,
    ZeroLowerBound,
    InvalidInterval,
    LowerSumAboveOne,
    UpperSumBelowOne,
}

/// One broken invariant, located by state and (where relevant) action.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub state: StateId,
    pub action: Option<ActionId>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn into_result(self) -> Result<(), ModelError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(ModelError::Invalid(self.to_string()))
        }
    }

    fn push(&mut self, graph: &Graph, kind: ViolationKind, choice: Option<usize>, message: String) {
        let (state, action) = match choice {
            Some(c) => (graph.choice_state(c), Some(graph.choice_action(c))),
            None => (0, None),
        };
        self.violations.push(Violation {
            kind,
            state,
            action,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let msgs: Vec<_> = self.violations.iter().map(|v| v.message.as_str()).collect();
        f.write_str(&msgs.join("; "))
    }
}

fn validate_structure(graph: &Graph, report: &mut ValidationReport) {
    for s in 0..graph.num_states() {
        if graph.choices(s).is_empty() {
            report.violations.push(Violation {
                kind: ViolationKind::NoEnabledAction,
                state: s,
                action: None,
                message: format!("no enabled action at {}", graph.state_label(s)),
            });
        }
    }
    for c in 0..graph.num_choices() {
        if graph.transitions(c).is_empty() {
            report.push(
                graph,
                ViolationKind::NoSuccessor,
                Some(c),
                format!("no successor at {}", graph.location(c)),
            );
        }
        let r = graph.reward(c);
        if !(r >= 0.0) {
            report.push(
                graph,
                ViolationKind::NegativeReward,
                Some(c),
                format!("reward {r} < 0 at {}", graph.location(c)),
            );
        }
    }
}

pub fn validate_mdp(mdp: &Mdp) -> ValidationReport {
    let graph = mdp.graph();
    let mut report = ValidationReport::default();
    validate_structure(graph, &mut report);
    for c in 0..graph.num_choices() {
        let mut sum = 0.0;
        for t in graph.transitions(c) {
            let p = mdp.values[t];
            sum += p;
            if !(p > 0.0 && p <= 1.0) {
                report.push(
                    graph,
                    ViolationKind::ProbabilityOutOfRange,
                    Some(c),
                    format!(
                        "probability {p} to {} outside (0,1] at {}",
                        graph.state_label(graph.successor(t)),
                        graph.location(c)
                    ),
                );
            }
        }
        if !graph.transitions(c).is_empty() && (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            report.push(
                graph,
                ViolationKind::ProbabilitySum,
                Some(c),
                format!("sum {sum} ≠ 1 at {}", graph.location(c)),
            );
        }
    }
    report
}

pub fn validate_umdp(umdp: &UncertainMdp) -> ValidationReport {
    let graph = umdp.graph();
    let mut report = ValidationReport::default();
    validate_structure(graph, &mut report);
    for c in 0..graph.num_choices() {
        let (mut lo, mut hi) = (0.0, 0.0);
        for t in graph.transitions(c) {
            let iv = umdp.values[t];
            lo += iv.lower;
            hi += iv.upper;
            let succ = graph.state_label(graph.successor(t));
            if !(iv.lower > 0.0) {
                report.push(
                    graph,
                    ViolationKind::ZeroLowerBound,
                    Some(c),
                    format!("zero lower bound to {succ} at {}", graph.location(c)),
                );
            } else if !(iv.lower <= iv.upper && iv.upper <= 1.0) {
                report.push(
                    graph,
                    ViolationKind::InvalidInterval,
                    Some(c),
                    format!(
                        "interval [{}, {}] to {succ} invalid at {}",
                        iv.lower,
                        iv.upper,
                        graph.location(c)
                    ),
                );
            }
        }
        if graph.transitions(c).is_empty() {
            continue;
        }
        if lo > 1.0 + PROBABILITY_TOLERANCE {
            report.push(
                graph,
                ViolationKind::LowerSumAboveOne,
                Some(c),
                format!("lower sum {lo} > 1 at {}", graph.location(c)),
            );
        }
        if hi < 1.0 - PROBABILITY_TOLERANCE {
            report.push(
                graph,
                ViolationKind::UpperSumBelowOne,
                Some(c),
                format!("upper sum {hi} < 1 at {}", graph.location(c)),
            );
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Policies

/// A memoryless policy, indexed by state.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic(Vec<ActionId>),
    /// Weighted actions per state; weights sum to one.
    Randomized(Vec<Vec<(ActionId, f64)>>),
}

impl Policy {
    pub fn num_states(&self) -> usize {
        match self {
            Policy::Deterministic(a) => a.len(),
            Policy::Randomized(w) => w.len(),
        }
    }

    /// Weighted actions at `state`; a single unit weight for deterministic policies.
    pub fn distribution(&self, state: StateId) -> Vec<(ActionId, f64)> {
        match self {
            Policy::Deterministic(a) => vec![(a[state], 1.0)],
            Policy::Randomized(w) => w[state].clone(),
        }
    }

    pub fn deterministic_action(&self, state: StateId) -> Option<ActionId> {
        match self {
            Policy::Deterministic(a) => Some(a[state]),
            Policy::Randomized(_) => None,
        }
    }

    /// Checks that every state is covered with enabled actions and weights sum to one.
    pub fn check(&self, graph: &Graph) -> Result<(), ModelError> {
        if self.num_states() < graph.num_states() {
            return Err(ModelError::PolicyIncomplete(self.num_states()));
        }
        for s in 0..graph.num_states() {
            let dist = self.distribution(s);
            let mut sum = 0.0;
            for &(a, w) in &dist {
                if graph.find_choice(s, a).is_none() {
                    return Err(ModelError::DisabledAction { state: s, action: a });
                }
                sum += w;
            }
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE || dist.iter().any(|&(_, w)| w < 0.0) {
                return Err(ModelError::PolicyWeights { state: s, sum });
            }
        }
        Ok(())
    }
}

/// The Markov chain obtained by resolving every choice of `mdp` with `policy`.
///
/// Every state keeps a single choice (action id 0) whose reward and successor
/// distribution are the policy-weighted mixtures.
pub fn induce_markov_chain(mdp: &Mdp, policy: &Policy) -> Result<Mdp, ModelError> {
    let graph = mdp.graph();
    policy.check(graph)?;
    let n = graph.num_states();
    let mut builder = ModelBuilder::new(n, graph.initial_state());
    if let Some(labels) = &graph.state_labels {
        builder = builder.state_labels(labels.clone());
    }
    let mut mix = vec![0.0; n];
    let mut touched = Vec::new();
    for s in 0..n {
        let mut reward = 0.0;
        for (a, w) in policy.distribution(s) {
            if w == 0.0 {
                continue;
            }
            let c = graph
                .find_choice(s, a)
                .ok_or(ModelError::DisabledAction { state: s, action: a })?;
            reward += w * graph.reward(c);
            for (succ, &p) in mdp.outcomes(c) {
                if mix[succ] == 0.0 {
                    touched.push(succ);
                }
                mix[succ] += w * p;
            }
        }
        touched.sort_unstable();
        let outcomes = touched.iter().map(|&t| (t, mix[t])).collect();
        for &t in &touched {
            mix[t] = 0.0;
        }
        touched.clear();
        builder.choice(s, 0, reward, outcomes);
    }
    builder.build()
}

// ---------------------------------------------------------------------------
// Prior construction

/// Interval MDP plus the LUI strength attached to every non-point transition.
#[derive(Debug, Clone)]
pub struct PriorModel {
    pub umdp: UncertainMdp,
    /// `None` for immutable `[1,1]` transitions.
    pub strengths: Vec<Option<Strength>>,
}

/// Builds the initial prior interval MDP from the support of `graph_of`.
///
/// Only the support is read: probability-one transitions become `[1,1]`, every
/// other supported transition becomes `[epsilon, 1 - epsilon]`.
pub fn initial_prior_umdp(graph_of: &Mdp, epsilon: f64, strength: Strength) -> Result<PriorModel, ModelError> {
    validate_mdp(graph_of).into_result()?;
    prior_on_graph(graph_of.shared_graph(), epsilon, strength)
}

pub(crate) fn prior_on_graph(graph: Arc<Graph>, epsilon: f64, strength: Strength) -> Result<PriorModel, ModelError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(ModelError::InvalidEpsilon(epsilon));
    }
    if !(1 <= strength.lo && strength.lo <= strength.hi) {
        return Err(ModelError::InvalidStrength(strength.lo, strength.hi));
    }
    let mut values = Vec::with_capacity(graph.num_transitions());
    let mut strengths = Vec::with_capacity(graph.num_transitions());
    for c in 0..graph.num_choices() {
        let point = graph.is_deterministic(c);
        for _ in graph.transitions(c) {
            if point {
                values.push(Interval::point(1.0));
                strengths.push(None);
            } else {
                values.push(Interval::new(epsilon, 1.0 - epsilon));
                strengths.push(Some(strength));
            }
        }
    }
    Ok(PriorModel {
        umdp: Model::from_parts(graph, values),
        strengths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(p0: f64, p1: f64) -> Mdp {
        let mut b = ModelBuilder::new(2, 0);
        b.choice(0, 0, 0.0, vec![(1, p0), (0, p1)]);
        b.choice(1, 0, 0.0, vec![(1, 1.0)]);
        b.build().unwrap()
    }

    pub(crate) fn fig2a() -> Mdp {
        let mut b = ModelBuilder::new(4, 0)
            .state_labels(vec!["s0".into(), "s1".into(), "s2".into(), "s3".into()])
            .action_labels(vec!["a1".into(), "a2".into()]);
        b.choice(0, 0, 0.0, vec![(1, 0.7), (2, 0.3)]);
        b.choice(0, 1, 0.0, vec![(2, 0.1), (3, 0.9)]);
        for s in 1..4 {
            b.choice(s, 0, 0.0, vec![(s, 1.0)]);
        }
        b.build().unwrap()
    }

    #[test]
    fn uniform_split_is_valid() {
        assert!(validate_mdp(&two_state(0.5, 0.5)).is_ok());
    }

    #[test]
    fn overfull_distribution_is_reported() {
        let mut b = ModelBuilder::new(2, 0)
            .state_labels(vec!["s0".into(), "s1".into()])
            .action_labels(vec!["a".into()]);
        b.choice(0, 0, 0.0, vec![(1, 0.6), (0, 0.5)]);
        b.choice(1, 0, 0.0, vec![(1, 1.0)]);
        let report = validate_mdp(&b.build().unwrap());
        assert!(report.has(ViolationKind::ProbabilitySum));
        assert_eq!(report.violations[0].message, "sum 1.1 ≠ 1 at (s0,a)");
        assert_eq!(report.violations[0].state, 0);
    }

    #[test]
    fn state_without_actions_is_reported() {
        let mut b = ModelBuilder::new(2, 0).state_labels(vec!["s0".into(), "s1".into()]);
        b.choice(0, 0, 0.0, vec![(1, 1.0)]);
        let report = validate_mdp(&b.build().unwrap());
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].message, "no enabled action at s1");
    }

    fn umdp_pair(a: (f64, f64), b: (f64, f64)) -> UncertainMdp {
        let mut builder = ModelBuilder::new(3, 0);
        builder.choice(
            0,
            0,
            0.0,
            vec![(1, Interval::new(a.0, a.1)), (2, Interval::new(b.0, b.1))],
        );
        builder.choice(1, 0, 0.0, vec![(1, Interval::point(1.0))]);
        builder.choice(2, 0, 0.0, vec![(2, Interval::point(1.0))]);
        builder.build().unwrap()
    }

    #[test]
    fn umdp_validation() {
        assert!(validate_umdp(&umdp_pair((0.2, 0.4), (0.6, 0.8))).is_ok());
        let report = validate_umdp(&umdp_pair((0.6, 0.7), (0.5, 0.6)));
        assert!(report.has(ViolationKind::LowerSumAboveOne));
        assert!(report.to_string().contains("lower sum 1.1"));
        let report = validate_umdp(&umdp_pair((0.0, 0.3), (0.7, 1.0)));
        assert!(report.has(ViolationKind::ZeroLowerBound));
    }

    #[test]
    fn prior_reads_only_the_support() {
        let prior = initial_prior_umdp(&fig2a(), 1e-4, Strength::new(5, 10)).unwrap();
        let umdp = &prior.umdp;
        let g = umdp.graph();
        let mut branching = 0;
        let mut loops = 0;
        for c in 0..g.num_choices() {
            for t in g.transitions(c) {
                let iv = umdp.value(t);
                if g.is_deterministic(c) {
                    assert_eq!(*iv, Interval::point(1.0));
                    assert!(prior.strengths[t].is_none());
                    loops += 1;
                } else {
                    assert_eq!(*iv, Interval::new(1e-4, 0.9999));
                    assert_eq!(prior.strengths[t], Some(Strength::new(5, 10)));
                    branching += 1;
                }
            }
        }
        assert_eq!((branching, loops), (4, 3));
        assert!(validate_umdp(umdp).is_ok());
    }

    #[test]
    fn degenerate_epsilon_is_rejected() {
        assert_eq!(
            initial_prior_umdp(&fig2a(), 0.5, Strength::new(5, 10)).unwrap_err(),
            ModelError::InvalidEpsilon(0.5)
        );
    }

    #[test]
    fn deterministic_chain_prior_is_the_model() {
        let mut b = ModelBuilder::new(3, 0);
        b.choice(0, 0, 1.0, vec![(1, 1.0)]);
        b.choice(1, 0, 1.0, vec![(2, 1.0)]);
        b.choice(2, 0, 0.0, vec![(2, 1.0)]);
        let mdp = b.build().unwrap();
        let prior = initial_prior_umdp(&mdp, 0.1, Strength::new(1, 1)).unwrap();
        assert!(prior.umdp.values().iter().all(|iv| *iv == Interval::point(1.0)));
        assert!(prior.umdp.same_graph(&mdp));
    }

    #[test]
    fn induced_chain_follows_policy() {
        let mdp = fig2a();
        let chain = induce_markov_chain(&mdp, &Policy::Deterministic(vec![0; 4])).unwrap();
        let c = chain.graph().choices(0).start;
        let outcomes: Vec<_> = chain.outcomes(c).map(|(s, &p)| (s, p)).collect();
        assert_eq!(outcomes, vec![(1, 0.7), (2, 0.3)]);
        assert!(validate_mdp(&chain).is_ok());
    }

    #[test]
    fn induced_chain_mixes_randomized_policy() {
        let mdp = fig2a();
        let mut weights = vec![vec![(0, 1.0)]; 4];
        weights[0] = vec![(0, 0.5), (1, 0.5)];
        let chain = induce_markov_chain(&mdp, &Policy::Randomized(weights)).unwrap();
        let c = chain.graph().choices(0).start;
        let to_s2 = chain.outcomes(c).find(|(s, _)| *s == 2).unwrap().1;
        assert!((to_s2 - 0.2).abs() < 1e-12);
        assert!(validate_mdp(&chain).is_ok());
    }

    #[test]
    fn single_action_chain_is_identity() {
        let mdp = two_state(0.5, 0.5);
        let chain = induce_markov_chain(&mdp, &Policy::Deterministic(vec![0, 0])).unwrap();
        assert_eq!(chain.values(), mdp.values());
        assert_eq!(chain.graph(), mdp.graph());
    }

    #[test]
    fn disabled_action_is_rejected() {
        let err = induce_markov_chain(&fig2a(), &Policy::Deterministic(vec![0, 1, 0, 0]));
        assert_eq!(err.unwrap_err(), ModelError::DisabledAction { state: 1, action: 1 });
    }
}
