//! Value iteration on MDPs and interval MDPs, and exact policy evaluation.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph_analysis::{classify_states, StateClassification};
use crate::model::{
    induce_markov_chain, Graph, Interval, Mdp, ModelError, Policy, UncertainMdp, PROBABILITY_TOLERANCE,
};
use crate::spec::{Direction, Semantics, SpecError, Specification};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("infeasible intervals: lower sum {lower}, upper sum {upper}")]
    Infeasible { lower: f64, upper: f64 },
    #[error("intervals and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("robust queries need optimistic or pessimistic semantics")]
    ExactSemantics,
    #[error("policy evaluation system is singular")]
    Singular,
}

/// How nature resolves the uncertainty inside each interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerDirection {
    AdversarialMin,
    AdversarialMax,
}

impl InnerDirection {
    /// Pessimistic nature opposes the agent, optimistic nature helps it.
    pub fn for_query(direction: Direction, semantics: Semantics) -> Self {
        match (direction, semantics) {
            (Direction::Max, Semantics::Pessimistic) | (Direction::Min, Semantics::Optimistic) => {
                InnerDirection::AdversarialMin
            }
            _ => InnerDirection::AdversarialMax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub values: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl SolveResult {
    pub fn value(&self, state: usize) -> f64 {
        self.values[state]
    }
}

fn check_feasible(intervals: &[Interval]) -> Result<(), SolveError> {
    let lower: f64 = intervals.iter().map(|iv| iv.lower).sum();
    let upper: f64 = intervals.iter().map(|iv| iv.upper).sum();
    if lower > 1.0 + PROBABILITY_TOLERANCE || upper < 1.0 - PROBABILITY_TOLERANCE {
        return Err(SolveError::Infeasible { lower, upper });
    }
    Ok(())
}

fn order_successors(order: &mut [usize], value: impl Fn(usize) -> f64, dir: InnerDirection) {
    order.sort_by(|&i, &j| {
        let by_value = value(i).total_cmp(&value(j));
        let by_value = match dir {
            InnerDirection::AdversarialMin => by_value,
            InnerDirection::AdversarialMax => by_value.reverse(),
        };
        by_value.then(i.cmp(&j))
    });
}

/// The distribution inside the interval box that minimizes or maximizes the
/// expectation of `values`.
pub fn inner_extreme_distribution(
    intervals: &[Interval],
    values: &[f64],
    direction: InnerDirection,
) -> Result<Vec<f64>, SolveError> {
    if intervals.len() != values.len() {
        return Err(SolveError::LengthMismatch(intervals.len(), values.len()));
    }
    if intervals.is_empty() {
        return Err(SolveError::Infeasible { lower: 0.0, upper: 0.0 });
    }
    check_feasible(intervals)?;
    let mut p: Vec<f64> = intervals.iter().map(|iv| iv.lower).collect();
    let mut residual = 1.0 - p.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    order_successors(&mut order, |i| values[i], direction);
    for i in order {
        if residual <= 0.0 {
            break;
        }
        let add = intervals[i].width().min(residual);
        p[i] += add;
        residual -= add;
    }
    Ok(p)
}

/// Expectation under the extreme distribution, without allocating it.
fn extreme_expectation(
    intervals: &[Interval],
    successors: &[usize],
    values: &[f64],
    direction: InnerDirection,
    order: &mut Vec<usize>,
) -> f64 {
    if successors.len() == 1 {
        return values[successors[0]];
    }
    let mut acc = 0.0;
    let mut residual = 1.0;
    for (iv, &s) in intervals.iter().zip(successors) {
        acc += iv.lower * values[s];
        residual -= iv.lower;
    }
    order.clear();
    order.extend(0..successors.len());
    order_successors(order, |i| values[successors[i]], direction);
    for &i in order.iter() {
        if residual <= 0.0 {
            break;
        }
        let add = intervals[i].width().min(residual);
        if add > 0.0 {
            acc += add * values[successors[i]];
            residual -= add;
        }
    }
    acc
}

fn pinned_value(spec: &Specification, class: &StateClassification, s: usize) -> Option<f64> {
    if spec.is_reward() {
        if class.prob1[s] || class.prob0[s] {
            Some(0.0)
        } else if class.reward_divergent[s] {
            Some(f64::INFINITY)
        } else {
            None
        }
    } else if class.prob1[s] {
        Some(1.0)
    } else if class.prob0[s] {
        Some(0.0)
    } else {
        None
    }
}

fn residual_of(old: f64, new: f64) -> f64 {
    if old == new {
        0.0
    } else {
        (new - old).abs()
    }
}

/// Gauss-Seidel value iteration; `expectation(choice, values)` is the
/// successor expectation of a choice.
fn value_iteration(
    graph: &Graph,
    spec: &Specification,
    options: SolverOptions,
    mut expectation: impl FnMut(usize, &[f64]) -> f64,
) -> Result<SolveResult, SolveError> {
    spec.validate(graph.num_states())?;
    let class = classify_states(graph, spec);
    let n = graph.num_states();
    let mut values = vec![0.0; n];
    let mut free = Vec::new();
    for (s, v) in values.iter_mut().enumerate() {
        match pinned_value(spec, &class, s) {
            Some(p) => *v = p,
            None => free.push(s),
        }
    }
    let reward = spec.is_reward();
    let direction = spec.direction;
    let mut q = |c: usize, values: &[f64]| {
        let e = expectation(c, values);
        if reward {
            graph.reward(c) + e
        } else {
            e
        }
    };

    let mut iterations = 0;
    let mut residual = 0.0;
    let mut converged = free.is_empty();
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        residual = 0.0;
        for &s in &free {
            let mut best = direction.worst();
            for c in graph.choices(s) {
                let v = q(c, &values);
                if direction.better(v, best) {
                    best = v;
                }
            }
            residual = f64::max(residual, residual_of(values[s], best));
            values[s] = best;
        }
        converged = residual <= options.tolerance;
    }

    let policy = extract_policy(graph, spec, &class, &values, options.tolerance, &mut q);
    Ok(SolveResult {
        values,
        policy,
        iterations,
        residual,
        converged,
    })
}

/// Greedy policy on the final values, ties to the lowest action.
///
/// Objectives that require reaching the target (maximal reachability, minimal
/// reward) pick, among near-optimal actions, one that makes progress towards
/// the target, so that value ties on cycles cannot trap the policy.
fn extract_policy(
    graph: &Graph,
    spec: &Specification,
    class: &StateClassification,
    values: &[f64],
    tolerance: f64,
    q: &mut impl FnMut(usize, &[f64]) -> f64,
) -> Policy {
    let n = graph.num_states();
    let direction = spec.direction;
    let mut choice: Vec<Option<usize>> = vec![None; n];
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        if let Some(c) = class.reach_choice[s].or(class.avoid_choice[s]) {
            choice[s] = Some(c);
            continue;
        }
        let qs: Vec<(usize, f64)> = graph.choices(s).map(|c| (c, q(c, values))).collect();
        let mut best = qs[0];
        for &(c, v) in &qs[1..] {
            if direction.better(v, best.1) {
                best = (c, v);
            }
        }
        choice[s] = Some(best.0);
        candidates[s] = qs
            .iter()
            .filter(|&&(_, v)| {
                v == best.1
                    || match direction {
                        Direction::Max => v >= best.1 - tolerance,
                        Direction::Min => v <= best.1 + tolerance,
                    }
            })
            .map(|&(c, _)| c)
            .collect();
    }

    let needs_progress = matches!(
        (spec.is_reward(), direction),
        (false, Direction::Max) | (true, Direction::Min)
    );
    if needs_progress {
        let mut done = class.prob1.clone();
        let mut settled = done.clone();
        let mut changed = true;
        while changed {
            changed = false;
            let layer = done.clone();
            for s in 0..n {
                if settled[s] || candidates[s].is_empty() {
                    continue;
                }
                if let Some(&c) = candidates[s]
                    .iter()
                    .find(|&&c| graph.successors(c).iter().any(|&t| layer[t]))
                {
                    choice[s] = Some(c);
                    settled[s] = true;
                    done[s] = true;
                    changed = true;
                }
            }
        }
    }

    Policy::Deterministic(
        choice
            .into_iter()
            .map(|c| graph.choice_action(c.expect("every state has a choice")))
            .collect(),
    )
}

pub fn robust_value_iteration(
    umdp: &UncertainMdp,
    spec: &Specification,
    options: SolverOptions,
) -> Result<SolveResult, SolveError> {
    if spec.semantics == Semantics::Exact {
        return Err(SolveError::ExactSemantics);
    }
    let graph = umdp.graph();
    let nature = InnerDirection::for_query(spec.direction, spec.semantics);
    let intervals = umdp.values();
    let mut order = Vec::new();
    value_iteration(graph, spec, options, |c, values| {
        let range = graph.transitions(c);
        extreme_expectation(&intervals[range], graph.successors(c), values, nature, &mut order)
    })
}

/// Value iteration on an MDP; the semantics field of `spec` is ignored.
pub fn exact_value_iteration(
    mdp: &Mdp,
    spec: &Specification,
    options: SolverOptions,
) -> Result<SolveResult, SolveError> {
    let graph = mdp.graph();
    let probs = mdp.values();
    value_iteration(graph, spec, options, |c, values| {
        let mut acc = 0.0;
        for t in graph.transitions(c) {
            acc += probs[t] * values[graph.successor(t)];
        }
        acc
    })
}

/// Value of `policy` in every state, computed by solving the linear system of
/// the induced Markov chain.
pub fn evaluate_policy_values(mdp: &Mdp, policy: &Policy, spec: &Specification) -> Result<Vec<f64>, SolveError> {
    spec.validate(mdp.num_states())?;
    let chain = induce_markov_chain(mdp, policy)?;
    let graph = chain.graph();
    let class = classify_states(graph, spec);
    let n = graph.num_states();
    let mut values = vec![0.0; n];
    let mut unknown_index = vec![usize::MAX; n];
    let mut unknown = Vec::new();
    for s in 0..n {
        match pinned_value(spec, &class, s) {
            Some(v) => values[s] = v,
            None => {
                unknown_index[s] = unknown.len();
                unknown.push(s);
            }
        }
    }
    if unknown.is_empty() {
        return Ok(values);
    }
    let k = unknown.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (row, &s) in unknown.iter().enumerate() {
        let c = graph.choices(s).start;
        if spec.is_reward() {
            b[row] += graph.reward(c);
        }
        for (succ, &p) in chain.outcomes(c) {
            match unknown_index[succ] {
                usize::MAX => b[row] += p * values[succ],
                col => a[(row, col)] -= p,
            }
        }
    }
    let x = a.lu().solve(&b).ok_or(SolveError::Singular)?;
    for (row, &s) in unknown.iter().enumerate() {
        values[s] = x[row];
    }
    Ok(values)
}

/// Value of `policy` at the initial state.
pub fn evaluate_policy(mdp: &Mdp, policy: &Policy, spec: &Specification) -> Result<f64, SolveError> {
    Ok(evaluate_policy_values(mdp, policy, spec)?[mdp.initial_state()])
}
