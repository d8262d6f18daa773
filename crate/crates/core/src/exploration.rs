//! Sampling trajectories from the true environment and the doubling schedule
//! that groups them into learning iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph_analysis::StateClassification;
use crate::learning::CountTable;
use crate::model::{ActionId, Graph, Mdp, Policy, StateId, UncertainMdp};
use crate::solver::{robust_value_iteration, SolveError, SolverOptions};
use crate::spec::{Semantics, Specification};

/// Random generator used for every experiment: ChaCha8, seeded from a base
/// seed with one stream per repetition.
pub type ExperimentRng = ChaCha8Rng;

pub fn repetition_rng(seed: u64, repetition: u64) -> ExperimentRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repetition);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorationError {
    #[error("environment returned unsupported successor {successor} for action {action} at state {state}")]
    UnsupportedSuccessor {
        state: StateId,
        action: ActionId,
        successor: StateId,
    },
    #[error("policy chooses action {action} which is not enabled at state {state}")]
    DisabledAction { state: StateId, action: ActionId },
    #[error("trajectory budget must be at least 1")]
    NoBudget,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Black-box access to the true environment.
pub trait SamplingOracle {
    fn graph(&self) -> &Graph;
    /// Called once before every trajectory.
    fn begin_trajectory(&mut self);
    /// Draws a successor for `choice` of the graph.
    fn sample(&mut self, choice: usize, rng: &mut ExperimentRng) -> StateId;
    /// The model that will serve the next trajectory; only for evaluation.
    fn active_model(&self) -> &Mdp;
}

pub(crate) fn sample_successor(mdp: &Mdp, choice: usize, rng: &mut ExperimentRng) -> StateId {
    let graph = mdp.graph();
    let range = graph.transitions(choice);
    let last = range.end - 1;
    let mut u: f64 = rng.gen();
    for t in range {
        let p = mdp.values()[t];
        if u < p || t == last {
            return graph.successor(t);
        }
        u -= p;
    }
    unreachable!("choices have at least one successor")
}

/// Samples from a fixed MDP.
#[derive(Debug, Clone)]
pub struct MdpOracle {
    mdp: Mdp,
}

impl MdpOracle {
    pub fn new(mdp: Mdp) -> Self {
        Self { mdp }
    }
}

impl SamplingOracle for MdpOracle {
    fn graph(&self) -> &Graph {
        self.mdp.graph()
    }

    fn begin_trajectory(&mut self) {}

    fn sample(&mut self, choice: usize, rng: &mut ExperimentRng) -> StateId {
        sample_successor(&self.mdp, choice, rng)
    }

    fn active_model(&self) -> &Mdp {
        &self.mdp
    }
}

/// Greedy policy of the optimistic extension of `spec` on `umdp`.
pub fn optimistic_policy(
    umdp: &UncertainMdp,
    spec: &Specification,
    options: SolverOptions,
) -> Result<Policy, SolveError> {
    let optimistic = spec.clone().with_semantics(Semantics::Optimistic);
    Ok(robust_value_iteration(umdp, &optimistic, options)?.policy)
}

/// Every enabled action with equal weight.
pub fn uniform_policy(graph: &Graph) -> Policy {
    Policy::Randomized(
        (0..graph.num_states())
            .map(|s| {
                let m = graph.choices(s).len() as f64;
                graph.enabled_actions(s).map(|a| (a, 1.0 / m)).collect()
            })
            .collect(),
    )
}

/// Keeps the chosen action with probability `xi` and spreads the rest evenly
/// over the other enabled actions.
pub fn randomize_policy(policy: &Policy, xi: f64, graph: &Graph) -> Policy {
    Policy::Randomized(
        (0..graph.num_states())
            .map(|s| {
                let chosen = match policy {
                    Policy::Deterministic(a) => a[s],
                    Policy::Randomized(w) => {
                        w[s].iter()
                            .fold(
                                (0, f64::NEG_INFINITY),
                                |best, &(a, p)| {
                                    if p > best.1 {
                                        (a, p)
                                    } else {
                                        best
                                    }
                                },
                            )
                            .0
                    }
                };
                let m = graph.choices(s).len();
                if m == 1 {
                    return vec![(chosen, 1.0)];
                }
                let rest = (1.0 - xi) / (m - 1) as f64;
                graph
                    .enabled_actions(s)
                    .map(|a| (a, if a == chosen { xi } else { rest }))
                    .collect()
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub state: StateId,
    pub action: ActionId,
    pub successor: StateId,
    pub choice: usize,
    pub transition: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    AbsorbingNonTarget,
    HorizonH,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub terminated_by: Termination,
}

fn draw_action(policy: &Policy, state: StateId, rng: &mut ExperimentRng) -> ActionId {
    match policy {
        Policy::Deterministic(a) => a[state],
        Policy::Randomized(w) => {
            let dist = &w[state];
            if dist.len() == 1 {
                return dist[0].0;
            }
            let mut u: f64 = rng.gen();
            for &(a, p) in dist {
                if u < p {
                    return a;
                }
                u -= p;
            }
            dist.iter().rev().find(|(_, p)| *p > 0.0).map_or(dist[0].0, |&(a, _)| a)
        }
    }
}

/// Walks from the initial state until a decided state or the horizon.
pub fn sample_trajectory(
    oracle: &mut dyn SamplingOracle,
    policy: &Policy,
    classification: &StateClassification,
    horizon: usize,
    rng: &mut ExperimentRng,
) -> Result<Trajectory, ExplorationError> {
    let mut steps = Vec::new();
    let mut state = oracle.graph().initial_state();
    let terminated_by =
        loop {
            if classification.prob1[state] {
                break Termination::TargetReached;
            }
            if classification.prob0[state] || classification.reward_divergent[state] {
                break Termination::AbsorbingNonTarget;
            }
            if steps.len() == horizon {
                break Termination::HorizonH;
            }
            let action = draw_action(policy, state, rng);
            let choice = oracle
                .graph()
                .find_choice(state, action)
                .ok_or(ExplorationError::DisabledAction { state, action })?;
            let successor = oracle.sample(choice, rng);
            let graph = oracle.graph();
            let offset = graph.successors(choice).binary_search(&successor).map_err(|_| {
                ExplorationError::UnsupportedSuccessor {
                    state,
                    action,
                    successor,
                }
            })?;
            steps.push(Step {
                state,
                action,
                successor,
                choice,
                transition: graph.transitions(choice).start + offset,
            });
            state = successor;
        };
    Ok(Trajectory { steps, terminated_by })
}

/// When an iteration of the doubling schedule ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoublingRule {
    /// Some state-action counter of the iteration reaches its count from all
    /// previous iterations (at least one).
    #[default]
    PairCounts,
    /// As above, or some transition counter does.
    PairOrTransitionCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    pub global: CountTable,
    pub iteration: CountTable,
    pub trajectories_done: usize,
    pub steps_done: u64,
}

impl ScheduleState {
    pub fn new(graph: &Graph) -> Self {
        Self {
            global: CountTable::new(graph),
            iteration: CountTable::new(graph),
            trajectories_done: 0,
            steps_done: 0,
        }
    }

    fn doubled(&self, rule: DoublingRule) -> bool {
        let reached = |now: &[u64], before: &[u64]| now.iter().zip(before).any(|(&n, &b)| n > 0 && n >= b.max(1));
        reached(self.iteration.pairs(), self.global.pairs())
            || (rule == DoublingRule::PairOrTransitionCounts
                && reached(self.iteration.transitions(), self.global.transitions()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub counts: CountTable,
    pub trajectories: usize,
    pub steps: u64,
}

/// Samples trajectories until the doubling condition holds or the budget is
/// spent, then moves the iteration counts into the global table.
#[allow(clippy::too_many_arguments)]
pub fn run_iteration(
    schedule: &mut ScheduleState,
    oracle: &mut dyn SamplingOracle,
    policy: &Policy,
    classification: &StateClassification,
    horizon: usize,
    k_remaining: usize,
    rule: DoublingRule,
    rng: &mut ExperimentRng,
) -> Result<IterationOutcome, ExplorationError> {
    if k_remaining == 0 {
        return Err(ExplorationError::NoBudget);
    }
    let mut trajectories = 0;
    let mut steps = 0;
    while trajectories < k_remaining {
        oracle.begin_trajectory();
        let trajectory = sample_trajectory(oracle, policy, classification, horizon, rng)?;
        for step in &trajectory.steps {
            schedule.iteration.record(step.choice, step.transition);
        }
        trajectories += 1;
        steps += trajectory.steps.len() as u64;
        if schedule.doubled(rule) {
            break;
        }
    }
    schedule.trajectories_done += trajectories;
    schedule.steps_done += steps;
    let counts = schedule.iteration.clone();
    schedule.global.merge_from(&counts);
    schedule.iteration.clear();
    Ok(IterationOutcome {
        counts,
        trajectories,
        steps,
    })
}
