//! The anytime learning loop, its metrics, repetition management and CSV
//! output.
//!
//! Each iteration computes a robust policy on the current learned model,
//! records how it performs on the true environment, explores with an
//! optimistic policy until the doubling schedule closes the iteration, and
//! feeds the new counts to the learner.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::environments::{
    build_named, switching_oracle, EnvironmentError, EnvironmentSpecSheet, SwitchingEnvironment, DEFAULT_CHAIN_STATES,
};
use crate::exploration::{
    optimistic_policy, randomize_policy, repetition_rng, run_iteration, uniform_policy, DoublingRule, ExplorationError,
    MdpOracle, SamplingOracle, ScheduleState,
};
use crate::graph_analysis::classify_states;
use crate::learning::{LearnError, LearnedModel, Learner, LearnerConfig};
use crate::model::{Mdp, Policy};
use crate::solver::{evaluate_policy, exact_value_iteration, robust_value_iteration, SolveError, SolverOptions};
use crate::spec::{Semantics, Specification};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Exploration(#[from] ExplorationError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("aggregation needs at least two repetitions, learner '{learner}' has {found}")]
    TooFewRepetitions { learner: String, found: usize },
    #[error("every repetition failed; first error: {0}")]
    AllFailed(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExplorationMode {
    #[default]
    Optimistic,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchConfig {
    pub environment: String,
    pub after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub environment: String,
    pub chain_states: usize,
    pub learners: Vec<LearnerConfig>,
    pub trajectories: usize,
    /// `None` means ten times the number of states.
    pub horizon: Option<usize>,
    pub repetitions: usize,
    pub seed: u64,
    /// Probability of following the exploration policy's action.
    pub xi: f64,
    pub exploration: ExplorationMode,
    pub switching: Option<SwitchConfig>,
    pub solver: SolverOptions,
    pub doubling: DoublingRule,
    /// Record wall-clock time per iteration; off keeps output reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(environment: impl Into<String>, learners: Vec<LearnerConfig>) -> Self {
        Self {
            environment: environment.into(),
            chain_states: DEFAULT_CHAIN_STATES,
            learners,
            trajectories: 1000,
            horizon: None,
            repetitions: 100,
            seed: 0,
            xi: 1.0,
            exploration: ExplorationMode::Optimistic,
            switching: None,
            solver: SolverOptions::default(),
            doubling: DoublingRule::PairCounts,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.trajectories == 0 {
            return bad("trajectories must be at least 1");
        }
        if self.learners.is_empty() {
            return bad("at least one learner is required");
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return bad("xi must lie in [0, 1]");
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_iterations == 0 {
            return bad("solver tolerance and max_iterations must be positive");
        }
        let mut names: Vec<&str> = self.learners.iter().map(|l| l.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("learner names must be unique");
        }
        for l in &self.learners {
            l.validate()?;
        }
        Ok(())
    }

    /// Builds the environments named by the configuration.
    pub fn prepare(&self) -> Result<Experiment, HarnessError> {
        self.validate()?;
        let build = |name: &str| {
            build_named(name, self.chain_states)
                .ok_or_else(|| HarnessError::Config(format!("unknown environment '{name}'")))
        };
        let sheet = build(&self.environment)?;
        let switching = match &self.switching {
            Some(sw) => {
                let after = build(&sw.environment)?;
                if after.spec != sheet.spec {
                    return Err(HarnessError::Config(
                        "switching environments must share the specification".into(),
                    ));
                }
                Some(SwitchingEnvironment::new(sheet.mdp.clone(), after.mdp, sw.after)?)
            }
            None => None,
        };
        Ok(Experiment {
            config: self.clone(),
            sheet,
            switching,
        })
    }
}

/// A configuration with its environments built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub sheet: EnvironmentSpecSheet,
    pub switching: Option<SwitchingEnvironment>,
}

impl Experiment {
    pub fn horizon(&self) -> usize {
        self.config.horizon.unwrap_or(10 * self.sheet.mdp.num_states())
    }

    fn oracle(&self) -> Box<dyn SamplingOracle> {
        match &self.switching {
            Some(sw) => Box::new(switching_oracle(sw.clone())),
            None => Box::new(MdpOracle::new(self.sheet.mdp.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub repetition: usize,
    pub learner: String,
    pub iteration: usize,
    pub trajectories: usize,
    pub performance_true: f64,
    pub performance_model: f64,
    pub estimation_error: f64,
    pub model_error: f64,
    pub wall_time_ms: f64,
}

pub fn metric_performance(true_mdp: &Mdp, policy: &Policy, spec: &Specification) -> Result<f64, SolveError> {
    evaluate_policy(true_mdp, policy, spec)
}

pub fn metric_estimation_error(performance_model: f64, performance_true: f64) -> f64 {
    performance_model - performance_true
}

/// Mean distance of the true probabilities to the learned bounds (or point
/// estimates), over all transitions of non-deterministic choices.
pub fn metric_model_error(true_mdp: &Mdp, learned: &LearnedModel) -> Result<f64, HarnessError> {
    let g = true_mdp.graph();
    if learned.graph() != g {
        return Err(HarnessError::Config(
            "learned model does not match the true graph".into(),
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for c in (0..g.num_choices()).filter(|&c| !g.is_deterministic(c)) {
        for t in g.transitions(c) {
            let p = true_mdp.values()[t];
            total += match learned {
                LearnedModel::Interval(u) => {
                    let iv = u.values()[t];
                    (p - iv.lower).abs().max((p - iv.upper).abs())
                }
                LearnedModel::Point(m) => (p - m.values()[t]).abs(),
            };
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Policy the model recommends together with the value it guarantees:
/// the pessimistic robust value for interval models, the optimum for point
/// estimates.
fn model_policy(
    model: &LearnedModel,
    spec: &Specification,
    options: SolverOptions,
) -> Result<(Policy, f64), SolveError> {
    let result = match model {
        LearnedModel::Interval(u) => {
            robust_value_iteration(u, &spec.clone().with_semantics(Semantics::Pessimistic), options)?
        }
        LearnedModel::Point(m) => exact_value_iteration(m, spec, options)?,
    };
    let init = model.graph().initial_state();
    if !result.converged {
        log::debug!(
            "value iteration stopped after {} sweeps with residual {}",
            result.iterations,
            result.residual
        );
    }
    Ok((result.policy, result.values[init]))
}

fn exploration_policy(experiment: &Experiment, learner: &Learner) -> Result<Policy, SolveError> {
    let cfg = &experiment.config;
    let graph = learner.model().graph();
    let base = match cfg.exploration {
        ExplorationMode::Uniform => return Ok(uniform_policy(graph)),
        ExplorationMode::Optimistic => {
            optimistic_policy(&learner.exploration_model(), &experiment.sheet.spec, cfg.solver)?
        }
    };
    Ok(if cfg.xi < 1.0 {
        randomize_policy(&base, cfg.xi, graph)
    } else {
        base
    })
}

/// Runs one learner for one repetition; records the prior model and every
/// iteration after it.
pub fn run_repetition(
    experiment: &Experiment,
    learner_config: &LearnerConfig,
    repetition: usize,
) -> Result<Vec<ExperimentRecord>, HarnessError> {
    run_repetition_observed(experiment, learner_config, repetition, |_, _| {})
}

/// [`run_repetition`] that also hands every learned model, with the true
/// model active at that point, to `observe`.
pub fn run_repetition_observed(
    experiment: &Experiment,
    learner_config: &LearnerConfig,
    repetition: usize,
    mut observe: impl FnMut(&LearnedModel, &Mdp),
) -> Result<Vec<ExperimentRecord>, HarnessError> {
    let cfg = &experiment.config;
    let spec = experiment.sheet.spec.clone().with_semantics(Semantics::Exact);
    let graph = experiment.sheet.mdp.shared_graph();
    let classification = classify_states(&graph, &spec);
    let mut learner = Learner::new(learner_config.clone(), graph.clone())?;
    let mut schedule = ScheduleState::new(&graph);
    let mut oracle = experiment.oracle();
    let mut rng = repetition_rng(cfg.seed, repetition as u64);
    let horizon = experiment.horizon();
    let mut records = Vec::new();
    let mut learn_ms = 0.0;

    for iteration in 0.. {
        let clock = Instant::now();
        let (policy, performance_model) = model_policy(learner.model(), &spec, cfg.solver)?;
        let solve_ms = clock.elapsed().as_secs_f64() * 1e3;
        let truth = oracle.active_model();
        observe(learner.model(), truth);
        let performance_true = metric_performance(truth, &policy, &spec)?;
        records.push(ExperimentRecord {
            repetition,
            learner: learner_config.name.clone(),
            iteration,
            trajectories: schedule.trajectories_done,
            performance_true,
            performance_model,
            estimation_error: metric_estimation_error(performance_model, performance_true),
            model_error: metric_model_error(truth, learner.model())?,
            wall_time_ms: if cfg.timing { solve_ms + learn_ms } else { 0.0 },
        });
        if schedule.trajectories_done >= cfg.trajectories {
            break;
        }

        let explore = exploration_policy(experiment, &learner)?;
        let remaining = cfg.trajectories - schedule.trajectories_done;
        let outcome = run_iteration(
            &mut schedule,
            oracle.as_mut(),
            &explore,
            &classification,
            horizon,
            remaining,
            cfg.doubling,
            &mut rng,
        )?;
        let clock = Instant::now();
        learner.observe(&outcome.counts, schedule.steps_done)?;
        learn_ms = clock.elapsed().as_secs_f64() * 1e3;
    }
    Ok(records)
}

#[derive(Debug)]
pub struct RepetitionFailure {
    pub repetition: usize,
    pub learner: String,
    pub error: HarnessError,
}

#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<RepetitionFailure>,
}

/// Runs every learner for every repetition, in parallel on `workers` threads
/// (all available cores when `None`). Records are ordered by learner (in
/// configuration order), repetition and iteration.
pub fn run_experiment(experiment: &Experiment, workers: Option<usize>) -> Result<ExperimentOutput, HarnessError> {
    let cfg = &experiment.config;
    let tasks: Vec<(usize, usize)> = (0..cfg.learners.len())
        .flat_map(|l| (0..cfg.repetitions).map(move |r| (l, r)))
        .collect();
    let work = || {
        tasks
            .par_iter()
            .map(|&(l, r)| (l, r, run_repetition(experiment, &cfg.learners[l], r)))
            .collect::<Vec<_>>()
    };
    let results = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut output = ExperimentOutput::default();
    for (l, r, result) in results {
        match result {
            Ok(records) => output.records.extend(records),
            Err(error) => {
                let learner = cfg.learners[l].name.clone();
                log::warn!("repetition {r} of learner {learner} failed: {error}");
                output.failures.push(RepetitionFailure {
                    repetition: r,
                    learner,
                    error,
                });
            }
        }
    }
    if output.records.is_empty() {
        if let Some(f) = output.failures.first() {
            return Err(HarnessError::AllFailed(f.error.to_string()));
        }
    }
    Ok(output)
}

/// Mean and normal-approximation 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let half = 1.96 * var.sqrt() / n.sqrt();
    let half = if half.is_nan() && values.iter().all(|&v| v == values[0]) {
        0.0
    } else {
        half
    };
    Summary {
        mean,
        ci_lo: mean - half,
        ci_hi: mean + half,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub learner: String,
    pub trajectories: usize,
    pub repetitions: usize,
    pub performance_true: Summary,
    pub performance_model: Summary,
    pub estimation_error: Summary,
    pub model_error: Summary,
}

/// Aligns repetitions on the union of their trajectory counts, carrying the
/// last observation forward, and summarizes each metric per learner.
pub fn aggregate(records: &[ExperimentRecord]) -> Result<Vec<AggregateRow>, HarnessError> {
    let mut learners: Vec<&str> = Vec::new();
    let mut by_learner: BTreeMap<&str, BTreeMap<usize, Vec<&ExperimentRecord>>> = BTreeMap::new();
    for r in records {
        if !learners.contains(&r.learner.as_str()) {
            learners.push(&r.learner);
        }
        by_learner
            .entry(&r.learner)
            .or_default()
            .entry(r.repetition)
            .or_default()
            .push(r);
    }
    let mut rows = Vec::new();
    for learner in learners {
        let reps = &by_learner[learner];
        if reps.len() < 2 {
            return Err(HarnessError::TooFewRepetitions {
                learner: learner.to_string(),
                found: reps.len(),
            });
        }
        let mut runs: Vec<Vec<&ExperimentRecord>> = reps.values().cloned().collect();
        for run in &mut runs {
            run.sort_by_key(|r| (r.trajectories, r.iteration));
        }
        let mut grid: Vec<usize> = runs.iter().flatten().map(|r| r.trajectories).collect();
        grid.sort_unstable();
        grid.dedup();
        let mut cursor = vec![0usize; runs.len()];
        for &t in &grid {
            let mut current = Vec::with_capacity(runs.len());
            for (run, pos) in runs.iter().zip(cursor.iter_mut()) {
                while *pos + 1 < run.len() && run[*pos + 1].trajectories <= t {
                    *pos += 1;
                }
                current.push(run[*pos]);
            }
            let metric = |f: fn(&ExperimentRecord) -> f64| summarize(&current.iter().map(|r| f(r)).collect::<Vec<_>>());
            rows.push(AggregateRow {
                learner: learner.to_string(),
                trajectories: t,
                repetitions: runs.len(),
                performance_true: metric(|r| r.performance_true),
                performance_model: metric(|r| r.performance_model),
                estimation_error: metric(|r| r.estimation_error),
                model_error: metric(|r| r.model_error),
            });
        }
    }
    Ok(rows)
}

/// Real number with ten significant digits.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    let magnitude = rounded.abs();
    if magnitude != 0.0 && !(1e-6..1e15).contains(&magnitude) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

pub const RECORD_HEADER: [&str; 9] = [
    "rep",
    "learner",
    "iteration",
    "trajectories",
    "perf_true",
    "perf_model",
    "est_error",
    "model_error",
    "wall_ms",
];

const METRICS: [&str; 4] = ["perf_true", "perf_model", "est_error", "model_error"];

pub fn write_records<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.repetition.to_string(),
            r.learner.clone(),
            r.iteration.to_string(),
            r.trajectories.to_string(),
            format_real(r.performance_true),
            format_real(r.performance_model),
            format_real(r.estimation_error),
            format_real(r.model_error),
            format_real(r.wall_time_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn aggregate_header() -> Vec<String> {
    let mut header = vec!["learner".to_string(), "trajectories".into(), "repetitions".into()];
    for m in METRICS {
        header.extend([format!("mean_{m}"), format!("ci_lo_{m}"), format!("ci_hi_{m}")]);
    }
    header
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(aggregate_header())?;
    for row in rows {
        let mut fields = vec![
            row.learner.clone(),
            row.trajectories.to_string(),
            row.repetitions.to_string(),
        ];
        for s in [
            row.performance_true,
            row.performance_model,
            row.estimation_error,
            row.model_error,
        ] {
            fields.extend([format_real(s.mean), format_real(s.ci_lo), format_real(s.ci_hi)]);
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::Method;
    use crate::model::Interval;

    fn record(rep: usize, trajectories: usize, perf: f64) -> ExperimentRecord {
        ExperimentRecord {
            repetition: rep,
            learner: "LUI".into(),
            iteration: trajectories,
            trajectories,
            performance_true: perf,
            performance_model: perf,
            estimation_error: 0.0,
            model_error: 0.0,
            wall_time_ms: 0.0,
        }
    }

    #[test]
    fn estimation_error_sign() {
        assert!((metric_estimation_error(0.4, 0.5) + 0.1).abs() < 1e-12);
        assert!((metric_estimation_error(0.6, 0.5) - 0.1).abs() < 1e-12);
        assert_eq!(metric_estimation_error(0.5, 0.5), 0.0);
    }

    #[test]
    fn model_error_means_over_uncertain_transitions() {
        let (mdp, _) = crate::environments::build_example();
        let exact = LearnedModel::Point(mdp.clone());
        assert_eq!(metric_model_error(&mdp, &exact).unwrap(), 0.0);
        let mut values: Vec<Interval> = mdp.values().iter().map(|&p| Interval::point(p)).collect();
        values[0] = Interval::new(0.6, 0.8);
        values[1] = Interval::new(0.0, 0.3 + 0.3 * 4.0);
        let learned = LearnedModel::Interval(mdp.with_values(values));
        // Errors 0.1, 1.2, 0, 0 over four uncertain transitions.
        assert!((metric_model_error(&mdp, &learned).unwrap() - 1.3 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn confidence_interval() {
        let s = summarize(&[0.4, 0.6]);
        assert!((s.mean - 0.5).abs() < 1e-12);
        let half = 1.96 * (0.02f64).sqrt() / 2f64.sqrt();
        assert!((s.ci_hi - s.mean - half).abs() < 1e-12);
        assert!((half - 0.196).abs() < 1e-3);
        let s = summarize(&[0.3, 0.3, 0.3]);
        assert_eq!(s.ci_lo, s.ci_hi);
    }

    #[test]
    fn last_observation_carried_forward() {
        let records = vec![
            record(0, 0, 0.0),
            record(0, 1, 1.0),
            record(0, 3, 3.0),
            record(1, 0, 0.0),
            record(1, 2, 2.0),
        ];
        let rows = aggregate(&records).unwrap();
        let means: Vec<(usize, f64)> = rows.iter().map(|r| (r.trajectories, r.performance_true.mean)).collect();
        assert_eq!(means, vec![(0, 0.0), (1, 0.5), (2, 1.5), (3, 2.5)]);
        assert!(matches!(
            aggregate(&records[..3]),
            Err(HarnessError::TooFewRepetitions { .. })
        ));
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_real(0.7), "0.7");
        assert_eq!(format_real(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_real(10.0), "10");
        assert_eq!(format_real(f64::INFINITY), "inf");
        assert_eq!(format_real(2.0e-9), "2e-9");
        assert_eq!(format_real(123456789.123456), "123456789.1");
    }

    #[test]
    fn single_trajectory_budget() {
        let mut cfg = ExperimentConfig::new("example", vec![LearnerConfig::new(Method::Lui)]);
        cfg.trajectories = 1;
        let exp = cfg.prepare().unwrap();
        let records = run_repetition(&exp, &cfg.learners[0], 0).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].trajectories, 1);
        for r in &records {
            assert_eq!(r.estimation_error, r.performance_model - r.performance_true);
        }
    }

    #[test]
    fn map_model_value_is_its_optimum() {
        let mut cfg = ExperimentConfig::new("example", vec![LearnerConfig::new(Method::Map)]);
        cfg.trajectories = 1;
        let exp = cfg.prepare().unwrap();
        let records = run_repetition(&exp, &cfg.learners[0], 0).unwrap();
        // The uniform prior mode gives either action 0.5.
        assert!((records[0].performance_model - 0.5).abs() < 1e-9);
    }
}
