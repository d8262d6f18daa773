//! Turning transition counts into models: linearly updating intervals (LUI),
//! PAC intervals, MAP point estimates and UCRL2-style intervals.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{prior_on_graph, Graph, Interval, Mdp, Model, ModelError, UncertainMdp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("LUI update needs at least one sample")]
    NoSamples,
    #[error("transition counts sum to {sum} but the pair count is {n}")]
    CountMismatch { sum: u64, n: u64 },
    #[error("{0} priors but {1} counts")]
    LengthMismatch(usize, usize),
    #[error("invalid prior interval [{0}, {1}]")]
    InvalidPrior(f64, f64),
    #[error("strength must satisfy 1 <= lo <= hi, got [{0}, {1}]")]
    InvalidStrength(u64, u64),
    #[error("posterior mode undefined: all Dirichlet parameters equal 1")]
    DegenerateMode,
    #[error("Dirichlet parameters must be at least 1")]
    InvalidAlpha,
    #[error("invalid learner configuration: {0}")]
    Config(String),
    #[error("unknown learning method '{0}' (expected LUI, PAC, MAP or UCRL2)")]
    UnknownMethod(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A prior strength interval: the smallest and largest number of samples the
/// prior interval is considered to be based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strength {
    pub lo: u64,
    pub hi: u64,
}

impl Strength {
    pub const fn new(lo: u64, hi: u64) -> Self {
        Self { lo, hi }
    }

    pub fn is_valid(&self) -> bool {
        1 <= self.lo && self.lo <= self.hi
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Per-choice and per-transition visit counts over a fixed graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pairs: Vec<u64>,
    transitions: Vec<u64>,
}

impl CountTable {
    pub fn new(graph: &Graph) -> Self {
        Self {
            pairs: vec![0; graph.num_choices()],
            transitions: vec![0; graph.num_transitions()],
        }
    }

    pub fn record(&mut self, choice: usize, transition: usize) {
        self.pairs[choice] += 1;
        self.transitions[transition] += 1;
    }

    pub fn pair(&self, choice: usize) -> u64 {
        self.pairs[choice]
    }

    pub fn transition(&self, transition: usize) -> u64 {
        self.transitions[transition]
    }

    pub fn pairs(&self) -> &[u64] {
        &self.pairs
    }

    pub fn transitions(&self) -> &[u64] {
        &self.transitions
    }

    pub fn total(&self) -> u64 {
        self.pairs.iter().sum()
    }

    pub fn merge_from(&mut self, other: &CountTable) {
        for (a, b) in self.pairs.iter_mut().zip(&other.pairs) {
            *a += b;
        }
        for (a, b) in self.transitions.iter_mut().zip(&other.transitions) {
            *a += b;
        }
    }

    pub fn clear(&mut self) {
        self.pairs.fill(0);
        self.transitions.fill(0);
    }

    /// Every pair count equals the sum of its transition counts.
    pub fn is_consistent(&self, graph: &Graph) -> bool {
        self.pairs.len() == graph.num_choices()
            && (0..graph.num_choices())
                .all(|c| graph.transitions(c).map(|t| self.transitions[t]).sum::<u64>() == self.pairs[c])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuiTransitionState {
    pub interval: Interval,
    pub strength: Strength,
}

/// `(min(lo + n, cap.lo), min(hi + n, cap.hi))`.
pub fn cap_strength(strength: Strength, cap: Strength, n: u64) -> Strength {
    Strength::new((strength.lo + n).min(cap.lo), (strength.hi + n).min(cap.hi))
}

/// Posterior intervals of one state-action pair after observing `n` samples
/// split as `k` over its successors.
pub fn lui_update(
    priors: &[LuiTransitionState],
    n: u64,
    k: &[u64],
    cap: Option<Strength>,
) -> Result<Vec<LuiTransitionState>, LearnError> {
    if priors.len() != k.len() {
        return Err(LearnError::LengthMismatch(priors.len(), k.len()));
    }
    if n == 0 {
        return Err(LearnError::NoSamples);
    }
    let sum: u64 = k.iter().sum();
    if sum != n {
        return Err(LearnError::CountMismatch { sum, n });
    }
    for p in priors {
        let iv = p.interval;
        if !(iv.lower > 0.0 && iv.lower <= iv.upper && iv.upper <= 1.0) {
            return Err(LearnError::InvalidPrior(iv.lower, iv.upper));
        }
        if !p.strength.is_valid() {
            return Err(LearnError::InvalidStrength(p.strength.lo, p.strength.hi));
        }
    }
    let nf = n as f64;
    let freq = |j: usize| k[j] as f64 / nf;
    let lower_agrees = (0..k.len()).all(|j| freq(j) >= priors[j].interval.lower);
    let upper_agrees = (0..k.len()).all(|j| freq(j) <= priors[j].interval.upper);
    let posterior = priors
        .iter()
        .zip(k)
        .map(|(p, &ki)| {
            let ki = ki as f64;
            let lo_n = if lower_agrees { p.strength.hi } else { p.strength.lo } as f64;
            let hi_n = if upper_agrees { p.strength.hi } else { p.strength.lo } as f64;
            let lower = (lo_n * p.interval.lower + ki) / (lo_n + nf);
            let upper = (hi_n * p.interval.upper + ki) / (hi_n + nf);
            let strength = match cap {
                Some(cap) => cap_strength(p.strength, cap, n),
                None => Strength::new(p.strength.lo + n, p.strength.hi + n),
            };
            LuiTransitionState {
                interval: Interval::new(lower, upper),
                strength,
            }
        })
        .collect();
    Ok(posterior)
}

/// Mode of the Dirichlet posterior with parameters `alphas + counts`.
pub fn map_point_estimate(alphas: &[f64], counts: &[u64]) -> Result<Vec<f64>, LearnError> {
    if alphas.len() != counts.len() {
        return Err(LearnError::LengthMismatch(alphas.len(), counts.len()));
    }
    if alphas.iter().any(|&a| !(a >= 1.0)) {
        return Err(LearnError::InvalidAlpha);
    }
    let m = alphas.len() as f64;
    let posterior: Vec<f64> = alphas.iter().zip(counts).map(|(&a, &k)| a + k as f64).collect();
    let denom = posterior.iter().sum::<f64>() - m;
    if denom <= 0.0 {
        return Err(LearnError::DegenerateMode);
    }
    Ok(posterior.iter().map(|a| (a - 1.0) / denom).collect())
}

fn mode_or_uniform(alphas: &[f64], counts: &[u64]) -> Vec<f64> {
    map_point_estimate(alphas, counts).unwrap_or_else(|_| vec![1.0 / alphas.len() as f64; alphas.len()])
}

/// Distribution of a global error rate over the stochastic transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub gamma_p: f64,
    pub stochastic_transitions: usize,
}

impl ErrorBudget {
    /// No transition is uncertain, so nothing needs an error share.
    pub fn is_degenerate(&self) -> bool {
        self.stochastic_transitions == 0
    }
}

pub fn pac_error_budget(graph: &Graph, gamma: f64) -> ErrorBudget {
    let stochastic_transitions = (0..graph.num_choices())
        .filter(|&c| !graph.is_deterministic(c))
        .map(|c| graph.transitions(c).len())
        .sum();
    if stochastic_transitions == 0 {
        log::warn!("model has no stochastic transitions; PAC error budget is the global rate");
        return ErrorBudget {
            gamma_p: gamma,
            stochastic_transitions,
        };
    }
    ErrorBudget {
        gamma_p: gamma / stochastic_transitions as f64,
        stochastic_transitions,
    }
}

/// Hoeffding radius for `n` samples at per-transition error `gamma_p`.
pub fn pac_radius(n: u64, gamma_p: f64) -> f64 {
    ((2.0 / gamma_p).ln() / (2.0 * n as f64)).sqrt()
}

fn clipped_intervals(estimates: &[f64], radius: f64, epsilon: f64) -> Vec<Interval> {
    estimates
        .iter()
        .map(|&e| Interval::new(epsilon.max(e - radius), (e + radius).min(1.0)))
        .collect()
}

pub fn pac_intervals(estimates: &[f64], n: u64, gamma_p: f64, epsilon: f64) -> Vec<Interval> {
    clipped_intervals(estimates, pac_radius(n, gamma_p), epsilon)
}

pub fn ucrl2_radius(num_states: usize, num_actions: usize, t_k: u64, n: u64, gamma: f64) -> f64 {
    let t_k = t_k.max(1) as f64;
    (14.0 * num_states as f64 * (2.0 * num_actions as f64 * t_k / gamma).ln() / n.max(1) as f64).sqrt()
}

pub fn ucrl2_intervals(
    estimates: &[f64],
    num_states: usize,
    num_actions: usize,
    t_k: u64,
    n: u64,
    gamma: f64,
    epsilon: f64,
) -> Vec<Interval> {
    clipped_intervals(estimates, ucrl2_radius(num_states, num_actions, t_k, n, gamma), epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Lui,
    Pac,
    Map,
    Ucrl2,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lui, Method::Pac, Method::Map, Method::Ucrl2];

    pub fn label(self) -> &'static str {
        match self {
            Method::Lui => "LUI",
            Method::Pac => "PAC",
            Method::Map => "MAP",
            Method::Ucrl2 => "UCRL2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| LearnError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub name: String,
    pub method: Method,
    pub epsilon: f64,
    pub prior_strength: Strength,
    pub strength_cap: Option<Strength>,
    pub map_prior_alpha: f64,
    pub gamma: f64,
}

impl LearnerConfig {
    pub fn new(method: Method) -> Self {
        Self {
            name: method.label().to_string(),
            method,
            epsilon: 1e-4,
            prior_strength: Strength::new(5, 10),
            strength_cap: None,
            map_prior_alpha: 10.0,
            gamma: 0.01,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_cap(mut self, cap: Strength) -> Self {
        self.strength_cap = Some(cap);
        self
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::Config(m));
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon must lie in (0, 0.5), got {}", self.epsilon));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !self.prior_strength.is_valid() {
            return bad(format!("invalid prior strength {}", self.prior_strength));
        }
        if let Some(cap) = self.strength_cap {
            if cap.lo < self.prior_strength.lo || cap.hi < self.prior_strength.hi || cap.lo > cap.hi {
                return bad(format!(
                    "strength cap {cap} must dominate the prior strength {}",
                    self.prior_strength
                ));
            }
        }
        if !(self.map_prior_alpha >= 1.0) {
            return bad(format!(
                "map_prior_alpha must be at least 1, got {}",
                self.map_prior_alpha
            ));
        }
        Ok(())
    }
}

/// Dirichlet parameters per transition plus cumulative sample counts per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletState {
    pub alphas: Vec<f64>,
    pub pair_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnerState {
    /// One entry per transition; point transitions stay at `[1, 1]`.
    Lui(Vec<LuiTransitionState>),
    Dirichlet(DirichletState),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnedModel {
    Interval(UncertainMdp),
    Point(Mdp),
}

impl LearnedModel {
    pub fn graph(&self) -> &Graph {
        match self {
            LearnedModel::Interval(m) => m.graph(),
            LearnedModel::Point(m) => m.graph(),
        }
    }

    /// Interval view; point estimates become point intervals.
    pub fn intervals(&self) -> UncertainMdp {
        match self {
            LearnedModel::Interval(m) => m.clone(),
            LearnedModel::Point(m) => m.with_values(m.values().iter().map(|&p| Interval::point(p)).collect()),
        }
    }
}

/// Initial learner state: the prior intervals or the prior pseudo-counts.
pub fn initial_state(config: &LearnerConfig, graph: &Arc<Graph>) -> Result<LearnerState, LearnError> {
    config.validate()?;
    Ok(match config.method {
        Method::Lui => {
            let prior = prior_on_graph(Arc::clone(graph), config.epsilon, config.prior_strength)?;
            LearnerState::Lui(
                prior
                    .umdp
                    .values()
                    .iter()
                    .zip(&prior.strengths)
                    .map(|(&interval, s)| LuiTransitionState {
                        interval,
                        strength: s.unwrap_or(config.prior_strength),
                    })
                    .collect(),
            )
        }
        _ => LearnerState::Dirichlet(DirichletState {
            alphas: vec![config.map_prior_alpha; graph.num_transitions()],
            pair_counts: vec![0; graph.num_choices()],
        }),
    })
}

/// Builds the model that `state` currently represents.
pub fn current_model(config: &LearnerConfig, graph: &Arc<Graph>, state: &LearnerState, t_k: u64) -> LearnedModel {
    match state {
        LearnerState::Lui(entries) => LearnedModel::Interval(Model::from_parts(
            Arc::clone(graph),
            entries.iter().map(|e| e.interval).collect(),
        )),
        LearnerState::Dirichlet(d) => dirichlet_model(config, graph, d, t_k),
    }
}

fn dirichlet_model(config: &LearnerConfig, graph: &Arc<Graph>, d: &DirichletState, t_k: u64) -> LearnedModel {
    let gamma_p = match config.method {
        Method::Pac => pac_error_budget(graph, config.gamma).gamma_p,
        _ => config.gamma,
    };
    let eps = config.epsilon;
    let mut points = Vec::with_capacity(graph.num_transitions());
    let mut intervals = Vec::with_capacity(graph.num_transitions());
    for c in 0..graph.num_choices() {
        let range = graph.transitions(c);
        if graph.is_deterministic(c) {
            points.push(1.0);
            intervals.push(Interval::point(1.0));
            continue;
        }
        let n = d.pair_counts[c];
        let alphas = &d.alphas[range.clone()];
        let estimate = mode_or_uniform(alphas, &vec![0; alphas.len()]);
        points.extend_from_slice(&estimate);
        if n == 0 {
            intervals.extend(range.map(|_| Interval::new(eps, 1.0 - eps)));
            continue;
        }
        match config.method {
            Method::Pac => intervals.extend(pac_intervals(&estimate, n, gamma_p, eps)),
            Method::Ucrl2 => intervals.extend(ucrl2_intervals(
                &estimate,
                graph.num_states(),
                graph.num_actions(),
                t_k,
                n,
                config.gamma,
                eps,
            )),
            _ => {}
        }
    }
    match config.method {
        Method::Map => LearnedModel::Point(Model::from_parts(Arc::clone(graph), points)),
        _ => LearnedModel::Interval(Model::from_parts(Arc::clone(graph), intervals)),
    }
}

/// Feeds one iteration's counts into the learner state and returns the new
/// state with the model it represents. `t_k` is the cumulative number of
/// environment steps so far.
pub fn learner_step(
    config: &LearnerConfig,
    graph: &Arc<Graph>,
    state: LearnerState,
    iteration_counts: &CountTable,
    t_k: u64,
) -> Result<(LearnerState, LearnedModel), LearnError> {
    if !iteration_counts.is_consistent(graph) {
        return Err(LearnError::Config("count table does not match the graph".into()));
    }
    let state = match state {
        LearnerState::Lui(mut entries) => {
            for c in 0..graph.num_choices() {
                let n = iteration_counts.pair(c);
                if n == 0 || graph.is_deterministic(c) {
                    continue;
                }
                let range = graph.transitions(c);
                let k: Vec<u64> = range.clone().map(|t| iteration_counts.transition(t)).collect();
                let posterior = lui_update(&entries[range.clone()], n, &k, config.strength_cap)?;
                entries[range].copy_from_slice(&posterior);
            }
            LearnerState::Lui(entries)
        }
        LearnerState::Dirichlet(mut d) => {
            for (a, &k) in d.alphas.iter_mut().zip(iteration_counts.transitions()) {
                *a += k as f64;
            }
            for (p, &n) in d.pair_counts.iter_mut().zip(iteration_counts.pairs()) {
                *p += n;
            }
            LearnerState::Dirichlet(d)
        }
    };
    let model = current_model(config, graph, &state, t_k);
    Ok((state, model))
}

/// A learner bound to one graph, owning its state and latest model.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    graph: Arc<Graph>,
    state: Option<LearnerState>,
    model: LearnedModel,
}

impl Learner {
    pub fn new(config: LearnerConfig, graph: Arc<Graph>) -> Result<Self, LearnError> {
        let state = initial_state(&config, &graph)?;
        let model = current_model(&config, &graph, &state, 1);
        Ok(Self {
            config,
            graph,
            state: Some(state),
            model,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn state(&self) -> &LearnerState {
        self.state.as_ref().expect("learner state present")
    }

    pub fn model(&self) -> &LearnedModel {
        &self.model
    }

    /// Interval model that exploration is optimistic about. For MAP this is
    /// the Hoeffding interval model around its own point estimates, since a
    /// point estimate leaves nothing to be optimistic about.
    pub fn exploration_model(&self) -> UncertainMdp {
        match (&self.model, self.state()) {
            (LearnedModel::Point(_), LearnerState::Dirichlet(d)) => {
                let pac = LearnerConfig {
                    method: Method::Pac,
                    ..self.config.clone()
                };
                dirichlet_model(&pac, &self.graph, d, 1).intervals()
            }
            (model, _) => model.intervals(),
        }
    }

    pub fn observe(&mut self, iteration_counts: &CountTable, t_k: u64) -> Result<&LearnedModel, LearnError> {
        let state = self.state.take().expect("learner state present");
        let (state, model) = match learner_step(&self.config, &self.graph, state.clone(), iteration_counts, t_k) {
            Ok(out) => out,
            Err(e) => {
                self.state = Some(state);
                return Err(e);
            }
        };
        self.state = Some(state);
        self.model = model;
        Ok(&self.model)
    }
}
