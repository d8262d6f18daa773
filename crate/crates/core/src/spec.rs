//! Objectives: reachability, reach-avoid and expected reward to a target.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::StateId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("target set is empty")]
    EmptyTargets,
    #[error("state {0} is both a target and an avoid state")]
    Overlap(StateId),
    #[error("state {state} out of range for a model with {num_states} states")]
    StateOutOfRange { state: StateId, num_states: usize },
    #[error("avoid states are only allowed for reach-avoid objectives")]
    UnexpectedAvoid,
    #[error("unknown objective '{0}' (expected Pmax, Pmin, Rmax or Rmin)")]
    UnknownObjective(String),
    #[error("unknown semantics '{0}' (expected exact, optimistic or pessimistic)")]
    UnknownSemantics(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Reach,
    ReachAvoid,
    ExpectedReward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Max => a > b,
            Direction::Min => a < b,
        }
    }

    pub fn worst(self) -> f64 {
        match self {
            Direction::Max => f64::NEG_INFINITY,
            Direction::Min => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    Exact,
    Optimistic,
    Pessimistic,
}

impl FromStr for Semantics {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Semantics::Exact),
            "optimistic" => Ok(Semantics::Optimistic),
            "pessimistic" => Ok(Semantics::Pessimistic),
            _ => Err(SpecError::UnknownSemantics(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Specification {
    pub kind: Objective,
    pub targets: BTreeSet<StateId>,
    pub avoid: BTreeSet<StateId>,
    pub direction: Direction,
    pub semantics: Semantics,
}

impl Specification {
    pub fn reach(targets: impl IntoIterator<Item = StateId>, direction: Direction) -> Self {
        Self {
            kind: Objective::Reach,
            targets: targets.into_iter().collect(),
            avoid: BTreeSet::new(),
            direction,
            semantics: Semantics::Exact,
        }
    }

    pub fn reach_avoid(
        targets: impl IntoIterator<Item = StateId>,
        avoid: impl IntoIterator<Item = StateId>,
        direction: Direction,
    ) -> Self {
        Self {
            kind: Objective::ReachAvoid,
            targets: targets.into_iter().collect(),
            avoid: avoid.into_iter().collect(),
            direction,
            semantics: Semantics::Exact,
        }
    }

    pub fn expected_reward(targets: impl IntoIterator<Item = StateId>, direction: Direction) -> Self {
        Self {
            kind: Objective::ExpectedReward,
            targets: targets.into_iter().collect(),
            avoid: BTreeSet::new(),
            direction,
            semantics: Semantics::Exact,
        }
    }

    pub fn with_semantics(mut self, semantics: Semantics) -> Self {
        self.semantics = semantics;
        self
    }

    /// Builds a specification from a short objective name (`Pmax`, `Pmin`,
    /// `Rmax`, `Rmin`); a nonempty avoid set turns reachability into reach-avoid.
    pub fn from_objective(
        name: &str,
        targets: impl IntoIterator<Item = StateId>,
        avoid: impl IntoIterator<Item = StateId>,
    ) -> Result<Self, SpecError> {
        let avoid: BTreeSet<_> = avoid.into_iter().collect();
        let (reward, direction) = match name.to_ascii_lowercase().as_str() {
            "pmax" => (false, Direction::Max),
            "pmin" => (false, Direction::Min),
            "rmax" => (true, Direction::Max),
            "rmin" => (true, Direction::Min),
            _ => return Err(SpecError::UnknownObjective(name.to_string())),
        };
        if reward {
            if !avoid.is_empty() {
                return Err(SpecError::UnexpectedAvoid);
            }
            Ok(Self::expected_reward(targets, direction))
        } else if avoid.is_empty() {
            Ok(Self::reach(targets, direction))
        } else {
            Ok(Self::reach_avoid(targets, avoid, direction))
        }
    }

    pub fn is_reward(&self) -> bool {
        self.kind == Objective::ExpectedReward
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.targets.contains(&s)
    }

    pub fn is_avoid(&self, s: StateId) -> bool {
        self.avoid.contains(&s)
    }

    pub fn validate(&self, num_states: usize) -> Result<(), SpecError> {
        if self.targets.is_empty() {
            return Err(SpecError::EmptyTargets);
        }
        if self.kind != Objective::ReachAvoid && !self.avoid.is_empty() {
            return Err(SpecError::UnexpectedAvoid);
        }
        if let Some(&s) = self.targets.intersection(&self.avoid).next() {
            return Err(SpecError::Overlap(s));
        }
        if let Some(&state) = self.targets.iter().chain(&self.avoid).find(|&&s| s >= num_states) {
            return Err(SpecError::StateOutOfRange { state, num_states });
        }
        Ok(())
    }
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::Max => "max",
            Direction::Min => "min",
        };
        let set = |s: &BTreeSet<StateId>| s.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let op = if self.is_reward() { 'R' } else { 'P' };
        write!(f, "{op}{dir} [F {{{}}}", set(&self.targets))?;
        if !self.avoid.is_empty() {
            write!(f, " avoiding {{{}}}", set(&self.avoid))?;
        }
        f.write_str("]")?;
        match self.semantics {
            Semantics::Exact => Ok(()),
            Semantics::Optimistic => f.write_str(" optimistic"),
            Semantics::Pessimistic => f.write_str(" pessimistic"),
        }
    }
}
