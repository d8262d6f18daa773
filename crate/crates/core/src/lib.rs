//! Learning unknown MDPs through interval MDPs.
//!
//! A true [`Mdp`](model::Mdp) is only accessible through sampled trajectories.
//! Learners turn transition counts into an [`UncertainMdp`](model::UncertainMdp)
//! (or a point estimate), robust value iteration computes a policy and its
//! guaranteed value on the learned model, and the harness tracks how that
//! policy performs on the true model as data accumulates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod environments;
pub mod exploration;
pub mod format;
pub mod graph_analysis;
pub mod harness;
pub mod learning;
pub mod model;
pub mod solver;
pub mod spec;

pub use graph_analysis::{classify_states, StateClassification};
pub use learning::{LearnedModel, Learner, LearnerConfig, Method, Strength};
pub use model::{Interval, Mdp, Policy, UncertainMdp};
pub use solver::{SolveResult, SolverOptions};
pub use spec::{Direction, Objective, Semantics, Specification};
