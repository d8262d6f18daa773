//! Chain: progress towards the last state or fall back to the first.

use crate::model::{Mdp, ModelBuilder};
use crate::spec::{Direction, Specification};

const ACTIONS: [(f64, f64); 3] = [(0.95, 0.05), (0.05, 0.95), (0.5, 0.5)];

fn chain(n: usize, swapped: bool) -> (Mdp, Specification) {
    assert!(n >= 2, "a chain needs at least two states");
    let mut b = ModelBuilder::new(n, 0).action_labels(vec!["a".into(), "b".into(), "c".into()]);
    for s in 0..n - 1 {
        for (a, &(advance, reset)) in ACTIONS.iter().enumerate() {
            let (advance, reset) = if swapped && a < 2 {
                (reset, advance)
            } else {
                (advance, reset)
            };
            b.choice(s, a, 1.0, vec![(s + 1, advance), (0, reset)]);
        }
    }
    b.choice(n - 1, 0, 1.0, vec![(n - 1, 1.0)]);
    let mdp = b.build().expect("chain is well formed");
    (mdp, Specification::expected_reward([n - 1], Direction::Min))
}

/// `n` states in a line. Action `a` advances with 0.95 and resets to the
/// first state otherwise, `b` advances with 0.05, `c` with 0.5. Every action
/// costs 1; the objective is the minimal expected cost to reach the last state.
pub fn build_chain(n: usize) -> (Mdp, Specification) {
    chain(n, false)
}

/// The chain with the probabilities of actions `a` and `b` exchanged.
pub fn build_swapped_chain(n: usize) -> (Mdp, Specification) {
    chain(n, true)
}
