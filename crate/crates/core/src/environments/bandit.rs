//! A 99-armed bandit with success probabilities 0.01, 0.02, ..., 0.99.

use crate::model::{Mdp, ModelBuilder};
use crate::spec::{Direction, Specification};

pub const ARMS: usize = 99;

/// State 0 chooses an arm; state 1 is success, state 2 failure.
pub fn build_bandit() -> (Mdp, Specification) {
    let mut b = ModelBuilder::new(3, 0).state_labels(vec!["start".into(), "success".into(), "failure".into()]);
    for arm in 0..ARMS {
        let p = (arm + 1) as f64 / 100.0;
        b.choice(0, arm, 0.0, vec![(1, p), (2, 1.0 - p)]);
    }
    b.choice(1, 0, 0.0, vec![(1, 1.0)]);
    b.choice(2, 0, 0.0, vec![(2, 1.0)]);
    let mdp = b.build().expect("bandit is well formed");
    (mdp, Specification::reach([1], Direction::Max))
}
