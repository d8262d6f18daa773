#![allow(dead_code)]

use ramdp::model::{Interval, Mdp, ModelBuilder, UncertainMdp};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random MDP with 2..=max_states states, 1..=3 actions per state and
/// random supports; rewards are drawn from {0, 1, 2}.
pub fn random_mdp(seed: u64, max_states: usize) -> Mdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_states);
    let mut b = ModelBuilder::new(n, 0);
    for s in 0..n {
        for a in 0..rng.gen_range(1..=3usize) {
            let mut succ: Vec<usize> = (0..n).collect();
            succ.shuffle(&mut rng);
            succ.truncate(rng.gen_range(1..=n.min(4)));
            let weights: Vec<f64> = succ.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let reward = rng.gen_range(0..3) as f64;
            b.choice(
                s,
                a,
                reward,
                succ.into_iter().zip(weights.iter().map(|w| w / total)).collect(),
            );
        }
    }
    b.build().expect("random model is well formed")
}

/// Interval model whose intervals contain the true probabilities.
pub fn containing_umdp(mdp: &Mdp, seed: u64) -> UncertainMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let g = mdp.graph();
    let mut values = vec![Interval::point(1.0); g.num_transitions()];
    for c in 0..g.num_choices() {
        if g.is_deterministic(c) {
            continue;
        }
        for t in g.transitions(c) {
            let p = mdp.values()[t];
            let lower = (p - rng.gen_range(0.0..0.3)).max(p * 0.01);
            let upper = (p + rng.gen_range(0.0..0.3)).min(1.0);
            values[t] = Interval::new(lower, upper);
        }
    }
    mdp.with_values(values)
}

pub fn random_targets(seed: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a59);
    let mut states: Vec<usize> = (0..n).collect();
    states.shuffle(&mut rng);
    states.truncate(rng.gen_range(1..=n.div_ceil(2)));
    states
}

/// The same model with state `s` renamed to `perm[s]`.
pub fn permute_states(mdp: &Mdp, perm: &[usize]) -> Mdp {
    let g = mdp.graph();
    let mut b = ModelBuilder::new(g.num_states(), perm[g.initial_state()]);
    for c in 0..g.num_choices() {
        let outcomes = mdp.outcomes(c).map(|(s, &p)| (perm[s], p)).collect();
        b.choice(perm[g.choice_state(c)], g.choice_action(c), g.reward(c), outcomes);
    }
    b.build().expect("permuted model is well formed")
}
