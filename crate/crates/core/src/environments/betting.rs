//! Betting game: six rounds of betting starting from ten coins.

use std::collections::{BTreeMap, VecDeque};

use crate::model::{Mdp, ModelBuilder};
use crate::spec::{Direction, Specification};

pub const ROUNDS: u32 = 6;
pub const START_COINS: u32 = 10;
pub const BETS: [u32; 5] = [0, 1, 2, 5, 10];

const COLLECT: usize = BETS.len();
const IDLE: usize = BETS.len() + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Play { round: u32, coins: u32 },
    Done { coins: u32 },
}

type Edge = (usize, usize, f64, Vec<(Node, f64)>);

/// Each round the player bets 0, 1, 2, 5 or 10 coins (at most what they hold);
/// a win with probability `win_prob` returns the stake plus an equal amount,
/// a loss forfeits it. After the last round the coins held are collected as
/// reward. The objective is the maximal expected reward.
pub fn build_betting_game(win_prob: f64) -> (Mdp, Specification) {
    assert!(win_prob > 0.0 && win_prob < 1.0, "win probability must lie in (0, 1)");
    let start = Node::Play {
        round: 0,
        coins: START_COINS,
    };
    let mut index = BTreeMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::from([start]);
    index.insert(start, 0);
    order.push(start);
    let mut edges: Vec<Edge> = Vec::new();
    while let Some(node) = queue.pop_front() {
        let s = index[&node];
        let outgoing = match node {
            Node::Play { round, coins } if round < ROUNDS => BETS
                .iter()
                .enumerate()
                .filter(|&(_, &bet)| bet <= coins)
                .map(|(a, &bet)| {
                    let next = |c| Node::Play {
                        round: round + 1,
                        coins: c,
                    };
                    let outcomes = if bet == 0 {
                        vec![(next(coins), 1.0)]
                    } else {
                        vec![(next(coins + bet), win_prob), (next(coins - bet), 1.0 - win_prob)]
                    };
                    (a, 0.0, outcomes)
                })
                .collect(),
            Node::Play { coins, .. } => vec![(COLLECT, coins as f64, vec![(Node::Done { coins }, 1.0)])],
            Node::Done { coins } => vec![(IDLE, 0.0, vec![(Node::Done { coins }, 1.0)])],
        };
        for (a, r, outcomes) in outgoing {
            for &(t, _) in &outcomes {
                if let std::collections::btree_map::Entry::Vacant(e) = index.entry(t) {
                    e.insert(order.len());
                    order.push(t);
                    queue.push_back(t);
                }
            }
            edges.push((s, a, r, outcomes));
        }
    }

    let labels = order
        .iter()
        .map(|n| match n {
            Node::Play { round, coins } => format!("r{round}c{coins}"),
            Node::Done { coins } => format!("done{coins}"),
        })
        .collect();
    let mut actions: Vec<String> = BETS.iter().map(|b| format!("bet{b}")).collect();
    actions.extend(["collect".to_string(), "idle".to_string()]);
    let mut b = ModelBuilder::new(order.len(), 0)
        .state_labels(labels)
        .action_labels(actions);
    for (s, a, r, outcomes) in edges {
        b.choice(s, a, r, outcomes.into_iter().map(|(t, p)| (index[&t], p)).collect());
    }
    let targets = order
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n, Node::Done { .. }))
        .map(|(i, _)| i);
    let spec = Specification::expected_reward(targets, Direction::Max);
    (b.build().expect("betting game is well formed"), spec)
}
