//! Benchmark environments and the changing-environment wrapper.

mod aircraft;
mod bandit;
mod betting;
mod chain;
mod grid;

pub use aircraft::{build_aircraft, build_aircraft_with, AircraftLayout};
pub use bandit::build_bandit;
pub use betting::build_betting_game;
pub use chain::{build_chain, build_swapped_chain};
pub use grid::{build_grid, build_grid_with, GridLayout};

use thiserror::Error;

use crate::exploration::{sample_successor, ExperimentRng, SamplingOracle};
use crate::model::{Graph, Mdp, ModelBuilder, StateId};
use crate::spec::{Direction, Specification};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("layout line {line}: {message}")]
    Layout { line: usize, message: String },
    #[error("switching environments must share states, support and rewards")]
    GraphMismatch,
}

/// A value known in closed form, with where it comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub value: f64,
    pub provenance: &'static str,
}

#[derive(Debug, Clone)]
pub struct EnvironmentSpecSheet {
    pub name: &'static str,
    pub variant: Option<&'static str>,
    pub parameters: String,
    pub mdp: Mdp,
    pub spec: Specification,
    pub known_optimum: Option<KnownOptimum>,
}

impl EnvironmentSpecSheet {
    fn new(name: &'static str, parameters: String, (mdp, spec): (Mdp, Specification)) -> Self {
        Self {
            name,
            variant: None,
            parameters,
            mdp,
            spec,
            known_optimum: None,
        }
    }

    fn variant(mut self, variant: &'static str) -> Self {
        self.variant = Some(variant);
        self
    }
}

pub const DEFAULT_CHAIN_STATES: usize = 30;
pub const FAVOURABLE_WIN_PROBABILITY: f64 = 0.8;
pub const UNFAVOURABLE_WIN_PROBABILITY: f64 = 0.2;

/// Names accepted by [`build_named`].
pub const ENVIRONMENT_NAMES: [&str; 8] = [
    "chain",
    "chain_swapped",
    "betting_favourable",
    "betting_unfavourable",
    "grid",
    "bandit",
    "aircraft",
    "example",
];

fn chain_sheet(n: usize) -> EnvironmentSpecSheet {
    EnvironmentSpecSheet::new("chain", format!("n_states={n}"), build_chain(n))
}

fn betting_sheet(favourable: bool) -> EnvironmentSpecSheet {
    let (variant, w) = if favourable {
        ("favourable", FAVOURABLE_WIN_PROBABILITY)
    } else {
        ("unfavourable", UNFAVOURABLE_WIN_PROBABILITY)
    };
    EnvironmentSpecSheet::new("betting_game", format!("win_probability={w}"), build_betting_game(w)).variant(variant)
}

fn bandit_sheet() -> EnvironmentSpecSheet {
    let mut sheet = EnvironmentSpecSheet::new("bandit", "arms=99".into(), build_bandit());
    sheet.known_optimum = Some(KnownOptimum {
        value: 0.99,
        provenance: "success probability of the best arm",
    });
    sheet
}

/// The benchmark suite: chain, both betting games, grid, bandit and aircraft.
pub fn catalog() -> Vec<EnvironmentSpecSheet> {
    vec![
        chain_sheet(DEFAULT_CHAIN_STATES),
        betting_sheet(true),
        betting_sheet(false),
        EnvironmentSpecSheet::new("grid", "size=10x10 layout=grid.txt".into(), build_grid()),
        bandit_sheet(),
        EnvironmentSpecSheet::new("aircraft", AircraftLayout::bundled().to_string(), build_aircraft()),
    ]
}

/// Builds an environment by its configuration name; `chain_states` sizes the
/// chain variants.
pub fn build_named(name: &str, chain_states: usize) -> Option<EnvironmentSpecSheet> {
    Some(match name {
        "chain" => chain_sheet(chain_states),
        "chain_swapped" => EnvironmentSpecSheet::new(
            "chain",
            format!("n_states={chain_states}"),
            build_swapped_chain(chain_states),
        )
        .variant("swapped"),
        "betting_favourable" => betting_sheet(true),
        "betting_unfavourable" => betting_sheet(false),
        "grid" => EnvironmentSpecSheet::new("grid", "size=10x10 layout=grid.txt".into(), build_grid()),
        "bandit" => bandit_sheet(),
        "aircraft" => EnvironmentSpecSheet::new("aircraft", AircraftLayout::bundled().to_string(), build_aircraft()),
        "example" => {
            let mut sheet = EnvironmentSpecSheet::new("example", "four states".into(), build_example());
            sheet.known_optimum = Some(KnownOptimum {
                value: 0.7,
                provenance: "probability of the better branch",
            });
            sheet
        }
        _ => return None,
    })
}

/// The four-state example: from `s0`, `a1` reaches `s1` with 0.7 and `s2`
/// with 0.3; `a2` reaches `s2` with 0.1 and `s3` with 0.9. The target is `s1`.
pub fn build_example() -> (Mdp, Specification) {
    let mut b = ModelBuilder::new(4, 0)
        .state_labels(vec!["s0".into(), "s1".into(), "s2".into(), "s3".into()])
        .action_labels(vec!["a1".into(), "a2".into()]);
    b.choice(0, 0, 0.0, vec![(1, 0.7), (2, 0.3)]);
    b.choice(0, 1, 0.0, vec![(2, 0.1), (3, 0.9)]);
    for s in 1..4 {
        b.choice(s, 0, 0.0, vec![(s, 1.0)]);
    }
    let mdp = b.build().expect("example model is well formed");
    (mdp, Specification::reach([1], Direction::Max))
}

/// Two true MDPs over one graph; the second takes over after a number of
/// started trajectories.
#[derive(Debug, Clone)]
pub struct SwitchingEnvironment {
    env_a: Mdp,
    env_b: Mdp,
    switch_after: usize,
}

impl SwitchingEnvironment {
    pub fn new(env_a: Mdp, env_b: Mdp, switch_after: usize) -> Result<Self, EnvironmentError> {
        if env_a.graph() != env_b.graph() {
            return Err(EnvironmentError::GraphMismatch);
        }
        Ok(Self {
            env_a,
            env_b,
            switch_after,
        })
    }

    pub fn switch_after(&self) -> usize {
        self.switch_after
    }

    pub fn before(&self) -> &Mdp {
        &self.env_a
    }

    pub fn after(&self) -> &Mdp {
        &self.env_b
    }
}

/// Serves the first environment for the first `switch_after` trajectories.
#[derive(Debug, Clone)]
pub struct SwitchingOracle {
    env: SwitchingEnvironment,
    started: usize,
}

pub fn switching_oracle(env: SwitchingEnvironment) -> SwitchingOracle {
    SwitchingOracle { env, started: 0 }
}

impl SwitchingOracle {
    pub fn trajectories_started(&self) -> usize {
        self.started
    }

    /// The environment serving the trajectory with this 1-based number.
    fn current(&self, trajectory: usize) -> &Mdp {
        if trajectory <= self.env.switch_after {
            &self.env.env_a
        } else {
            &self.env.env_b
        }
    }
}

impl SamplingOracle for SwitchingOracle {
    fn graph(&self) -> &Graph {
        self.env.env_a.graph()
    }

    fn begin_trajectory(&mut self) {
        self.started += 1;
    }

    fn sample(&mut self, choice: usize, rng: &mut ExperimentRng) -> StateId {
        let mdp = self.current(self.started);
        sample_successor(mdp, choice, rng)
    }

    fn active_model(&self) -> &Mdp {
        self.current(self.started + 1)
    }
}
