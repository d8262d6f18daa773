//! Experiment configuration files.
//!
//! ```text
//! [experiment]
//! environment = betting_favourable
//! trajectories = 1000
//!
//! [learner.LUI]
//! method = lui
//! prior_strength = 5,10
//! ```
//!
//! Every `[learner.NAME]` section adds one learner; its `method` defaults to
//! the name when the name is a method. Omitted keys take their defaults and
//! unknown keys are rejected.

use std::fmt::Write;
use std::str::FromStr;

use ramdp::exploration::DoublingRule;
use ramdp::harness::{ExperimentConfig, ExplorationMode, SwitchConfig};
use ramdp::learning::{LearnerConfig, Method, Strength};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key '{key}' in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: invalid value for '{key}': {message}")]
    Invalid { line: usize, key: String, message: String },
    #[error("missing required key '{key}' in [{section}]")]
    Missing { section: String, key: String },
    #[error("{0}")]
    Semantic(String),
}

const EXPERIMENT_KEYS: [&str; 14] = [
    "environment",
    "chain_states",
    "trajectories",
    "horizon",
    "repetitions",
    "seed",
    "xi",
    "exploration",
    "doubling",
    "tolerance",
    "max_iterations",
    "switch_environment",
    "switch_after",
    "timing",
];

const LEARNER_KEYS: [&str; 6] = [
    "method",
    "epsilon",
    "prior_strength",
    "strength_cap",
    "map_prior_alpha",
    "gamma",
];

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

struct Section<'a> {
    line: usize,
    name: &'a str,
    entries: Vec<Entry<'a>>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&Entry<'a>> {
        self.entries.iter().find(|e| e.key == key)
    }
}

fn parse_value<T: FromStr>(entry: &Entry) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    entry.value.parse().map_err(|e: T::Err| ConfigError::Invalid {
        line: entry.line,
        key: entry.key.to_string(),
        message: e.to_string(),
    })
}

fn invalid(entry: &Entry, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        line: entry.line,
        key: entry.key.to_string(),
        message: message.into(),
    }
}

fn parse_strength(entry: &Entry) -> Result<Strength, ConfigError> {
    let (lo, hi) = entry
        .value
        .split_once(',')
        .ok_or_else(|| invalid(entry, "expected 'lo,hi'"))?;
    let parse = |s: &str| s.trim().parse::<u64>().map_err(|e| invalid(entry, e.to_string()));
    Ok(Strength::new(parse(lo)?, parse(hi)?))
}

fn parse_bool(entry: &Entry) -> Result<bool, ConfigError> {
    match entry.value {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(invalid(entry, "expected true or false")),
    }
}

fn split_sections(text: &str) -> Result<Vec<Section<'_>>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') || content.starts_with(';') {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.push(Section {
                line,
                name,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected 'key = value', found '{content}'"),
        })?;
        let section = sections.last_mut().ok_or_else(|| ConfigError::Syntax {
            line,
            message: "key outside of any section".into(),
        })?;
        let key = key.trim();
        if section.get(key).is_some() {
            return Err(ConfigError::Syntax {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        section.entries.push(Entry {
            line,
            key,
            value: value.trim(),
        });
    }
    Ok(sections)
}

fn check_keys(section: &Section, allowed: &[&str]) -> Result<(), ConfigError> {
    match section.entries.iter().find(|e| !allowed.contains(&e.key)) {
        Some(e) => Err(ConfigError::UnknownKey {
            line: e.line,
            section: section.name.to_string(),
            key: e.key.to_string(),
        }),
        None => Ok(()),
    }
}

fn parse_learner(section: &Section, name: &str) -> Result<LearnerConfig, ConfigError> {
    check_keys(section, &LEARNER_KEYS)?;
    let method = match section.get("method") {
        Some(e) => parse_value::<Method>(e)?,
        None => name.parse::<Method>().map_err(|_| ConfigError::Missing {
            section: section.name.to_string(),
            key: "method".into(),
        })?,
    };
    let mut learner = LearnerConfig::new(method).named(name);
    for e in &section.entries {
        match e.key {
            "epsilon" => learner.epsilon = parse_value(e)?,
            "prior_strength" => learner.prior_strength = parse_strength(e)?,
            "strength_cap" => {
                learner.strength_cap = match e.value {
                    "none" => None,
                    _ => Some(parse_strength(e)?),
                }
            }
            "map_prior_alpha" => learner.map_prior_alpha = parse_value(e)?,
            "gamma" => learner.gamma = parse_value(e)?,
            _ => {}
        }
    }
    learner
        .validate()
        .map_err(|err| ConfigError::Semantic(format!("[{}] (line {}): {err}", section.name, section.line)))?;
    Ok(learner)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = split_sections(text)?;
    let mut experiment = None;
    let mut learners = Vec::new();
    for section in &sections {
        if section.name == "experiment" {
            experiment = Some(section);
        } else if let Some(name) = section.name.strip_prefix("learner.") {
            if name.is_empty() {
                return Err(ConfigError::Syntax {
                    line: section.line,
                    message: "learner section needs a name".into(),
                });
            }
            learners.push(parse_learner(section, name)?);
        } else {
            return Err(ConfigError::Syntax {
                line: section.line,
                message: format!("unknown section [{}]", section.name),
            });
        }
    }
    let section = experiment.ok_or_else(|| ConfigError::Missing {
        section: "experiment".into(),
        key: "environment".into(),
    })?;
    check_keys(section, &EXPERIMENT_KEYS)?;
    let environment = section.get("environment").ok_or_else(|| ConfigError::Missing {
        section: "experiment".into(),
        key: "environment".into(),
    })?;
    if learners.is_empty() {
        return Err(ConfigError::Semantic(
            "at least one [learner.NAME] section is required".into(),
        ));
    }
    let mut cfg = ExperimentConfig::new(environment.value, learners);
    let mut switch_environment = None;
    let mut switch_after = None;
    for e in &section.entries {
        match e.key {
            "chain_states" => cfg.chain_states = parse_value(e)?,
            "trajectories" => cfg.trajectories = parse_value(e)?,
            "horizon" => {
                cfg.horizon = match e.value {
                    "auto" => None,
                    _ => Some(parse_value(e)?),
                }
            }
            "repetitions" => cfg.repetitions = parse_value(e)?,
            "seed" => cfg.seed = parse_value(e)?,
            "xi" => cfg.xi = parse_value(e)?,
            "exploration" => {
                cfg.exploration = match e.value {
                    "optimistic" => ExplorationMode::Optimistic,
                    "uniform" => ExplorationMode::Uniform,
                    _ => return Err(invalid(e, "expected optimistic or uniform")),
                }
            }
            "doubling" => {
                cfg.doubling = match e.value {
                    "pairs" => DoublingRule::PairCounts,
                    "pairs_or_transitions" => DoublingRule::PairOrTransitionCounts,
                    _ => return Err(invalid(e, "expected pairs or pairs_or_transitions")),
                }
            }
            "tolerance" => cfg.solver.tolerance = parse_value(e)?,
            "max_iterations" => cfg.solver.max_iterations = parse_value(e)?,
            "switch_environment" => switch_environment = Some(e),
            "switch_after" => switch_after = Some(e),
            "timing" => cfg.timing = parse_bool(e)?,
            _ => {}
        }
    }
    cfg.switching = match (switch_environment, switch_after) {
        (Some(env), Some(after)) => Some(SwitchConfig {
            environment: env.value.to_string(),
            after: parse_value(after)?,
        }),
        (None, None) => None,
        (Some(_), None) => {
            return Err(ConfigError::Missing {
                section: "experiment".into(),
                key: "switch_after".into(),
            })
        }
        (None, Some(_)) => {
            return Err(ConfigError::Missing {
                section: "experiment".into(),
                key: "switch_environment".into(),
            })
        }
    };
    cfg.validate().map_err(|e| ConfigError::Semantic(e.to_string()))?;
    Ok(cfg)
}

/// Writes every key explicitly; [`parse_config`] reads it back unchanged.
pub fn write_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::from("[experiment]\n");
    let mut kv = |key: &str, value: String| {
        writeln!(out, "{key} = {value}").expect("writing to a string");
    };
    kv("environment", cfg.environment.clone());
    kv("chain_states", cfg.chain_states.to_string());
    kv("trajectories", cfg.trajectories.to_string());
    kv("horizon", cfg.horizon.map_or("auto".into(), |h| h.to_string()));
    kv("repetitions", cfg.repetitions.to_string());
    kv("seed", cfg.seed.to_string());
    kv("xi", cfg.xi.to_string());
    kv(
        "exploration",
        match cfg.exploration {
            ExplorationMode::Optimistic => "optimistic",
            ExplorationMode::Uniform => "uniform",
        }
        .into(),
    );
    kv(
        "doubling",
        match cfg.doubling {
            DoublingRule::PairCounts => "pairs",
            DoublingRule::PairOrTransitionCounts => "pairs_or_transitions",
        }
        .into(),
    );
    kv("tolerance", cfg.solver.tolerance.to_string());
    kv("max_iterations", cfg.solver.max_iterations.to_string());
    if let Some(sw) = &cfg.switching {
        kv("switch_environment", sw.environment.clone());
        kv("switch_after", sw.after.to_string());
    }
    kv("timing", cfg.timing.to_string());
    for l in &cfg.learners {
        let strength = |s: Strength| format!("{},{}", s.lo, s.hi);
        write!(
            out,
            "\n[learner.{}]\nmethod = {}\nepsilon = {}\nprior_strength = {}\nstrength_cap = {}\nmap_prior_alpha = {}\ngamma = {}\n",
            l.name,
            l.method.label().to_ascii_lowercase(),
            l.epsilon,
            strength(l.prior_strength),
            l.strength_cap.map_or("none".into(), strength),
            l.map_prior_alpha,
            l.gamma,
        )
        .expect("writing to a string");
    }
    out
}
