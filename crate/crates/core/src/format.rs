//! Line-oriented text format for explicit models.
//!
//! ```text
//! # comment
//! I s0
//! T s0 a1 s1 0.7          (MDP: state action successor probability)
//! T s0 a1 s1 0.6 0.8      (interval MDP: ... lower upper)
//! R s0 a1 2.5
//! ```
//!
//! Identifiers that are all non-negative integers are used as indices;
//! otherwise they are labels numbered in order of first appearance.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    validate_mdp, validate_umdp, Interval, Mdp, Model, ModelBuilder, UncertainMdp, PROBABILITY_TOLERANCE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

struct Record<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

/// Maps identifiers to dense indices.
struct Names {
    labels: Vec<String>,
    numeric: bool,
}

impl Names {
    fn new<'a>(tokens: impl Iterator<Item = &'a str>) -> Self {
        let tokens: Vec<&str> = tokens.collect();
        let numeric = tokens.iter().all(|t| t.parse::<usize>().is_ok());
        let mut labels = Vec::new();
        if numeric {
            let n = tokens
                .iter()
                .map(|t| t.parse::<usize>().unwrap() + 1)
                .max()
                .unwrap_or(0);
            labels = (0..n).map(|i| i.to_string()).collect();
        } else {
            let mut seen = HashMap::new();
            for t in tokens {
                if !seen.contains_key(t) {
                    seen.insert(t, labels.len());
                    labels.push(t.to_string());
                }
            }
        }
        Self { labels, numeric }
    }

    fn index(&self, token: &str) -> Option<usize> {
        if self.numeric {
            token.parse().ok()
        } else {
            self.labels.iter().position(|l| l == token)
        }
    }
}

fn parse_real(rec: &Record, i: usize, what: &str) -> Result<f64, ParseError> {
    rec.fields[i]
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(rec.line, format!("invalid {what} '{}'", rec.fields[i])))
}

fn parse_generic<T>(
    text: &str,
    arity: usize,
    value: impl Fn(&Record) -> Result<T, ParseError>,
) -> Result<Model<T>, ParseError> {
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    let mut initial = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let rec = Record { line, fields };
        match rec.fields[0] {
            "T" if rec.fields.len() == 4 + arity => transitions.push(rec),
            "R" if rec.fields.len() == 4 => rewards.push(rec),
            "I" if rec.fields.len() == 2 => {
                if initial.is_some() {
                    return Err(syntax(line, "initial state given twice"));
                }
                initial = Some(rec);
            }
            "T" | "R" | "I" => return Err(syntax(line, format!("wrong number of fields for '{}'", rec.fields[0]))),
            other => return Err(syntax(line, format!("unknown record '{other}'"))),
        }
    }
    if transitions.is_empty() {
        return Err(ParseError::Invalid("model has no transitions".into()));
    }

    let state_tokens = transitions
        .iter()
        .flat_map(|r| [r.fields[1], r.fields[3]])
        .chain(rewards.iter().map(|r| r.fields[1]))
        .chain(initial.iter().map(|r| r.fields[1]));
    let states = Names::new(state_tokens);
    let actions = Names::new(
        transitions
            .iter()
            .map(|r| r.fields[2])
            .chain(rewards.iter().map(|r| r.fields[2])),
    );
    let idx = |names: &Names, rec: &Record, i: usize| {
        names
            .index(rec.fields[i])
            .ok_or_else(|| syntax(rec.line, format!("unknown identifier '{}'", rec.fields[i])))
    };

    let mut choices: BTreeMap<(usize, usize), Vec<(usize, T)>> = BTreeMap::new();
    for rec in &transitions {
        let s = idx(&states, rec, 1)?;
        let a = idx(&actions, rec, 2)?;
        let succ = idx(&states, rec, 3)?;
        let v = value(rec)?;
        let list = choices.entry((s, a)).or_default();
        if list.iter().any(|(t, _)| *t == succ) {
            return Err(syntax(rec.line, "duplicate transition"));
        }
        list.push((succ, v));
    }
    let mut reward_of = HashMap::new();
    for rec in &rewards {
        let key = (idx(&states, rec, 1)?, idx(&actions, rec, 2)?);
        if !choices.contains_key(&key) {
            return Err(syntax(rec.line, "reward for a state-action pair without transitions"));
        }
        if reward_of.insert(key, parse_real(rec, 3, "reward")?).is_some() {
            return Err(syntax(rec.line, "duplicate reward"));
        }
    }
    let initial = match &initial {
        Some(rec) => idx(&states, rec, 1)?,
        None => 0,
    };

    let mut builder = ModelBuilder::new(states.labels.len(), initial);
    if !states.numeric {
        builder = builder.state_labels(states.labels.clone());
    }
    if !actions.numeric {
        builder = builder.action_labels(actions.labels.clone());
    }
    for ((s, a), outcomes) in choices {
        let r = reward_of.get(&(s, a)).copied().unwrap_or(0.0);
        builder.choice(s, a, r, outcomes);
    }
    builder.build().map_err(|e| ParseError::Invalid(e.to_string()))
}

/// Parses an MDP. Distributions summing to 1 within 1e-9 are renormalized
/// (rounding noise below 1e-12 is left as written); anything further off is
/// rejected.
pub fn parse_mdp(text: &str) -> Result<Mdp, ParseError> {
    let mdp = parse_generic(text, 1, |rec| parse_real(rec, 4, "probability"))?;
    let report = validate_mdp(&mdp);
    if !report.is_ok() {
        return Err(ParseError::Invalid(report.to_string()));
    }
    let g = mdp.graph();
    let mut values = mdp.values().to_vec();
    for c in 0..g.num_choices() {
        let range = g.transitions(c);
        let sum: f64 = values[range.clone()].iter().sum();
        debug_assert!((sum - 1.0).abs() <= PROBABILITY_TOLERANCE);
        if (sum - 1.0).abs() > 1e-12 {
            for v in &mut values[range] {
                *v /= sum;
            }
        }
    }
    Ok(mdp.with_values(values))
}

pub fn parse_umdp(text: &str) -> Result<UncertainMdp, ParseError> {
    let umdp = parse_generic(text, 2, |rec| {
        Ok(Interval::new(
            parse_real(rec, 4, "lower bound")?,
            parse_real(rec, 5, "upper bound")?,
        ))
    })?;
    let report = validate_umdp(&umdp);
    if !report.is_ok() {
        return Err(ParseError::Invalid(report.to_string()));
    }
    Ok(umdp)
}

fn write_generic<T>(model: &Model<T>, value: impl Fn(&T) -> String) -> String {
    let g = model.graph();
    let mut out = String::new();
    writeln!(out, "I {}", g.state_label(g.initial_state())).unwrap();
    for c in 0..g.num_choices() {
        let s = g.state_label(g.choice_state(c));
        let a = g.action_label(g.choice_action(c));
        for (succ, v) in model.outcomes(c) {
            writeln!(out, "T {s} {a} {} {}", g.state_label(succ), value(v)).unwrap();
        }
        if g.reward(c) != 0.0 {
            writeln!(out, "R {s} {a} {}", g.reward(c)).unwrap();
        }
    }
    out
}

pub fn write_mdp(mdp: &Mdp) -> String {
    write_generic(mdp, |p| p.to_string())
}

pub fn write_umdp(umdp: &UncertainMdp) -> String {
    write_generic(umdp, |iv| format!("{} {}", iv.lower, iv.upper))
}
