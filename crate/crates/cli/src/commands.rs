use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ramdp::environments::{build_named, catalog, EnvironmentSpecSheet};
use ramdp::format::{parse_mdp, parse_umdp, write_mdp};
use ramdp::harness::{aggregate, format_real, run_experiment, write_aggregate, write_records, HarnessError};
use ramdp::model::{Graph, Interval, Policy, UncertainMdp};
use ramdp::solver::{exact_value_iteration, robust_value_iteration, SolveResult, SolverOptions};
use ramdp::spec::{Direction, Objective};
use ramdp::{Semantics, Specification};
use thiserror::Error;

use crate::config::{parse_config, write_config};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, write: impl FnOnce(&mut fs::File) -> Result<(), HarnessError>) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    write(&mut file).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// Runs an experiment and writes `records.csv`, `aggregate.csv` and the
/// effective `run.cfg` into the output directory.
pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let text = read(&args.config)?;
    let mut cfg = parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let experiment = cfg.prepare().map_err(|e| CliError::Config(e.to_string()))?;
    let output = run_experiment(&experiment, args.workers).map_err(|e| CliError::Runtime(e.to_string()))?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::Runtime(format!("{}: {e}", args.out.display())))?;
    fs::write(args.out.join("run.cfg"), write_config(&cfg))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.out.display())))?;
    let records_path = args.out.join("records.csv");
    write_file(&records_path, |f| write_records(f, &output.records))?;
    println!("wrote {} ({} records)", records_path.display(), output.records.len());

    for f in &output.failures {
        eprintln!("repetition {} of {} failed: {}", f.repetition, f.learner, f.error);
    }
    if cfg.repetitions < 2 {
        println!("single repetition: no aggregate written");
    } else {
        let rows = aggregate(&output.records).map_err(|e| CliError::Runtime(e.to_string()))?;
        let aggregate_path = args.out.join("aggregate.csv");
        write_file(&aggregate_path, |f| write_aggregate(f, &rows))?;
        println!("wrote {} ({} rows)", aggregate_path.display(), rows.len());
    }
    if !output.failures.is_empty() {
        eprintln!(
            "{} of {} repetitions failed and were excluded",
            output.failures.len(),
            cfg.repetitions * cfg.learners.len()
        );
    }
    Ok(())
}

pub struct SolveArgs {
    pub model: PathBuf,
    pub spec: String,
    pub targets: Vec<String>,
    pub avoid: Vec<String>,
    pub semantics: Option<String>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub policy: Option<PathBuf>,
}

enum ParsedModel {
    Point(ramdp::Mdp),
    Interval(UncertainMdp),
}

/// Interval files carry two numbers per transition record.
fn parse_model(text: &str) -> Result<ParsedModel, CliError> {
    let interval = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>())
        .find(|f| f.first() == Some(&"T"))
        .is_some_and(|f| f.len() == 6);
    let parsed = if interval {
        parse_umdp(text).map(ParsedModel::Interval)
    } else {
        parse_mdp(text).map(ParsedModel::Point)
    };
    parsed.map_err(|e| CliError::Config(e.to_string()))
}

fn resolve_states(graph: &Graph, tokens: &[String], what: &str) -> Result<BTreeSet<usize>, CliError> {
    tokens
        .iter()
        .map(|t| {
            graph
                .state_index(t)
                .or_else(|| {
                    t.parse::<usize>()
                        .ok()
                        .filter(|&i| i < graph.num_states() && !graph.has_state_labels())
                })
                .ok_or_else(|| CliError::Config(format!("unknown {what} state '{t}'")))
        })
        .collect()
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let model = parse_model(&read(&args.model)?)?;
    let graph = match &model {
        ParsedModel::Point(m) => m.graph(),
        ParsedModel::Interval(m) => m.graph(),
    };
    if args.targets.is_empty() {
        return Err(CliError::Usage("--targets needs at least one state".into()));
    }
    let targets = resolve_states(graph, &args.targets, "target")?;
    let avoid = resolve_states(graph, &args.avoid, "avoid")?;
    let semantics = match &args.semantics {
        Some(s) => s.parse::<Semantics>().map_err(|e| CliError::Usage(e.to_string()))?,
        None => match model {
            ParsedModel::Point(_) => Semantics::Exact,
            ParsedModel::Interval(_) => Semantics::Pessimistic,
        },
    };
    let spec = Specification::from_objective(&args.spec, targets, avoid)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .with_semantics(semantics);
    spec.validate(graph.num_states())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let options = SolverOptions {
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
    };
    let result: SolveResult = match (&model, semantics) {
        (ParsedModel::Point(m), Semantics::Exact) => exact_value_iteration(m, &spec, options),
        (ParsedModel::Point(m), _) => {
            let points = m.values().iter().map(|&p| Interval::point(p)).collect();
            robust_value_iteration(&m.with_values(points), &spec, options)
        }
        (ParsedModel::Interval(_), Semantics::Exact) => {
            return Err(CliError::Usage(
                "exact semantics needs a point model; use optimistic or pessimistic".into(),
            ))
        }
        (ParsedModel::Interval(u), _) => robust_value_iteration(u, &spec, options),
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    if !result.converged {
        log::warn!(
            "value iteration stopped after {} sweeps with residual {}",
            result.iterations,
            result.residual
        );
    }
    println!("{}", format_real(result.values[graph.initial_state()]));
    if let Some(path) = &args.policy {
        fs::write(path, policy_text(graph, &result.policy))
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn policy_text(graph: &Graph, policy: &Policy) -> String {
    (0..graph.num_states())
        .map(|s| {
            let action = policy
                .deterministic_action(s)
                .map_or_else(|| "-".to_string(), |a| graph.action_label(a));
            format!("{} {action}\n", graph.state_label(s))
        })
        .collect()
}

fn objective_name(spec: &Specification) -> String {
    let op = match spec.kind {
        Objective::ExpectedReward => 'R',
        Objective::Reach | Objective::ReachAvoid => 'P',
    };
    let dir = match spec.direction {
        Direction::Max => "max",
        Direction::Min => "min",
    };
    format!("{op}{dir}")
}

fn sheet_row(sheet: &EnvironmentSpecSheet) -> String {
    let g = sheet.mdp.graph();
    let mut row = format!(
        "{} {} states {} transitions",
        sheet.name,
        g.num_states(),
        g.num_transitions()
    );
    if let Some(v) = sheet.variant {
        row.push_str(&format!(" variant={v}"));
    }
    row.push_str(&format!(
        " objective={} targets={} avoid={} {}",
        objective_name(&sheet.spec),
        sheet.spec.targets.len(),
        sheet.spec.avoid.len(),
        sheet.parameters
    ));
    if let Some(opt) = &sheet.known_optimum {
        row.push_str(&format!(" optimum={}", format_real(opt.value)));
    }
    row
}

pub fn cmd_list_envs() -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for sheet in catalog() {
        writeln!(out, "{}", sheet_row(&sheet)).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

pub struct ExportArgs {
    pub name: String,
    pub out: Option<PathBuf>,
    pub chain_states: usize,
}

/// Writes an environment in the text model format, with its objective in
/// header comments.
pub fn cmd_export_env(args: &ExportArgs) -> Result<(), CliError> {
    let sheet = build_named(&args.name, args.chain_states).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown environment '{}'; expected one of {}",
            args.name,
            ramdp::environments::ENVIRONMENT_NAMES.join(", ")
        ))
    })?;
    let g = sheet.mdp.graph();
    let labels = |set: &BTreeSet<usize>| set.iter().map(|&s| g.state_label(s)).collect::<Vec<_>>().join(",");
    let mut text = format!(
        "# {}\n# objective {}\n# targets {}\n",
        sheet_row(&sheet),
        objective_name(&sheet.spec),
        labels(&sheet.spec.targets)
    );
    if !sheet.spec.avoid.is_empty() {
        text.push_str(&format!("# avoid {}\n", labels(&sheet.spec.avoid)));
    }
    text.push_str(&write_mdp(&sheet.mdp));
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(e.to_string())),
    }
}
