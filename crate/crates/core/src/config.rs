//! Flat key-value experiment files, one experiment per file.
//!
//! ```text
//! # lines are `key = value`; '#' starts a comment
//! problem = trig
//! param.n = 50
//! runs = 5
//! seed = 1
//! out = results/trig50
//! lower = 0.7353981633974483      # scalar bounds broadcast over the dimension
//! upper = 0.8353981633974483
//! # one labeled solver per line; omitted keys fall back to the defaults below
//! solver.aa3     = precond=const:1 m=3
//! solver.diag3   = precond=diag m=3
//! solver.full3   = precond=full m=3 n_update=2
//! # defaults applied to every solver line
//! m = 3
//! tol = 1e-10
//! max_iter = 100
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, GuessSpec, LabeledConfig};
use crate::precond::PreconditionerKind;
use crate::problem::InitialGuessBox;
use crate::solver::SolverConfig;
use crate::suite::make_problem;

/// Raw key-value pairs with insertion-ordered solver lines.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub keys: BTreeMap<String, String>,
    pub solvers: Vec<(String, String)>,
}

pub fn parse_config_text(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidSpec(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        if let Some(label) = key.strip_prefix("solver.") {
            raw.solvers.push((label.to_string(), value.to_string()));
        } else {
            raw.keys.insert(key.to_string(), value.to_string());
        }
    }
    Ok(raw)
}

fn get_f64(keys: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match keys.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("{key}={v} is not a number"))),
    }
}

fn get_usize(keys: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match keys.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("{key}={v} is not a count"))),
    }
}

fn get_u64(keys: &BTreeMap<String, String>, key: &str, default: u64) -> Result<u64> {
    match keys.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("{key}={v} is not a seed"))),
    }
}

fn parse_vec(value: &str, key: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("{key}: '{s}' is not a number")))
        })
        .collect()
}

/// Broadcast a scalar or comma list to the problem dimension.
fn parse_bound(value: &str, key: &str, dim: usize) -> Result<Vec<f64>> {
    let v = parse_vec(value, key)?;
    if v.len() == 1 {
        Ok(vec![v[0]; dim])
    } else if v.len() == dim {
        Ok(v)
    } else {
        Err(Error::InvalidSpec(format!(
            "{key} has {} entries, problem dimension is {dim}",
            v.len()
        )))
    }
}

fn solver_config_from_keys(keys: &BTreeMap<String, String>) -> Result<SolverConfig> {
    let kind: PreconditionerKind = keys
        .get("precond")
        .map(String::as_str)
        .unwrap_or("const:1")
        .parse()?;
    let mut cfg = SolverConfig::new(kind, get_usize(keys, "m", 0)?);
    cfg.beta = get_f64(keys, "beta", 1.0)?;
    cfg.tol = get_f64(keys, "tol", 1e-10)?;
    cfg.n_max = get_usize(keys, "max_iter", 100)?;
    cfg.n_update = get_usize(keys, "n_update", 1)?;
    cfg.diag_floor = keys.get("diag_floor").map(String::as_str) == Some("true");
    cfg.recompute_history = keys.get("recompute_history").map(String::as_str) == Some("true");
    cfg.validate()?;
    Ok(cfg)
}

/// Resolve a raw config (file keys already merged with CLI overrides) into a
/// runnable experiment spec.
pub fn resolve_spec(raw: &RawConfig) -> Result<ExperimentSpec> {
    let keys = &raw.keys;
    let problem = keys
        .get("problem")
        .cloned()
        .ok_or_else(|| Error::InvalidSpec("missing 'problem'".into()))?;
    let mut params = BTreeMap::new();
    for (k, v) in keys {
        if let Some(p) = k.strip_prefix("param.") {
            params.insert(p.to_string(), v.clone());
        }
    }
    // constructed early to learn the dimension for bound broadcasting
    let dim = make_problem(&problem, &params)?.dim;

    let master_seed = get_u64(keys, "seed", 0)?;
    let guess = if let Some(x0) = keys.get("x0") {
        GuessSpec::Fixed(parse_bound(x0, "x0", dim)?)
    } else {
        let lower = parse_bound(
            keys.get("lower")
                .ok_or_else(|| Error::InvalidSpec("missing 'x0' or 'lower'/'upper'".into()))?,
            "lower",
            dim,
        )?;
        let upper = parse_bound(
            keys.get("upper")
                .ok_or_else(|| Error::InvalidSpec("missing 'upper'".into()))?,
            "upper",
            dim,
        )?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidSpec("lower bound exceeds upper bound".into()));
        }
        GuessSpec::Box(InitialGuessBox::new(lower, upper, master_seed))
    };

    let mut solvers = Vec::new();
    if raw.solvers.is_empty() {
        solvers.push(LabeledConfig {
            label: keys
                .get("label")
                .cloned()
                .unwrap_or_else(|| "default".into()),
            config: solver_config_from_keys(keys)?,
        });
    } else {
        for (label, line) in &raw.solvers {
            let mut merged = keys.clone();
            for tok in line.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| {
                    Error::InvalidSpec(format!("solver.{label}: expected key=value, got '{tok}'"))
                })?;
                merged.insert(k.to_string(), v.to_string());
            }
            solvers.push(LabeledConfig {
                label: label.clone(),
                config: solver_config_from_keys(&merged)?,
            });
        }
    }

    Ok(ExperimentSpec {
        problem,
        params,
        solvers,
        guess,
        runs: get_usize(keys, "runs", 1)?,
        master_seed,
        out_dir: PathBuf::from(keys.get("out").map(String::as_str).unwrap_or("out")),
    })
}
