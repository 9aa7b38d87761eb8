//! Run config loading: defaults, then the TOML file, then `--set` overrides.

use std::fmt;
use std::path::Path;

use curriculum_core::orchestrator::RunConfig;
use toml::{Table, Value};

/// A problem with the user's configuration (exit status 2).
#[derive(Debug)]
pub struct ConfigProblem(pub String);

impl fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigProblem {}

fn problem(msg: impl Into<String>) -> anyhow::Error {
    ConfigProblem(msg.into()).into()
}


fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies `key.path=value`; the key must already exist in the config.
fn set(table: &mut Table, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| problem(format!("override `{assignment}` must look like key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = path.split_last().expect("split yields one item");
    let mut cur = table;
    for p in parents {
        cur = match cur.get_mut(*p) {
            Some(Value::Table(t)) => t,
            _ => return Err(problem(format!("unknown config key `{key}`"))),
        };
    }
    if !cur.contains_key(*last) || matches!(cur.get(*last), Some(Value::Table(_))) {
        return Err(problem(format!("unknown config key `{key}`")));
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    load_onto(&RunConfig::default(), path, overrides)
}

/// Like [`load`] but layered over `base` instead of the defaults.
pub fn load_onto(base: &RunConfig, path: Option<&Path>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut table = Table::try_from(base).map_err(|e| problem(format!("config not representable: {e}")))?;
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| problem(format!("cannot read config {}: {e}", p.display())))?;
        let file: Table = text
            .parse()
            .map_err(|e| problem(format!("config {}: {e}", p.display())))?;
        merge(&mut table, file);
    }
    for o in overrides {
        set(&mut table, o)?;
    }
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| problem(format!("config: {}", e.message())))
}
