use std::fs;
use std::path::Path;

use serde::Serialize;

use riskdp::{MarkovModel, Policy, StagePolicy, SweepRow};

use crate::Failure;

fn io(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(header).map_err(|e| io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io(path, e))
}

/// `state,value` with the state's grid coordinate.
pub fn write_values(path: &Path, model: &MarkovModel, values: &[f64]) -> Result<(), Failure> {
    let rows = model
        .grid()
        .points()
        .iter()
        .zip(values)
        .map(|(x, v)| vec![x.to_string(), v.to_string()]);
    write_csv(path, &["state", "value"], rows)
}

/// `stage,state,action` with indices. A stationary tail is written as one
/// extra stage; the last listed stage applies to every later stage.
pub fn write_policy(path: &Path, policy: &Policy) -> Result<(), Failure> {
    let rules = policy.stages.iter().chain(policy.tail.iter());
    let rows = rules.enumerate().flat_map(|(stage, rule)| {
        rule.iter()
            .enumerate()
            .map(move |(s, a)| vec![stage.to_string(), s.to_string(), a.to_string()])
    });
    write_csv(path, &["stage", "state", "action"], rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), Failure> {
    let rows = rows.iter().map(|r| {
        vec![
            r.param.to_string(),
            r.value.to_string(),
            r.n0.to_string(),
            r.sweeps.to_string(),
        ]
    });
    write_csv(path, &["param", "value", "N0", "sweeps"], rows)
}

/// Reads a policy table written by [`write_policy`]. Stages must be listed
/// from 0 without gaps and cover every state exactly once.
pub fn read_policy(path: &Path, num_states: usize) -> Result<Policy, Failure> {
    let bad = |line: u64, msg: String| Failure::Config(format!("{}:{line}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => io(path, e),
        _ => Failure::Config(format!("{}: {e}", path.display())),
    })?;
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["stage", "state", "action"] {
        return Err(bad(1, "expected header stage,state,action".into()));
    }
    let mut stages: Vec<Vec<Option<usize>>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<usize, Failure> {
            record
                .get(i)
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| bad(line, format!("{name} must be a nonnegative integer")))
        };
        let (stage, state, action) = (field(0, "stage")?, field(1, "state")?, field(2, "action")?);
        if stage > stages.len() {
            return Err(bad(line, format!("stage {stage} listed before stage {}", stages.len())));
        }
        if stage == stages.len() {
            stages.push(vec![None; num_states]);
        }
        let slot = stages[stage]
            .get_mut(state)
            .ok_or_else(|| bad(line, format!("state {state} out of range (model has {num_states})")))?;
        if slot.replace(action).is_some() {
            return Err(bad(line, format!("stage {stage} lists state {state} twice")));
        }
    }
    let mut rules = stages
        .into_iter()
        .enumerate()
        .map(|(stage, rule)| {
            rule.into_iter()
                .enumerate()
                .map(|(s, a)| a.ok_or_else(|| bad(0, format!("stage {stage} has no action for state {s}"))))
                .collect::<Result<Vec<_>, _>>()
                .map(StagePolicy)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let tail = rules.pop().ok_or_else(|| bad(0, "policy lists no stages".into()))?;
    Ok(Policy {
        stages: rules,
        tail: Some(tail),
    })
}
