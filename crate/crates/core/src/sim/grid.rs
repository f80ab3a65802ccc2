//! Grid files and results tables.
//!
//! A grid file is TOML with an optional `[base]` table of [`SimConfig`]
//! fields and any number of `[[cell]]` tables. Each cell is the base with the
//! cell's keys laid over it (nested tables merge key by key). Without cells
//! the base alone is the grid.
//!
//! ```toml
//! [base]
//! n_a = 12
//! n_b = 12
//! reps = 10000
//! seed = 7
//! effect_model = { family = "location-shift-normal", delta = 1.5 }
//!
//! [[cell]]
//! panel_noise_sd = 0.0
//!
//! [[cell]]
//! panel_noise_sd = 3.0
//! tie_policy = { round-to-grid = 0.5 }
//! ```

use std::io::Write;
use std::path::Path;

use toml::{Table, Value};

use super::{SimConfig, SimError, SimResult, TiePolicy};

fn merge(into: &mut Table, over: &Table) {
    for (key, value) in over {
        match (into.get_mut(key), value) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            _ => {
                into.insert(key.clone(), value.clone());
            }
        }
    }
}

fn to_config(table: Table, what: &str) -> Result<SimConfig, SimError> {
    let config: SimConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| SimError::Grid(format!("{what}: {}", e.message())))?;
    config.validate()?;
    Ok(config)
}

/// Parse a grid file. `seed` replaces the base seed when given; cells that
/// set their own seed keep it.
pub fn parse_grid(text: &str, seed: Option<u64>) -> Result<Vec<SimConfig>, SimError> {
    let mut doc: Table = text.parse().map_err(|e: toml::de::Error| SimError::Grid(e.to_string()))?;
    let mut base = match doc.remove("base") {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(_) => return Err(SimError::Grid("`base` must be a table".into())),
    };
    let cells = match doc.remove("cell") {
        None => Vec::new(),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(SimError::Grid("`cell` must be an array of tables".into())),
    };
    if let Some(key) = doc.keys().next() {
        return Err(SimError::Grid(format!("unknown top-level key `{key}`")));
    }
    if let Some(seed) = seed {
        let seed = i64::try_from(seed)
            .map_err(|_| SimError::Grid(format!("seed {seed} does not fit in a TOML integer")))?;
        base.insert("seed".into(), Value::Integer(seed));
    }
    if cells.is_empty() {
        return Ok(vec![to_config(base, "base")?]);
    }
    cells
        .into_iter()
        .enumerate()
        .map(|(i, cell)| {
            let Value::Table(cell) = cell else {
                return Err(SimError::Grid(format!("cell {} is not a table", i + 1)));
            };
            let mut merged = base.clone();
            merge(&mut merged, &cell);
            to_config(merged, &format!("cell {}", i + 1))
        })
        .collect()
}

pub fn load_grid(path: &Path, seed: Option<u64>) -> Result<Vec<SimConfig>, SimError> {
    parse_grid(&std::fs::read_to_string(path)?, seed)
}

pub const RESULTS_HEADER: [&str; 18] = [
    "cell",
    "n_a",
    "n_b",
    "family",
    "delta",
    "panel_noise_sd",
    "tie_policy",
    "grid_step",
    "alpha",
    "alternative",
    "continuity",
    "method",
    "reps",
    "seed",
    "rejection_rate",
    "mc_stderr",
    "mean_relative_effect",
    "reps_used",
];

fn kebab<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// One row per grid cell, in grid order.
pub fn write_results_csv<W: Write>(out: W, results: &[SimResult]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| SimError::Io(std::io::Error::other(e));
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for (i, r) in results.iter().enumerate() {
        let c = &r.config;
        let (policy, step) = match c.tie_policy {
            TiePolicy::NoTies => ("no-ties", String::new()),
            TiePolicy::RoundToGrid(s) => ("round-to-grid", s.to_string()),
        };
        w.write_record([
            (i + 1).to_string(),
            c.n_a.to_string(),
            c.n_b.to_string(),
            kebab(&c.effect_model.family),
            c.effect_model.delta.to_string(),
            c.panel_noise_sd.to_string(),
            policy.to_string(),
            step,
            c.alpha.to_string(),
            kebab(&c.alternative),
            c.continuity.to_string(),
            kebab(&c.method),
            c.reps.to_string(),
            c.seed.to_string(),
            r.rejection_rate.to_string(),
            r.mc_stderr.to_string(),
            r.mean_relative_effect.to_string(),
            r.reps_used.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
