//! The `simulate` command.
//!
//! The config file is TOML: an optional `[defaults]` table merged into every
//! `[[scenario]]` entry, each of which deserializes into a [`SimConfig`].
//!
//! ```toml
//! [defaults]
//! simulations = 500
//! permutations = 500
//!
//! [[scenario]]
//! method = "naive_permutation"
//! scenario = "homogeneous"
//! ```

use std::fmt::Write as _;
use std::path::Path;

use permreg::simulation::{self, SimConfig, SimOutcome, SimRow};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SimFileError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{0}")]
    Syntax(String),
    #[error("scenario {index} (line {line}): {message}")]
    Row { index: usize, line: usize, message: String },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    #[serde(default)]
    defaults: toml::Table,
    #[serde(default)]
    scenario: Vec<toml::Table>,
}

/// 1-based line of the `index`-th `[[scenario]]` header, or 0 if not found.
fn scenario_line(text: &str, index: usize) -> usize {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with("[[scenario]]"))
        .nth(index)
        .map_or(0, |(i, _)| i + 1)
}

pub fn parse_sim_configs(text: &str) -> Result<Vec<SimConfig>, SimFileError> {
    let file: SimFile = toml::from_str(text).map_err(|e| SimFileError::Syntax(e.to_string()))?;
    file.scenario
        .into_iter()
        .enumerate()
        .map(|(index, row)| {
            let mut merged = file.defaults.clone();
            merged.extend(row);
            SimConfig::deserialize(toml::Value::Table(merged))
                .map_err(|e| e.to_string())
                .and_then(|c| c.validate().map(|_| c).map_err(|e| e.to_string()))
                .map_err(|message| SimFileError::Row {
                    index,
                    line: scenario_line(text, index),
                    message: message.trim().to_string(),
                })
        })
        .collect()
}

pub fn load_sim_configs(path: &Path) -> Result<Vec<SimConfig>, SimFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimFileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_sim_configs(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimProvenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub configs: Vec<SimConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub provenance: SimProvenance,
    pub rows: Vec<SimRow>,
}

pub fn run_simulation(configs: Vec<SimConfig>) -> SimReport {
    let rows = simulation::compare_methods(&configs);
    SimReport {
        provenance: SimProvenance {
            tool: "permreg",
            version: env!("CARGO_PKG_VERSION"),
            configs,
        },
        rows,
    }
}

impl SimReport {
    pub fn to_text(&self) -> String {
        let header = ["model / scenario", "rate", "95% CI", "result"];
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|row| match &row.outcome {
                SimOutcome::Ok(r) => [
                    row.label.clone(),
                    format!("{:.3}", r.rejection_rate),
                    format!("({:.3}-{:.3})", r.ci.0, r.ci.1),
                    r.classification.to_string(),
                ],
                SimOutcome::Error(e) => [row.label.clone(), "-".into(), "-".into(), format!("error: {e}")],
            })
            .collect();
        let mut out = crate::table(&header, &cells);
        if let Some(c) = self.provenance.configs.first() {
            let _ = writeln!(
                out,
                "\n{} simulations, {} permutations, seed {}",
                c.simulations, c.permutations, c.seed
            );
        }
        out
    }
}
