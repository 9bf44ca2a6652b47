//! The versioned report document.

use std::path::Path;

use reliance_core::analysis::ConditionEstimates;
use reliance_core::empirical::KSelectionDiagnostics;
use reliance_core::estimators::{AdvantageCurve, Ranking};
use reliance_core::losses::{LossDecomposition, RelianceClass};
use reliance_core::resample::{BootstrapResult, Interval, Quantity, ResampleUnit};
use reliance_core::BoundMode;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub metadata: Metadata,
    pub conditions: Vec<ConditionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub modes: Vec<BoundMode>,
    pub ranking: Ranking,
    pub k_grid: Vec<usize>,
    pub holdout_fraction: f64,
    pub selection_repeats: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSettings>,
    /// SHA-256 over the schema and every analysis option.
    pub config_hash: String,
    pub data_file: String,
    pub data_sha256: String,
    /// Seconds since the Unix epoch; omitted with `--no-timestamp`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub iterations: usize,
    pub sample_size: Option<usize>,
    pub unit: ResampleUnit,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub dropped_trials: Vec<String>,
    /// Overfit upper bound first, then the discretized lower bound when requested.
    pub bounds: Vec<BoundReport>,
}

impl ConditionReport {
    pub fn bound(&self, mode: BoundMode) -> Option<&BoundReport> {
        self.bounds.iter().find(|b| b.mode == mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub mode: BoundMode,
    pub estimates: ConditionEstimates,
    pub losses: LossDecomposition,
    pub reliance_class: Option<RelianceClass>,
    /// `B > R∅`.
    pub complementary: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_selection: Option<KSelectionDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSummary>,
    pub advantage_file: String,
    pub advantage: AdvantageCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub iterations: usize,
    pub sample_size: usize,
    pub unit: ResampleUnit,
    pub seed: u64,
    pub undefined_reliance_iterations: usize,
    pub degenerate_delta_iterations: usize,
    pub quantities: Vec<QuantityIntervals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityIntervals {
    pub quantity: Quantity,
    pub point: Option<f64>,
    /// Iterations where the quantity was defined.
    pub defined: usize,
    pub intervals: Vec<Interval>,
}

impl BootstrapSummary {
    pub fn from_result(r: &BootstrapResult) -> Self {
        Self {
            iterations: r.iterations,
            sample_size: r.sample_size,
            unit: r.unit,
            seed: r.seed,
            undefined_reliance_iterations: r.undefined_reliance.len(),
            degenerate_delta_iterations: r.degenerate_delta.len(),
            quantities: r
                .quantities
                .iter()
                .map(|q| QuantityIntervals {
                    quantity: q.quantity,
                    point: q.point,
                    defined: q.samples.iter().flatten().count(),
                    intervals: q.intervals.clone(),
                })
                .collect(),
        }
    }

    pub fn get(&self, q: Quantity) -> Option<&QuantityIntervals> {
        self.quantities.iter().find(|s| s.quantity == q)
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Reads a report, accepting only this tool's major schema version.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
        let version = value.get("schema_version").and_then(|v| v.as_str()).unwrap_or("");
        if major(version) != major(SCHEMA_VERSION) {
            return Err(CliError::Config(format!(
                "report schema version {version:?} is not supported (expected {}.x)",
                major(SCHEMA_VERSION)
            )));
        }
        serde_json::from_value(value).map_err(|e| CliError::parse(path, e))
    }
}

fn major(version: &str) -> &str {
    version.split('.').next().unwrap_or("")
}
