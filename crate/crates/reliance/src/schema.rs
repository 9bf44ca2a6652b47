//! Mapping from input columns to trial fields.

use std::path::Path;

use reliance_core::analysis::AmbiguityPolicy;
use reliance_core::{DecisionTask, OutcomeSpace, ScoringRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "jsonl" | "ndjson" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Columns {
    pub participant_id: String,
    pub condition: String,
    pub trial_index: String,
    pub ground_truth: String,
    pub human_rec: String,
    pub ai_rec: String,
    pub behavioral_action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation_meta: Option<String>,
}

impl Default for Columns {
    fn default() -> Self {
        Self {
            participant_id: "participant_id".into(),
            condition: "condition".into(),
            trial_index: "trial_index".into(),
            ground_truth: "y".into(),
            human_rec: "y_h".into(),
            ai_rec: "y_ai".into(),
            behavioral_action: "a_b".into(),
            explanation_meta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub outcome: OutcomeSpace,
    pub scoring: ScoringRule,
    #[serde(default)]
    pub columns: Columns,
    #[serde(default)]
    pub features: Vec<String>,
    /// Must be set when `features` is empty; the signal is then the recommendation pair.
    #[serde(default)]
    pub feature_free: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default)]
    pub ambiguity: AmbiguityPolicy,
}

impl SchemaConfig {
    /// Column layout written by [`crate::ingest::save`].
    pub fn canonical(outcome: OutcomeSpace, scoring: ScoringRule, feature_dim: usize) -> Self {
        Self {
            outcome,
            scoring,
            columns: Columns::default(),
            features: (0..feature_dim).map(|i| format!("f_{i}")).collect(),
            feature_free: feature_dim == 0,
            format: None,
            ambiguity: AmbiguityPolicy::Fail,
        }
    }

    pub fn task(&self) -> Result<DecisionTask> {
        Ok(DecisionTask::new(self.outcome.clone(), self.scoring)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() != self.feature_free {
            return Err(CliError::Config(if self.feature_free {
                "feature_free is set but feature columns are listed".into()
            } else {
                "no feature columns; list them or set feature_free = true".into()
            }));
        }
        let c = &self.columns;
        let mut names: Vec<&str> = vec![
            &c.participant_id,
            &c.condition,
            &c.trial_index,
            &c.ground_truth,
            &c.human_rec,
            &c.ai_rec,
            &c.behavioral_action,
        ];
        names.extend(c.explanation_meta.as_deref());
        names.extend(self.features.iter().map(String::as_str));
        if let Some(empty) = names.iter().position(|n| n.is_empty()) {
            return Err(CliError::Config(format!("column mapping {empty} is empty")));
        }
        let mut sorted = names.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!("column {:?} mapped twice", w[0])));
        }
        self.task().map(|_| ())
    }

    /// Reads TOML or JSON, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let schema: SchemaConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?,
            _ => toml::from_str(&text).map_err(|e| CliError::parse(path, e))?,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_canonical_columns() {
        let s: SchemaConfig = toml::from_str(
            r#"
            features = ["f_0"]
            [outcome]
            kind = "binary"
            [scoring]
            kind = "zero-one"
            "#,
        )
        .unwrap();
        assert_eq!(s, SchemaConfig::canonical(OutcomeSpace::Binary, ScoringRule::ZeroOne, 1));
        s.validate().unwrap();
        let back: SchemaConfig = toml::from_str(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn features_must_be_listed_or_declared_absent() {
        let mut s = SchemaConfig::canonical(OutcomeSpace::Binary, ScoringRule::ZeroOne, 0);
        s.validate().unwrap();
        s.feature_free = false;
        assert!(matches!(s.validate(), Err(CliError::Config(_))));
        s.features = vec!["y".into()];
        assert!(matches!(s.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn json_schema_with_scaled_rule() {
        let s: SchemaConfig = serde_json::from_str(
            r#"{"outcome": {"kind": "labels", "labels": ["genuine", "deceptive"]},
                "scoring": {"kind": "scaled-zero-one", "reward": 0.5},
                "feature_free": true, "ambiguity": "drop"}"#,
        )
        .unwrap();
        s.validate().unwrap();
        assert_eq!(s.ambiguity, AmbiguityPolicy::Drop);
        assert_eq!(s.scoring, ScoringRule::ScaledZeroOne { reward: 0.5 });
    }
}
