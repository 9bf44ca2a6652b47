//! Validated trial collections.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::task::{derive, DecisionTask, Trial};

/// One validation finding. `row` is the 1-based position in the input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub row: Option<usize>,
    pub field: String,
    pub message: String,
}

impl Issue {
    pub fn new(row: Option<usize>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { row, field: field.into(), message: message.into() }
    }
}

impl core::fmt::Display for Issue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self.row {
            Some(row) => write!(f, "row {row}, {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// A dataset is accepted iff `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.errors.extend(other.errors);
        self.warnings.extend(other.warnings);
    }
}

/// Trials of one experiment plus the task they are scored under.
///
/// Trials are grouped by participant (first-appearance order) and sorted by
/// `trial_index` within a participant. Each participant belongs to exactly one
/// condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trials: Vec<Trial>,
    task: DecisionTask,
    participants: BTreeMap<String, Vec<String>>,
}

impl Dataset {
    /// Validates `trials` (in input order) against `task`.
    pub fn new(
        trials: Vec<Trial>,
        task: DecisionTask,
    ) -> Result<(Dataset, ValidationReport), ValidationReport> {
        let mut report = ValidationReport::default();
        if let Err(e) = task.space.validate() {
            report.errors.push(Issue::new(None, "outcome_space", format!("{e}")));
            return Err(report);
        }

        let dim = trials.first().map(|t| t.features.len());
        let mut condition_of: BTreeMap<&str, &str> = BTreeMap::new();
        let mut seen_index: BTreeSet<(&str, u64)> = BTreeSet::new();
        let mut has_disagreement: BTreeMap<&str, bool> = BTreeMap::new();

        for (i, t) in trials.iter().enumerate() {
            let row = Some(i + 1);
            let fields = [
                ("ground_truth", t.ground_truth),
                ("human_rec", t.human_rec),
                ("ai_rec", t.ai_rec),
                ("behavioral_action", t.behavioral_action),
            ];
            let mut in_space = true;
            for (field, outcome) in fields {
                if !task.space.contains(outcome) {
                    in_space = false;
                    report.errors.push(Issue::new(row, field, format!("{outcome} is outside the outcome space")));
                }
            }
            if Some(t.features.len()) != dim {
                report.errors.push(Issue::new(
                    row,
                    "features",
                    format!("expected {} features, found {}", dim.unwrap_or(0), t.features.len()),
                ));
            }
            if let Some(j) = t.features.iter().position(|v| !v.is_finite()) {
                report.errors.push(Issue::new(row, "features", format!("feature {j} is not finite")));
            }
            if in_space && task.space.is_finite() {
                if let Err(e @ Error::UnmatchedAction { .. }) = derive(t, &task.space) {
                    report.errors.push(Issue::new(row, "behavioral_action", format!("{e}")));
                }
            }
            match condition_of.get(t.participant_id.as_str()) {
                Some(c) if *c != t.condition_id => report.errors.push(Issue::new(
                    row,
                    "condition",
                    format!(
                        "participant {} appears in conditions {c} and {}",
                        t.participant_id, t.condition_id
                    ),
                )),
                Some(_) => {}
                None => {
                    condition_of.insert(&t.participant_id, &t.condition_id);
                }
            }
            if !seen_index.insert((&t.participant_id, t.trial_index)) {
                report.errors.push(Issue::new(
                    row,
                    "trial_index",
                    format!("duplicate trial index {} for participant {}", t.trial_index, t.participant_id),
                ));
            }
            *has_disagreement.entry(&t.participant_id).or_insert(false) |= t.human_rec != t.ai_rec;
        }

        for (p, any) in &has_disagreement {
            if !any {
                report.warnings.push(Issue::new(
                    None,
                    "participant",
                    format!("participant {p}: no disagreement trials; reliance level undefined"),
                ));
            }
        }
        if !report.is_ok() {
            return Err(report);
        }
        Ok((Self::assemble(trials, task), report))
    }

    fn assemble(trials: Vec<Trial>, task: DecisionTask) -> Dataset {
        let mut order: BTreeMap<String, usize> = BTreeMap::new();
        let mut participants: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for t in &trials {
            if !order.contains_key(&t.participant_id) {
                order.insert(t.participant_id.clone(), order.len());
                participants
                    .entry(t.condition_id.clone())
                    .or_default()
                    .push(t.participant_id.clone());
            }
        }
        let mut trials = trials;
        trials.sort_by_key(|t| (order[&t.participant_id], t.trial_index));
        Dataset { trials, task, participants }
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn task(&self) -> &DecisionTask {
        &self.task
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn conditions(&self) -> impl Iterator<Item = &str> {
        self.participants.keys().map(String::as_str)
    }

    /// Participant ids per condition, in order of first appearance.
    pub fn participants(&self) -> &BTreeMap<String, Vec<String>> {
        &self.participants
    }

    pub fn participant_count(&self) -> usize {
        self.participants.values().map(Vec::len).sum()
    }

    pub fn feature_dim(&self) -> usize {
        self.trials.first().map_or(0, |t| t.features.len())
    }

    /// Splits by condition. Each part keeps the task and trial order.
    pub fn partition(&self) -> BTreeMap<String, Dataset> {
        let mut parts: BTreeMap<String, Vec<Trial>> = BTreeMap::new();
        for t in &self.trials {
            parts.entry(t.condition_id.clone()).or_default().push(t.clone());
        }
        parts
            .into_iter()
            .map(|(c, trials)| {
                let participants = BTreeMap::from([(c.clone(), self.participants[&c].clone())]);
                (c, Dataset { trials, task: self.task.clone(), participants })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{Outcome, OutcomeSpace, ScoringRule};

    fn t(p: &str, c: &str, i: u64, y: u32, h: u32, a: u32, b: u32) -> Trial {
        Trial {
            participant_id: p.into(),
            condition_id: c.into(),
            trial_index: i,
            features: vec![i as f64],
            ground_truth: Outcome::Label(y),
            human_rec: Outcome::Label(h),
            ai_rec: Outcome::Label(a),
            behavioral_action: Outcome::Label(b),
            explanation_meta: None,
        }
    }

    fn binary() -> DecisionTask {
        DecisionTask::new(OutcomeSpace::Binary, ScoringRule::ZeroOne).unwrap()
    }

    #[test]
    fn sorts_within_participant_by_trial_index() {
        let trials = vec![t("a", "x", 2, 1, 0, 1, 1), t("b", "x", 0, 1, 0, 1, 1), t("a", "x", 1, 1, 0, 1, 0)];
        let (ds, report) = Dataset::new(trials, binary()).unwrap();
        assert!(report.warnings.is_empty());
        let order: Vec<_> = ds.trials().iter().map(|t| (t.participant_id.as_str(), t.trial_index)).collect();
        assert_eq!(order, vec![("a", 1), ("a", 2), ("b", 0)]);
    }

    #[test]
    fn out_of_space_row_is_named() {
        let mut bad = t("a", "x", 1, 1, 0, 1, 1);
        bad.ground_truth = Outcome::Label(7);
        let report = Dataset::new(vec![t("a", "x", 0, 1, 0, 1, 1), bad], binary()).unwrap_err();
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].row, Some(2));
        assert_eq!(report.errors[0].field, "ground_truth");
    }

    #[test]
    fn participant_in_two_conditions_is_rejected() {
        let report =
            Dataset::new(vec![t("a", "x", 0, 1, 0, 1, 1), t("a", "y", 1, 1, 0, 1, 1)], binary()).unwrap_err();
        assert_eq!(report.errors[0].field, "condition");
    }

    #[test]
    fn unmatched_action_and_feature_dimension_are_errors() {
        let space = OutcomeSpace::Labels { labels: vec!["A".into(), "B".into(), "C".into()] };
        let task = DecisionTask::new(space, ScoringRule::ZeroOne).unwrap();
        let mut short = t("a", "x", 1, 0, 0, 1, 0);
        short.features.clear();
        let report = Dataset::new(vec![t("a", "x", 0, 0, 0, 1, 2), short], task).unwrap_err();
        let fields: Vec<_> = report.errors.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, vec!["behavioral_action", "features"]);
    }

    #[test]
    fn all_agreement_participant_warns() {
        let trials: Vec<_> = (0..20).map(|i| t("a", "x", i, 1, 1, 1, 1)).collect();
        let (_, report) = Dataset::new(trials, binary()).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].message.contains("no disagreement trials; reliance level undefined"));
    }

    #[test]
    fn duplicate_trial_index_is_rejected() {
        let report =
            Dataset::new(vec![t("a", "x", 0, 1, 0, 1, 1), t("a", "x", 0, 1, 0, 1, 1)], binary()).unwrap_err();
        assert_eq!(report.errors[0].field, "trial_index");
    }

    #[test]
    fn partition_by_condition() {
        let mut trials = Vec::new();
        for p in 0..200 {
            let cond = if p < 100 { "alpha" } else { "beta" };
            for i in 0..20 {
                trials.push(t(&format!("p{p}"), cond, i, 1, 0, 1, 1));
            }
        }
        let (ds, _) = Dataset::new(trials, binary()).unwrap();
        assert_eq!(ds.participant_count(), 200);
        let parts = ds.partition();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts["alpha"].participant_count(), 100);
        assert_eq!(parts["beta"].participant_count(), 100);
        assert_eq!(parts.values().map(Dataset::len).sum::<usize>(), ds.len());

        let (single, _) = Dataset::new(vec![t("a", "x", 0, 1, 0, 1, 1)], binary()).unwrap();
        assert_eq!(single.partition().len(), 1);
        let (empty, _) = Dataset::new(vec![], binary()).unwrap();
        assert!(empty.partition().is_empty());
    }
}
