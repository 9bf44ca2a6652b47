//! Original and derived (binary-adoption) decision tasks.
//!
//! In the original task a decision-maker takes an action `a ∈ Y` and is scored
//! against the ground truth `y` by a scoring rule `S(a, y)`. The derived task
//! replaces the action by a choice between the two recommendations: the state
//! becomes the triple `(y, yH, yAI)` and choosing the human (AI) side pays
//! `S(yH, y)` (`S(yAI, y)`).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Space the ground truth, the recommendations and the behavioral action live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutcomeSpace {
    /// Labels `0` and `1`.
    Binary,
    /// An ordered, finite set of string labels.
    Labels { labels: Vec<String> },
    /// Real values in `[0, 1]` (e.g. probability reports).
    UnitInterval,
}

/// A value in an [`OutcomeSpace`].
///
/// Finite spaces store the label index, the unit interval stores the value.
#[derive(Debug, Clone, Copy)]
pub enum Outcome {
    Label(u32),
    Value(f64),
}

impl Outcome {
    /// Numeric reading used by the quadratic rule. Binary labels read as 0/1.
    pub fn numeric(self) -> f64 {
        match self {
            Outcome::Label(i) => f64::from(i),
            Outcome::Value(v) => v,
        }
    }
}

impl PartialEq for Outcome {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Outcome {}

impl PartialOrd for Outcome {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Outcome {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Outcome::Label(a), Outcome::Label(b)) => a.cmp(b),
            // -0.0 and 0.0 are the same outcome.
            (Outcome::Value(a), Outcome::Value(b)) => (a + 0.0).total_cmp(&(b + 0.0)),
            (Outcome::Label(_), Outcome::Value(_)) => Ordering::Less,
            (Outcome::Value(_), Outcome::Label(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Label(i) => write!(f, "label #{i}"),
            Outcome::Value(v) => write!(f, "{v}"),
        }
    }
}

impl OutcomeSpace {
    pub fn validate(&self) -> Result<()> {
        if let OutcomeSpace::Labels { labels } = self {
            if labels.len() < 2 {
                return Err(Error::InvalidTask(
                    "a finite label space needs at least two labels".into(),
                ));
            }
            let mut sorted: Vec<&str> = labels.iter().map(|l| l.trim()).collect();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidTask("duplicate label in outcome space".into()));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, OutcomeSpace::UnitInterval)
    }

    /// Number of labels, `None` for the unit interval.
    pub fn label_count(&self) -> Option<usize> {
        match self {
            OutcomeSpace::Binary => Some(2),
            OutcomeSpace::Labels { labels } => Some(labels.len()),
            OutcomeSpace::UnitInterval => None,
        }
    }

    pub fn contains(&self, outcome: Outcome) -> bool {
        match (self, outcome) {
            (OutcomeSpace::Binary, Outcome::Label(i)) => i < 2,
            (OutcomeSpace::Labels { labels }, Outcome::Label(i)) => (i as usize) < labels.len(),
            (OutcomeSpace::UnitInterval, Outcome::Value(v)) => (0.0..=1.0).contains(&v),
            _ => false,
        }
    }

    pub fn check(&self, outcome: Outcome) -> Result<Outcome> {
        if self.contains(outcome) {
            Ok(outcome)
        } else {
            Err(Error::OutOfSpace(outcome.to_string()))
        }
    }

    /// Parses a textual cell. Labels match after trimming; binary cells must
    /// parse to exactly 0 or 1.
    pub fn parse(&self, text: &str) -> Result<Outcome> {
        let text = text.trim();
        let out_of_space = || Error::OutOfSpace(format!("{text:?}"));
        match self {
            OutcomeSpace::Binary => match text.parse::<f64>() {
                Ok(0.0) => Ok(Outcome::Label(0)),
                Ok(1.0) => Ok(Outcome::Label(1)),
                _ => Err(out_of_space()),
            },
            OutcomeSpace::Labels { labels } => labels
                .iter()
                .position(|l| l.trim() == text)
                .map(|i| Outcome::Label(i as u32))
                .ok_or_else(out_of_space),
            OutcomeSpace::UnitInterval => match text.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Ok(Outcome::Value(v + 0.0)),
                _ => Err(out_of_space()),
            },
        }
    }

    /// Inverse of [`OutcomeSpace::parse`] for in-space outcomes.
    pub fn format(&self, outcome: Outcome) -> String {
        match (self, outcome) {
            (OutcomeSpace::Labels { labels }, Outcome::Label(i)) => labels[i as usize].clone(),
            (_, Outcome::Label(i)) => i.to_string(),
            (_, Outcome::Value(v)) => v.to_string(),
        }
    }
}

/// Scoring rule `S(a, θ)` of the original task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScoringRule {
    /// `1[a = θ]`.
    ZeroOne,
    /// `reward × 1[a = θ]`, e.g. a $0.5 bonus per correct decision.
    ScaledZeroOne { reward: f64 },
    /// `1 − (a − θ)²`.
    Quadratic,
}

impl ScoringRule {
    pub fn max_payoff(&self) -> f64 {
        match self {
            ScoringRule::ScaledZeroOne { reward } => *reward,
            _ => 1.0,
        }
    }

    /// Scores without checking space membership; callers validate first.
    #[inline]
    pub fn payoff(&self, action: Outcome, truth: Outcome) -> f64 {
        match self {
            ScoringRule::ZeroOne => {
                if action == truth {
                    1.0
                } else {
                    0.0
                }
            }
            ScoringRule::ScaledZeroOne { reward } => {
                if action == truth {
                    *reward
                } else {
                    0.0
                }
            }
            ScoringRule::Quadratic => {
                let d = action.numeric() - truth.numeric();
                1.0 - d * d
            }
        }
    }

    /// Derived-task payoff `Ŝ(â, θ̂)`.
    #[inline]
    pub fn derived_payoff(&self, choice: DerivedChoice, state: &DerivedState) -> f64 {
        self.payoff(state.recommendation(choice), state.truth)
    }
}

impl fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoringRule::ZeroOne => f.write_str("zero-one"),
            ScoringRule::ScaledZeroOne { reward } => write!(f, "scaled-zero-one({reward})"),
            ScoringRule::Quadratic => f.write_str("quadratic"),
        }
    }
}

/// An outcome space together with the rule that scores it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTask {
    pub space: OutcomeSpace,
    pub rule: ScoringRule,
}

impl DecisionTask {
    pub fn new(space: OutcomeSpace, rule: ScoringRule) -> Result<Self> {
        space.validate()?;
        match rule {
            ScoringRule::ScaledZeroOne { reward } if !(reward.is_finite() && reward > 0.0) => {
                return Err(Error::InvalidTask(format!(
                    "scaled zero-one reward must be positive, got {reward}"
                )));
            }
            ScoringRule::Quadratic if matches!(space, OutcomeSpace::Labels { .. }) => {
                return Err(Error::InvalidTask(
                    "the quadratic rule needs numeric outcomes (binary or unit-interval)".into(),
                ));
            }
            _ => {}
        }
        Ok(Self { space, rule })
    }

    pub fn score(&self, action: Outcome, truth: Outcome) -> Result<f64> {
        self.space.check(action)?;
        self.space.check(truth)?;
        Ok(self.rule.payoff(action, truth))
    }

    pub fn derived_score(&self, choice: DerivedChoice, state: &DerivedState) -> Result<f64> {
        self.space.check(state.human)?;
        self.space.check(state.ai)?;
        self.score(state.recommendation(choice), state.truth)
    }
}

/// One experimental observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub participant_id: String,
    pub condition_id: String,
    pub trial_index: u64,
    pub features: Vec<f64>,
    pub ground_truth: Outcome,
    pub human_rec: Outcome,
    pub ai_rec: Outcome,
    pub behavioral_action: Outcome,
    /// Carried through untouched; never used in any computation.
    pub explanation_meta: Option<String>,
}

impl Trial {
    pub fn id(&self) -> String {
        format!("{}#{}", self.participant_id, self.trial_index)
    }
}

/// Side of the binary-adoption choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivedChoice {
    Human = 0,
    Ai = 1,
}

/// What the participant did, seen through the binary-adoption lens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BehavioralChoice {
    Human,
    Ai,
    /// The recommendations agree, so adoption is not identifiable.
    AgreementIndeterminate,
}

/// Derived payoff state `θ̂ = (y, yH, yAI)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DerivedState {
    pub truth: Outcome,
    pub human: Outcome,
    pub ai: Outcome,
}

impl DerivedState {
    pub fn new(truth: Outcome, human: Outcome, ai: Outcome) -> Self {
        Self { truth, human, ai }
    }

    #[inline]
    pub fn disagreement(&self) -> bool {
        self.human != self.ai
    }

    #[inline]
    pub fn recommendation(&self, choice: DerivedChoice) -> Outcome {
        match choice {
            DerivedChoice::Human => self.human,
            DerivedChoice::Ai => self.ai,
        }
    }
}

/// Binary-adoption view of a single trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedObservation {
    pub state: DerivedState,
    pub choice: BehavioralChoice,
    /// Behavioral action in the original task, scored for `B`.
    pub action: Outcome,
}

impl DerivedObservation {
    #[inline]
    pub fn disagreement(&self) -> bool {
        self.state.disagreement()
    }
}

/// Builds the derived observation of `trial`.
///
/// Finite spaces require the behavioral action to equal one of two distinct
/// recommendations. On the unit interval the nearer recommendation wins and an
/// exact midpoint is reported as ambiguous.
pub fn derive(trial: &Trial, space: &OutcomeSpace) -> Result<DerivedObservation> {
    for outcome in [trial.ground_truth, trial.human_rec, trial.ai_rec, trial.behavioral_action] {
        space.check(outcome)?;
    }
    let state = DerivedState::new(trial.ground_truth, trial.human_rec, trial.ai_rec);
    let action = trial.behavioral_action;
    let choice = if !state.disagreement() {
        BehavioralChoice::AgreementIndeterminate
    } else if space.is_finite() {
        if action == state.ai {
            BehavioralChoice::Ai
        } else if action == state.human {
            BehavioralChoice::Human
        } else {
            return Err(Error::UnmatchedAction { trial: trial.id() });
        }
    } else {
        let a = action.numeric();
        let to_ai = (a - state.ai.numeric()).abs();
        let to_human = (a - state.human.numeric()).abs();
        match to_ai.partial_cmp(&to_human) {
            Some(Ordering::Less) => BehavioralChoice::Ai,
            Some(Ordering::Greater) => BehavioralChoice::Human,
            _ => return Err(Error::AmbiguousChoice { trial: trial.id() }),
        }
    };
    Ok(DerivedObservation { state, choice, action })
}
