//! End-to-end estimation for one condition.
//!
//! [`Prepared`] holds the derived observations of a dataset with every signal
//! interned once. [`analyze`] then runs the estimators and the loss
//! decomposition under a given signal keying.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::empirical::{
    encode_signal, select_k, Discretizer, KSelectionDiagnostics, Keying, SelectKConfig, SignalTable,
    SignalTableBuilder,
};
use crate::error::{Error, Result};
use crate::estimators::{
    advantage_curve, appropriate_reliance_level, behavioral_acceptances, behavioral_performance,
    misreliant_benchmark, rational_baseline, rational_benchmark, reliance_level, AdvantageCurve, Ranking,
    SignalModel,
};
use crate::losses::{classify_reliance, complementation, decompose, LossDecomposition, RelianceClass};
use crate::task::{derive, DerivedChoice, DerivedObservation, ScoringRule};

pub type DiscretizationConfig = SelectKConfig;

/// A derived observation tied to its participant and signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Index into [`Prepared::participants`].
    pub participant: u32,
    pub trial_index: u64,
    /// Id in the [`SignalTable`].
    pub signal: u32,
    pub derived: DerivedObservation,
}

/// What to do with unit-interval trials whose action sits exactly between two recommendations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbiguityPolicy {
    #[default]
    Fail,
    Drop,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub condition: String,
    pub rule: ScoringRule,
    pub observations: Vec<Observation>,
    pub participants: Vec<String>,
    pub signals: Arc<SignalTable>,
}

impl Prepared {
    /// Derives every trial. Returns the ids of dropped ambiguous trials.
    pub fn new(dataset: &Dataset, ambiguity: AmbiguityPolicy) -> Result<(Prepared, Vec<String>)> {
        let space = &dataset.task().space;
        let mut signals = SignalTableBuilder::new(dataset.feature_dim());
        let mut participant_ids: BTreeMap<&str, u32> = BTreeMap::new();
        let mut participants = Vec::new();
        let mut observations = Vec::with_capacity(dataset.len());
        let mut dropped = Vec::new();
        for t in dataset.trials() {
            let derived = match derive(t, space) {
                Ok(d) => d,
                Err(Error::AmbiguousChoice { trial }) if ambiguity == AmbiguityPolicy::Drop => {
                    dropped.push(trial);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let participant = *participant_ids.entry(&t.participant_id).or_insert_with(|| {
                participants.push(t.participant_id.clone());
                (participants.len() - 1) as u32
            });
            let signal = signals.intern(encode_signal(&t.features, t.human_rec, t.ai_rec, space));
            observations.push(Observation { participant, trial_index: t.trial_index, signal, derived });
        }
        let condition = dataset.conditions().collect::<Vec<_>>().join("+");
        let prepared = Prepared {
            condition,
            rule: dataset.task().rule,
            observations,
            participants,
            signals: Arc::new(signals.finish()),
        };
        Ok((prepared, dropped))
    }

    /// Same signals and condition, different observations.
    pub fn with_observations(&self, observations: Vec<Observation>, participants: Vec<String>) -> Prepared {
        Prepared {
            condition: self.condition.clone(),
            rule: self.rule,
            observations,
            participants,
            signals: Arc::clone(&self.signals),
        }
    }

    pub fn disagreement_count(&self) -> usize {
        self.observations.iter().filter(|o| o.derived.disagreement()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    /// Raw signals: the empirical distribution is taken as the truth.
    OverfitUpper,
    /// Signals coarsened into k-means clusters.
    DiscretizedLower,
}

impl BoundMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundMode::OverfitUpper => "overfit-upper",
            BoundMode::DiscretizedLower => "discretized-lower",
        }
    }
}

/// Payoff quantities of one condition under one bound mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimates {
    pub condition: String,
    pub mode: BoundMode,
    pub n_observations: usize,
    pub n_participants: usize,
    pub n_disagreements: usize,
    pub n_signals: usize,
    pub r_baseline: f64,
    pub baseline_policy: DerivedChoice,
    pub r_benchmark: f64,
    pub b_behavioral: f64,
    pub r_misreliant: f64,
    pub gamma_behavioral: Option<f64>,
    pub gamma_behavioral_per_participant: BTreeMap<String, f64>,
    pub gamma_rational: Option<f64>,
    /// Every signal determines its state. The ordering `R ≥ R^m ≥ B` is only
    /// guaranteed on the sample in that case.
    pub deterministic_posteriors: bool,
}

impl ConditionEstimates {
    pub fn delta(&self) -> f64 {
        complementation(self.r_benchmark, self.r_baseline)
    }

    /// `B > R∅`.
    pub fn complementary(&self) -> bool {
        self.b_behavioral > self.r_baseline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAnalysis {
    pub estimates: ConditionEstimates,
    pub losses: LossDecomposition,
    pub reliance: Option<RelianceClass>,
    pub advantage: AdvantageCurve,
}

/// Runs every estimator on `prepared` under `keying`.
pub fn analyze(prepared: &Prepared, keying: Keying, mode: BoundMode, ranking: Ranking) -> Result<ConditionAnalysis> {
    let obs = &prepared.observations;
    let rule = &prepared.rule;
    let baseline = rational_baseline(obs, rule)?;
    let model = SignalModel::fit(obs, keying, rule)?;
    let r_benchmark = rational_benchmark(obs, &model, rule)?;
    let b_behavioral = behavioral_performance(obs, rule)?;
    let reliance = optional(reliance_level(obs))?;
    let gamma_rational = optional(appropriate_reliance_level(obs, &model))?;
    let r_misreliant = misreliant_benchmark(obs, &model, rule, &behavioral_acceptances(obs), ranking)?;
    let delta = complementation(r_benchmark, baseline.payoff);
    let losses = decompose(r_benchmark, r_misreliant, b_behavioral, delta);
    let advantage = advantage_curve(obs, &model)?;

    let gamma_behavioral = reliance.as_ref().map(|r| r.pooled);
    let per_participant = reliance
        .as_ref()
        .map(|r| {
            r.per_participant
                .iter()
                .map(|(&p, &g)| (prepared.participants[p as usize].to_string(), g))
                .collect()
        })
        .unwrap_or_default();
    let class = gamma_behavioral.zip(gamma_rational).map(|(b, r)| classify_reliance(b, r));

    let estimates = ConditionEstimates {
        condition: prepared.condition.clone(),
        mode,
        n_observations: obs.len(),
        n_participants: obs.iter().map(|o| o.participant).collect::<alloc::collections::BTreeSet<_>>().len(),
        n_disagreements: reliance.as_ref().map_or(0, |r| r.disagreements),
        n_signals: model.joint().signal_count(),
        r_baseline: baseline.payoff,
        baseline_policy: baseline.policy,
        r_benchmark,
        b_behavioral,
        r_misreliant,
        gamma_behavioral,
        gamma_behavioral_per_participant: per_participant,
        gamma_rational,
        deterministic_posteriors: model.joint().is_deterministic(),
    };
    Ok(ConditionAnalysis { estimates, losses, reliance: class, advantage })
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedReliance) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Overfit upper bound: raw signals.
pub fn analyze_overfit(prepared: &Prepared, ranking: Ranking) -> Result<ConditionAnalysis> {
    analyze(prepared, Keying::Raw, BoundMode::OverfitUpper, ranking)
}

#[derive(Debug, Clone)]
pub struct DiscretizedAnalysis {
    pub analysis: ConditionAnalysis,
    pub discretizer: Discretizer,
    pub selection: KSelectionDiagnostics,
}

/// Discretized lower bound: k chosen on a participant holdout, clusters refit on all data.
pub fn analyze_discretized(prepared: &Prepared, cfg: &SelectKConfig, ranking: Ranking) -> Result<DiscretizedAnalysis> {
    let (discretizer, selection) = select_k(prepared, cfg)?;
    let keying = discretizer.keying(&prepared.signals)?;
    let analysis = analyze(prepared, keying, BoundMode::DiscretizedLower, ranking)?;
    Ok(DiscretizedAnalysis { analysis, discretizer, selection })
}
