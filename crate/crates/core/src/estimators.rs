//! Expected-payoff estimators on the derived binary-adoption task.
//!
//! Every estimator averages *realized* derived payoffs over observations; the
//! posterior only decides which side the rational agent picks. Posterior ties
//! go to the human recommendation everywhere (benchmark, `γ^r` and the
//! mis-reliant ranking) so the three stay mutually consistent.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::Observation;
use crate::empirical::{build_joint, strictly_better, JointDistribution, Keying, PosteriorPayoffs, SignalKey};
use crate::error::{Error, Result};
use crate::task::{BehavioralChoice, DerivedChoice, ScoringRule};

/// The rational baseline and the two constant policies behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub payoff: f64,
    pub always_human: f64,
    pub always_ai: f64,
    /// Winning constant policy; ties go to the AI.
    pub policy: DerivedChoice,
}

/// Better of always-human and always-AI.
pub fn rational_baseline(observations: &[Observation], rule: &ScoringRule) -> Result<Baseline> {
    if observations.is_empty() {
        return Err(Error::Empty);
    }
    let n = observations.len() as f64;
    let (mut human, mut ai) = (0.0, 0.0);
    for o in observations {
        human += rule.derived_payoff(DerivedChoice::Human, &o.derived.state);
        ai += rule.derived_payoff(DerivedChoice::Ai, &o.derived.state);
    }
    let (always_human, always_ai) = (human / n, ai / n);
    let policy = if strictly_better(always_human, always_ai) { DerivedChoice::Human } else { DerivedChoice::Ai };
    let payoff = if policy == DerivedChoice::Human { always_human } else { always_ai };
    Ok(Baseline { payoff, always_human, always_ai, policy })
}

/// A joint distribution with its keying and the posterior payoffs per signal.
#[derive(Debug, Clone)]
pub struct SignalModel {
    keying: Keying,
    joint: JointDistribution,
    payoffs: BTreeMap<SignalKey, PosteriorPayoffs>,
}

impl SignalModel {
    pub fn fit(observations: &[Observation], keying: Keying, rule: &ScoringRule) -> Result<Self> {
        let joint = build_joint(observations, &keying)?;
        let payoffs = joint.payoff_table(rule);
        Ok(Self { keying, joint, payoffs })
    }

    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }

    pub fn keying(&self) -> &Keying {
        &self.keying
    }

    pub fn key(&self, o: &Observation) -> SignalKey {
        self.keying.key(o.signal)
    }

    pub fn posterior_payoffs(&self, o: &Observation) -> Result<PosteriorPayoffs> {
        let key = self.key(o);
        self.payoffs.get(&key).copied().ok_or(Error::MissingSignal(key))
    }

    pub fn rational_choice(&self, o: &Observation) -> Result<DerivedChoice> {
        Ok(self.posterior_payoffs(o)?.best())
    }

    pub fn advantage(&self, o: &Observation) -> Result<f64> {
        Ok(self.posterior_payoffs(o)?.advantage())
    }
}

fn mean_payoff(
    observations: &[Observation],
    rule: &ScoringRule,
    mut choose: impl FnMut(usize, &Observation) -> Result<DerivedChoice>,
) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = 0.0;
    for (i, o) in observations.iter().enumerate() {
        total += rule.derived_payoff(choose(i, o)?, &o.derived.state);
    }
    Ok(total / observations.len() as f64)
}

/// Average realized payoff of the per-signal Bayesian best response.
pub fn rational_benchmark(observations: &[Observation], model: &SignalModel, rule: &ScoringRule) -> Result<f64> {
    mean_payoff(observations, rule, |_, o| model.rational_choice(o))
}

/// Average score of the behavioral action in the original task.
pub fn behavioral_performance(observations: &[Observation], rule: &ScoringRule) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::Empty);
    }
    let total: f64 = observations.iter().map(|o| rule.payoff(o.derived.action, o.derived.state.truth)).sum();
    Ok(total / observations.len() as f64)
}

/// Behavioral reliance, pooled and per participant.
#[derive(Debug, Clone, PartialEq)]
pub struct RelianceLevels {
    pub pooled: f64,
    /// Only participants with at least one disagreement.
    pub per_participant: BTreeMap<u32, f64>,
    pub acceptances: BTreeMap<u32, usize>,
    pub disagreements: usize,
}

/// AI acceptances on disagreement trials, per participant with at least one disagreement.
pub fn behavioral_acceptances(observations: &[Observation]) -> BTreeMap<u32, usize> {
    let mut counts = BTreeMap::new();
    for o in observations.iter().filter(|o| o.derived.disagreement()) {
        *counts.entry(o.participant).or_insert(0) += usize::from(o.derived.choice == BehavioralChoice::Ai);
    }
    counts
}

/// `γ^b = Pr[a^b = yAI | yAI ≠ yH]`.
pub fn reliance_level(observations: &[Observation]) -> Result<RelianceLevels> {
    let mut per: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for o in observations.iter().filter(|o| o.derived.disagreement()) {
        let e = per.entry(o.participant).or_insert((0, 0));
        e.0 += usize::from(o.derived.choice == BehavioralChoice::Ai);
        e.1 += 1;
    }
    let (accepted, disagreements) = per.values().fold((0, 0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    if disagreements == 0 {
        return Err(Error::UndefinedReliance);
    }
    Ok(RelianceLevels {
        pooled: accepted as f64 / disagreements as f64,
        per_participant: per.iter().map(|(&p, &(a, d))| (p, a as f64 / d as f64)).collect(),
        acceptances: per.iter().map(|(&p, &(a, _))| (p, a)).collect(),
        disagreements,
    })
}

/// `γ^r`: share of disagreement observations where the rational agent takes the AI side.
pub fn appropriate_reliance_level(observations: &[Observation], model: &SignalModel) -> Result<f64> {
    let (mut ai, mut total) = (0usize, 0usize);
    for o in observations.iter().filter(|o| o.derived.disagreement()) {
        total += 1;
        ai += usize::from(model.rational_choice(o)? == DerivedChoice::Ai);
    }
    if total == 0 {
        return Err(Error::UndefinedReliance);
    }
    Ok(ai as f64 / total as f64)
}

/// Rational AI acceptances on disagreements, per participant with at least one disagreement.
pub fn rational_acceptances(observations: &[Observation], model: &SignalModel) -> Result<BTreeMap<u32, usize>> {
    let mut counts = BTreeMap::new();
    for o in observations.iter().filter(|o| o.derived.disagreement()) {
        *counts.entry(o.participant).or_insert(0) += usize::from(model.rational_choice(o)? == DerivedChoice::Ai);
    }
    Ok(counts)
}

/// Which trials compete for a participant's AI acceptances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ranking {
    /// Disagreement trials only, so the count is exactly the reliance constraint.
    #[default]
    Disagreements,
    /// Every trial of the participant, agreements included.
    AllTrials,
}

/// Best payoff attainable when each participant accepts the AI on exactly
/// `acceptances[p]` trials, chosen by descending posterior advantage (ties by
/// trial index).
pub fn misreliant_benchmark(
    observations: &[Observation],
    model: &SignalModel,
    rule: &ScoringRule,
    acceptances: &BTreeMap<u32, usize>,
    ranking: Ranking,
) -> Result<f64> {
    let choices = misreliant_choices(observations, model, acceptances, ranking)?;
    mean_payoff(observations, rule, |i, _| Ok(choices[i]))
}

/// Per-observation choices of the mis-reliant agent.
pub fn misreliant_choices(
    observations: &[Observation],
    model: &SignalModel,
    acceptances: &BTreeMap<u32, usize>,
    ranking: Ranking,
) -> Result<Vec<DerivedChoice>> {
    let mut by_participant: BTreeMap<u32, Vec<(f64, u64, usize)>> = BTreeMap::new();
    let mut has_disagreement: BTreeMap<u32, bool> = BTreeMap::new();
    for (i, o) in observations.iter().enumerate() {
        let disagree = o.derived.disagreement();
        *has_disagreement.entry(o.participant).or_insert(false) |= disagree;
        if disagree || ranking == Ranking::AllTrials {
            by_participant.entry(o.participant).or_default().push((model.advantage(o)?, o.trial_index, i));
        }
    }
    let mut choices = alloc::vec![DerivedChoice::Human; observations.len()];
    for (p, mut ranked) in by_participant {
        let c = match acceptances.get(&p) {
            Some(&c) => c,
            None if has_disagreement[&p] => return Err(Error::MissingParticipant(p)),
            None => 0,
        };
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for &(_, _, i) in ranked.iter().take(c) {
            choices[i] = DerivedChoice::Ai;
        }
    }
    Ok(choices)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub quantile: f64,
    pub advantage: f64,
}

/// Posterior advantages ranked in descending order against their cumulative probability.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdvantageCurve {
    pub points: Vec<CurvePoint>,
}

impl AdvantageCurve {
    fn from_advantages(mut advantages: Vec<f64>) -> Self {
        advantages.sort_by(|a, b| b.total_cmp(a));
        let n = advantages.len() as f64;
        let points = advantages
            .into_iter()
            .enumerate()
            .map(|(i, advantage)| CurvePoint { quantile: (i + 1) as f64 / n, advantage })
            .collect();
        Self { points }
    }

    /// Share of the curve with strictly positive advantage.
    pub fn positive_share(&self) -> f64 {
        self.points.iter().take_while(|p| p.advantage > 0.0).last().map_or(0.0, |p| p.quantile)
    }
}

pub fn advantage_curve(observations: &[Observation], model: &SignalModel) -> Result<AdvantageCurve> {
    let adv = observations.iter().map(|o| model.advantage(o)).collect::<Result<Vec<_>>>()?;
    Ok(AdvantageCurve::from_advantages(adv))
}

/// The curve restricted to disagreement observations.
pub fn disagreement_advantage_curve(observations: &[Observation], model: &SignalModel) -> Result<AdvantageCurve> {
    let adv = observations
        .iter()
        .filter(|o| o.derived.disagreement())
        .map(|o| model.advantage(o))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdvantageCurve::from_advantages(adv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{DerivedObservation, DerivedState, Outcome};
    use approx::assert_abs_diff_eq;

    fn o(p: u32, i: u64, signal: u32, (y, h, a): (u32, u32, u32), action: u32) -> Observation {
        let state = DerivedState::new(Outcome::Label(y), Outcome::Label(h), Outcome::Label(a));
        let choice = if h == a {
            BehavioralChoice::AgreementIndeterminate
        } else if action == a {
            BehavioralChoice::Ai
        } else {
            BehavioralChoice::Human
        };
        Observation {
            participant: p,
            trial_index: i,
            signal,
            derived: DerivedObservation { state, choice, action: Outcome::Label(action) },
        }
    }

    /// The four-trial example: (y, yH, yAI) = (1,1,0), (0,1,0), (1,1,1), (0,0,1),
    /// behavioral actions 0, 1, 1, 0 (AI, human, agree, human), distinct signals.
    fn four_trials() -> Vec<Observation> {
        vec![
            o(0, 0, 0, (1, 1, 0), 0),
            o(0, 1, 1, (0, 1, 0), 1),
            o(0, 2, 2, (1, 1, 1), 1),
            o(0, 3, 3, (0, 0, 1), 0),
        ]
    }

    const RULE: ScoringRule = ScoringRule::ZeroOne;

    #[test]
    fn baseline_by_enumerating_constant_policies() {
        let b = rational_baseline(&four_trials(), &RULE).unwrap();
        // Human is right on trials 0, 2, 3; AI on 1, 2.
        assert_eq!(b.always_human, 0.75);
        assert_eq!(b.always_ai, 0.5);
        assert_eq!(b.payoff, 0.75);
        assert_eq!(b.policy, DerivedChoice::Human);
    }

    #[test]
    fn baseline_agreement_collapse_and_perfect_ai() {
        let agree: Vec<_> = (0..4).map(|i| o(0, i, 0, (1, i as u32 % 2, i as u32 % 2), 0)).collect();
        let b = rational_baseline(&agree, &RULE).unwrap();
        assert_eq!(b.always_human, b.always_ai);
        assert_eq!(b.payoff, 0.5);
        assert_eq!(b.policy, DerivedChoice::Ai);

        let ai_right: Vec<_> = (0..4).map(|i| o(0, i, 0, (1, 0, 1), 1)).collect();
        assert_eq!(rational_baseline(&ai_right, &RULE).unwrap().payoff, 1.0);
        assert_eq!(rational_baseline(&[], &RULE).unwrap_err(), Error::Empty);
    }

    #[test]
    fn benchmark_with_distinct_signals_is_perfect() {
        let data = four_trials();
        let model = SignalModel::fit(&data, Keying::Raw, &RULE).unwrap();
        assert_eq!(rational_benchmark(&data, &model, &RULE).unwrap(), 1.0);
    }

    #[test]
    fn benchmark_with_one_signal_equals_baseline() {
        let data: Vec<_> = four_trials().into_iter().map(|mut x| {
            x.signal = 0;
            x
        }).collect();
        let model = SignalModel::fit(&data, Keying::Raw, &RULE).unwrap();
        assert_eq!(
            rational_benchmark(&data, &model, &RULE).unwrap(),
            rational_baseline(&data, &RULE).unwrap().payoff
        );
    }

    #[test]
    fn benchmark_tie_goes_to_human() {
        // One signal seen with (1,1,0) and (0,1,0): both sides expect 0.5.
        let data = vec![o(0, 0, 0, (1, 1, 0), 1), o(0, 1, 0, (0, 1, 0), 1)];
        let model = SignalModel::fit(&data, Keying::Raw, &RULE).unwrap();
        assert_eq!(model.rational_choice(&data[0]).unwrap(), DerivedChoice::Human);
        assert_eq!(rational_benchmark(&data, &model, &RULE).unwrap(), 0.5);
    }

    #[test]
    fn missing_signal_is_an_error() {
        let data = four_trials();
        let model = SignalModel::fit(&data[..2], Keying::Raw, &RULE).unwrap();
        assert_eq!(rational_benchmark(&data, &model, &RULE), Err(Error::MissingSignal(SignalKey::Raw(2))));
    }

    #[test]
    fn behavioral_performance_examples() {
        assert_eq!(behavioral_performance(&four_trials(), &RULE).unwrap(), 0.5);
        let perfect: Vec<_> = (0..3).map(|i| o(0, i, 0, (1, 0, 1), 1)).collect();
        assert_eq!(behavioral_performance(&perfect, &RULE).unwrap(), 1.0);

        let state = DerivedState::new(Outcome::Value(1.0), Outcome::Value(0.2), Outcome::Value(0.9));
        let q = Observation {
            participant: 0,
            trial_index: 0,
            signal: 0,
            derived: DerivedObservation { state, choice: BehavioralChoice::Ai, action: Outcome::Value(0.5) },
        };
        assert_eq!(behavioral_performance(&[q], &ScoringRule::Quadratic).unwrap(), 0.75);
    }

    #[test]
    fn reliance_by_direct_count() {
        let r = reliance_level(&four_trials()).unwrap();
        assert_abs_diff_eq!(r.pooled, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.acceptances[&0], 1);
        assert_eq!(r.disagreements, 3);

        let all_ai: Vec<_> = (0..3).map(|i| o(0, i, i as u32, (1, 0, 1), 1)).collect();
        assert_eq!(reliance_level(&all_ai).unwrap().pooled, 1.0);

        let agree: Vec<_> = (0..3).map(|i| o(0, i, 0, (1, 1, 1), 1)).collect();
        assert_eq!(reliance_level(&agree).unwrap_err(), Error::UndefinedReliance);
        assert_eq!(appropriate_reliance_level(&agree, &SignalModel::fit(&agree, Keying::Raw, &RULE).unwrap()).unwrap_err(), Error::UndefinedReliance);
    }

    #[test]
    fn appropriate_reliance_examples() {
        let data = four_trials();
        let model = SignalModel::fit(&data, Keying::Raw, &RULE).unwrap();
        assert_abs_diff_eq!(appropriate_reliance_level(&data, &model).unwrap(), 1.0 / 3.0, epsilon = 1e-15);

        let ai_better: Vec<_> = (0..3).map(|i| o(0, i, i as u32, (1, 0, 1), 0)).collect();
        let model = SignalModel::fit(&ai_better, Keying::Raw, &RULE).unwrap();
        assert_eq!(appropriate_reliance_level(&ai_better, &model).unwrap(), 1.0);
    }

    #[test]
    fn misreliant_by_hand_ranking() {
        let data = four_trials();
        let model = SignalModel::fit(&data, Keying::Raw, &RULE).unwrap();
        let adv: Vec<f64> = data.iter().map(|x| model.advantage(x).unwrap()).collect();
        assert_eq!(adv, vec![-1.0, 1.0, 0.0, -1.0]);

        let c1 = BTreeMap::from([(0, 1)]);
        assert_eq!(misreliant_benchmark(&data, &model, &RULE, &c1, Ranking::Disagreements).unwrap(), 1.0);
        // c = 2 takes the +1 trial and the earlier of the two -1 trials.
        let c2 = BTreeMap::from([(0, 2)]);
        let choices = misreliant_choices(&data, &model, &c2, Ranking::Disagreements).unwrap();
        assert_eq!(choices, vec![DerivedChoice::Ai, DerivedChoice::Ai, DerivedChoice::Human, DerivedChoice::Human]);
        assert_eq!(misreliant_benchmark(&data, &model, &RULE, &c2, Ranking::Disagreements).unwrap(), 0.75);
        // Literal ranking over all trials lets the agreement trial absorb an acceptance.
        let literal = misreliant_choices(&data, &model, &c2, Ranking::AllTrials).unwrap();
        assert_eq!(literal, vec![DerivedChoice::Human, DerivedChoice::Ai, DerivedChoice::Ai, DerivedChoice::Human]);
        assert_eq!(misreliant_benchmark(&data, &model, &RULE, &c2, Ranking::AllTrials).unwrap(), 1.0);
    }

    #[test]
    fn misreliant_at_rational_counts_equals_benchmark() {
        let data = four_trials();
        let model = SignalModel::fit(&data, Keying::Raw, &RULE).unwrap();
        let c = rational_acceptances(&data, &model).unwrap();
        assert_eq!(
            misreliant_benchmark(&data, &model, &RULE, &c, Ranking::Disagreements).unwrap(),
            rational_benchmark(&data, &model, &RULE).unwrap()
        );
        assert_eq!(
            misreliant_benchmark(&data, &model, &RULE, &BTreeMap::new(), Ranking::Disagreements).unwrap_err(),
            Error::MissingParticipant(0)
        );
    }

    #[test]
    fn curves() {
        let data = four_trials();
        let model = SignalModel::fit(&data, Keying::Raw, &RULE).unwrap();
        let curve = advantage_curve(&data, &model).unwrap();
        let adv: Vec<f64> = curve.points.iter().map(|p| p.advantage).collect();
        let q: Vec<f64> = curve.points.iter().map(|p| p.quantile).collect();
        assert_eq!(adv, vec![1.0, 0.0, -1.0, -1.0]);
        assert_eq!(q, vec![0.25, 0.5, 0.75, 1.0]);

        let dis = disagreement_advantage_curve(&data, &model).unwrap();
        let gamma_r = appropriate_reliance_level(&data, &model).unwrap();
        assert_abs_diff_eq!(dis.positive_share(), gamma_r, epsilon = 1e-15);

        let flat: Vec<_> = (0..4).map(|i| o(0, i, 0, (1, 1, 0), 1)).collect();
        let model = SignalModel::fit(&flat, Keying::Raw, &RULE).unwrap();
        let curve = advantage_curve(&flat, &model).unwrap();
        assert!(curve.points.iter().all(|p| p.advantage == -1.0));
    }
}
