//! Synthetic experiments with known population quantities.
//!
//! Every trial draws an instance type, a true label and independently correct
//! or incorrect human and AI recommendations. A participant's behavioral
//! policy is parameterized by a reliance probability and a discrimination
//! skill: with probability `skill` a disagreement is resolved by ranking the
//! population advantage of its signal (accepting the AI on the best
//! `reliance` share of disagreement mass), otherwise the AI is accepted with
//! probability `reliance` regardless of the signal.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::empirical::strictly_better;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, Stream};
use crate::task::{DecisionTask, DerivedChoice, DerivedState, Outcome, OutcomeSpace, ScoringRule, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceType {
    pub probability: f64,
    pub human_accuracy: f64,
    pub ai_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicy {
    /// Share of disagreements on which the AI is accepted.
    pub reliance: f64,
    /// Probability of resolving a disagreement by advantage rank instead of at random.
    pub skill: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub name: String,
    #[serde(flatten)]
    pub policy: BehaviorPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureModel {
    /// No features; the signal is the recommendation pair.
    None,
    /// One feature holding the type index.
    TypeId,
    /// Type `t` centred at `t·separation/√dimension` in every coordinate,
    /// plus standard normal noise.
    GaussianClusters { dimension: usize, separation: f64 },
}

fn default_prior() -> f64 {
    0.5
}

fn default_labels() -> u32 {
    2
}

fn default_rule() -> ScoringRule {
    ScoringRule::ZeroOne
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub types: Vec<InstanceType>,
    /// `P(y = 1)` for binary tasks. Multi-class labels are uniform.
    #[serde(default = "default_prior")]
    pub prior_positive: f64,
    /// Number of labels; 2 gives a binary task.
    #[serde(default = "default_labels")]
    pub labels: u32,
    /// Participants per condition.
    pub participants: usize,
    pub trials_per_participant: usize,
    pub conditions: Vec<ConditionSpec>,
    #[serde(default)]
    pub seed: u64,
    pub features: FeatureModel,
    #[serde(default = "default_rule")]
    pub rule: ScoringRule,
}

impl GeneratorConfig {
    /// Two equiprobable types with human/AI accuracies (0.5, 0.9) and (0.9, 0.5).
    pub fn two_type(seed: u64) -> Self {
        Self {
            types: alloc::vec![
                InstanceType { probability: 0.5, human_accuracy: 0.5, ai_accuracy: 0.9 },
                InstanceType { probability: 0.5, human_accuracy: 0.9, ai_accuracy: 0.5 },
            ],
            prior_positive: 0.5,
            labels: 2,
            participants: 200,
            trials_per_participant: 20,
            conditions: alloc::vec![ConditionSpec {
                name: "synthetic".to_string(),
                policy: BehaviorPolicy { reliance: 0.5, skill: 0.5 },
            }],
            seed,
            features: FeatureModel::TypeId,
            rule: ScoringRule::ZeroOne,
        }
    }

    pub fn space(&self) -> OutcomeSpace {
        if self.labels == 2 {
            OutcomeSpace::Binary
        } else {
            OutcomeSpace::Labels { labels: (0..self.labels).map(|l| l.to_string()).collect() }
        }
    }

    pub fn task(&self) -> Result<DecisionTask> {
        DecisionTask::new(self.space(), self.rule)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.types.is_empty() {
            return bad("at least one instance type is required".into());
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        for (i, t) in self.types.iter().enumerate() {
            if !unit(t.probability) || !unit(t.human_accuracy) || !unit(t.ai_accuracy) {
                return bad(format!("type {i}: probability and accuracies must lie in [0, 1]"));
            }
        }
        let total: f64 = self.types.iter().map(|t| t.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("type probabilities sum to {total}, not 1"));
        }
        if !unit(self.prior_positive) {
            return bad(format!("prior {} not in [0, 1]", self.prior_positive));
        }
        if self.labels < 2 {
            return bad("at least two labels are required".into());
        }
        if self.participants == 0 {
            return bad("participants must be at least 1".into());
        }
        if self.trials_per_participant == 0 {
            return bad("trials per participant must be at least 1".into());
        }
        if self.conditions.is_empty() {
            return bad("at least one condition is required".into());
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if c.name.is_empty() || self.conditions[..i].iter().any(|d| d.name == c.name) {
                return bad(format!("condition names must be non-empty and unique ({:?})", c.name));
            }
            if !unit(c.policy.reliance) || !unit(c.policy.skill) {
                return bad(format!("condition {}: reliance and skill must lie in [0, 1]", c.name));
            }
        }
        if let FeatureModel::GaussianClusters { dimension, separation } = self.features {
            if dimension == 0 || !separation.is_finite() || separation < 0.0 {
                return bad("gaussian clusters need dimension ≥ 1 and a finite separation ≥ 0".into());
            }
        }
        self.task().map(|_| ())
    }
}

/// Signal at type granularity: (type, human, AI).
type TypeSignal = (usize, u32, u32);

#[derive(Debug, Clone, Copy)]
struct Atom {
    signal: TypeSignal,
    truth: u32,
    mass: f64,
}

/// Exact joint distribution of (type, y, yH, yAI).
struct Population {
    atoms: Vec<Atom>,
    rule: ScoringRule,
}

impl Population {
    fn new(cfg: &GeneratorConfig) -> Self {
        let l = cfg.labels;
        let label_prob = |y: u32| match l {
            2 if y == 1 => cfg.prior_positive,
            2 => 1.0 - cfg.prior_positive,
            _ => 1.0 / f64::from(l),
        };
        let rec_prob = |acc: f64, rec: u32, y: u32| if rec == y { acc } else { (1.0 - acc) / f64::from(l - 1) };
        let mut atoms = Vec::new();
        for (t, ty) in cfg.types.iter().enumerate() {
            for y in 0..l {
                for h in 0..l {
                    for a in 0..l {
                        let mass = ty.probability * label_prob(y) * rec_prob(ty.human_accuracy, h, y) * rec_prob(ty.ai_accuracy, a, y);
                        if mass > 0.0 {
                            atoms.push(Atom { signal: (t, h, a), truth: y, mass });
                        }
                    }
                }
            }
        }
        Self { atoms, rule: cfg.rule }
    }

    fn payoff(&self, choice: DerivedChoice, atom: &Atom) -> f64 {
        let (_, h, a) = atom.signal;
        let state = DerivedState::new(Outcome::Label(atom.truth), Outcome::Label(h), Outcome::Label(a));
        self.rule.derived_payoff(choice, &state)
    }

    /// Per signal: (mass, expected human payoff mass, expected AI payoff mass).
    fn signals(&self, merge_types: bool) -> BTreeMap<TypeSignal, (f64, f64, f64)> {
        let mut out: BTreeMap<TypeSignal, (f64, f64, f64)> = BTreeMap::new();
        for atom in &self.atoms {
            let (t, h, a) = atom.signal;
            let key = if merge_types { (0, h, a) } else { (t, h, a) };
            let e = out.entry(key).or_insert((0.0, 0.0, 0.0));
            e.0 += atom.mass;
            e.1 += atom.mass * self.payoff(DerivedChoice::Human, atom);
            e.2 += atom.mass * self.payoff(DerivedChoice::Ai, atom);
        }
        out
    }

    /// Probability that the ranked rule accepts the AI on each disagreement
    /// signal, for a target reliance `r`.
    fn ranked_acceptance(&self, r: f64) -> BTreeMap<TypeSignal, f64> {
        let mut disagreements: Vec<(TypeSignal, f64, f64)> = self
            .signals(false)
            .into_iter()
            .filter(|((_, h, a), _)| h != a)
            .map(|(s, (m, hp, ap))| (s, m, (ap - hp) / m))
            .collect();
        let total: f64 = disagreements.iter().map(|d| d.1).sum();
        // Stable: equal advantages keep signal order.
        disagreements.sort_by(|x, y| y.2.total_cmp(&x.2));
        let mut cum = 0.0;
        let mut out = BTreeMap::new();
        for (s, m, _) in disagreements {
            let share = m / total;
            let (before, after) = (cum, cum + share);
            let p = if after <= r + 1e-12 {
                1.0
            } else if before >= r - 1e-12 {
                0.0
            } else {
                (r - before) / share
            };
            out.insert(s, p);
            cum = after;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAnalytic {
    pub name: String,
    /// Expected `B` under the condition's policy.
    pub b_behavioral: f64,
    /// Expected behavioral reliance level; equals the policy's reliance.
    pub gamma_behavioral: f64,
}

/// Population values of the estimated quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticQuantities {
    pub r_baseline: f64,
    pub baseline_policy: DerivedChoice,
    pub r_benchmark: f64,
    pub delta: f64,
    /// Absent when disagreements have probability zero.
    pub gamma_rational: Option<f64>,
    pub conditions: Vec<ConditionAnalytic>,
}

/// Exact enumeration of the population quantities at type granularity.
///
/// Fails for a feature model that hides the type when there is more than one
/// type, since the signal would then not determine the type-level posterior.
pub fn analytic(cfg: &GeneratorConfig) -> Result<AnalyticQuantities> {
    cfg.validate()?;
    let hides_type = matches!(cfg.features, FeatureModel::None);
    let active_types = cfg.types.iter().filter(|t| t.probability > 0.0).count();
    if hides_type && active_types > 1 {
        return Err(Error::UnsupportedOracle("feature model hides the instance type".into()));
    }
    let pop = Population::new(cfg);
    let (mut human, mut ai) = (0.0, 0.0);
    for atom in &pop.atoms {
        human += atom.mass * pop.payoff(DerivedChoice::Human, atom);
        ai += atom.mass * pop.payoff(DerivedChoice::Ai, atom);
    }
    let (r_baseline, baseline_policy) =
        if strictly_better(human, ai) { (human, DerivedChoice::Human) } else { (ai, DerivedChoice::Ai) };

    let mut r_benchmark = 0.0;
    let (mut dis_mass, mut ai_mass) = (0.0, 0.0);
    for ((_, h, a), (m, hp, ap)) in pop.signals(hides_type) {
        let ai_better = strictly_better(ap, hp);
        r_benchmark += if ai_better { ap } else { hp };
        if h != a {
            dis_mass += m;
            if ai_better {
                ai_mass += m;
            }
        }
    }
    let gamma_rational = (dis_mass > 0.0).then(|| ai_mass / dis_mass);

    let conditions = cfg
        .conditions
        .iter()
        .map(|c| {
            let ranked = pop.ranked_acceptance(c.policy.reliance);
            let b = pop
                .atoms
                .iter()
                .map(|atom| {
                    let accept = match ranked.get(&atom.signal) {
                        Some(p) => c.policy.skill * p + (1.0 - c.policy.skill) * c.policy.reliance,
                        None => 0.0,
                    };
                    atom.mass
                        * (accept * pop.payoff(DerivedChoice::Ai, atom)
                            + (1.0 - accept) * pop.payoff(DerivedChoice::Human, atom))
                })
                .sum();
            ConditionAnalytic { name: c.name.clone(), b_behavioral: b, gamma_behavioral: c.policy.reliance }
        })
        .collect();

    Ok(AnalyticQuantities {
        r_baseline,
        baseline_policy,
        r_benchmark,
        delta: r_benchmark - r_baseline,
        gamma_rational,
        conditions,
    })
}

fn draw_label(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> u32 {
    if cfg.labels == 2 {
        u32::from(rng.random_bool(cfg.prior_positive))
    } else {
        rng.random_range(0..cfg.labels)
    }
}

fn draw_recommendation(rng: &mut ChaCha8Rng, y: u32, accuracy: f64, labels: u32) -> u32 {
    if rng.random_bool(accuracy) {
        y
    } else {
        // Uniform over the wrong labels; a flip for binary tasks.
        let r = rng.random_range(0..labels - 1);
        if r >= y { r + 1 } else { r }
    }
}

/// Draws a dataset. Participant `j` overall uses its own derived seed.
pub fn generate(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let pop = Population::new(cfg);
    let cumulative: Vec<f64> = cfg
        .types
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t.probability;
            Some(*acc)
        })
        .collect();
    let width = format!("{}", cfg.participants.saturating_sub(1)).len();
    let mut trials = Vec::with_capacity(cfg.conditions.len() * cfg.participants * cfg.trials_per_participant);
    for (ci, cond) in cfg.conditions.iter().enumerate() {
        let ranked = pop.ranked_acceptance(cond.policy.reliance);
        for j in 0..cfg.participants {
            let global = (ci * cfg.participants + j) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::Participant, global));
            let participant_id = format!("{}-p{j:0width$}", cond.name);
            for i in 0..cfg.trials_per_participant {
                let u: f64 = rng.random();
                let t = cumulative.iter().position(|&c| u < c).unwrap_or(cfg.types.len() - 1);
                let ty = cfg.types[t];
                let y = draw_label(&mut rng, cfg);
                let h = draw_recommendation(&mut rng, y, ty.human_accuracy, cfg.labels);
                let a = draw_recommendation(&mut rng, y, ty.ai_accuracy, cfg.labels);
                let features = match cfg.features {
                    FeatureModel::None => Vec::new(),
                    FeatureModel::TypeId => alloc::vec![t as f64],
                    FeatureModel::GaussianClusters { dimension, separation } => {
                        let centre = t as f64 * separation / libm::sqrt(dimension as f64);
                        (0..dimension).map(|_| centre + rng.sample::<f64, _>(StandardNormal)).collect()
                    }
                };
                let action = if h == a {
                    h
                } else {
                    let p = if rng.random_bool(cond.policy.skill) {
                        ranked.get(&(t, h, a)).copied().unwrap_or(0.0)
                    } else {
                        cond.policy.reliance
                    };
                    if rng.random_bool(p) { a } else { h }
                };
                trials.push(Trial {
                    participant_id: participant_id.clone(),
                    condition_id: cond.name.clone(),
                    trial_index: i as u64,
                    features,
                    ground_truth: Outcome::Label(y),
                    human_rec: Outcome::Label(h),
                    ai_rec: Outcome::Label(a),
                    behavioral_action: Outcome::Label(action),
                    explanation_meta: None,
                });
            }
        }
    }
    Dataset::new(trials, cfg.task()?)
        .map(|(ds, _)| ds)
        .map_err(|report| Error::InvalidConfig(format!("generated data failed validation: {:?}", report.errors.first())))
}
