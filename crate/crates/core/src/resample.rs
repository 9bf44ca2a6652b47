//! Bootstrap resampling of every estimated quantity.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{ConditionAnalysis, Observation, Prepared};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleUnit {
    /// Whole participants with their trial sets intact.
    #[default]
    Participant,
    /// Individual trial rows.
    Trial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub iterations: usize,
    /// Units drawn per iteration; `None` draws as many as the data holds.
    pub sample_size: Option<usize>,
    pub seed: u64,
    pub unit: ResampleUnit,
    pub levels: Vec<f64>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { iterations: 1000, sample_size: None, seed: 0, unit: ResampleUnit::Participant, levels: vec![0.5, 0.95] }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("bootstrap needs at least one iteration".into()));
        }
        if self.sample_size == Some(0) {
            return Err(Error::InvalidConfig("bootstrap sample size must be at least 1".into()));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::InvalidConfig(format!("interval level {l} not in (0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    RBaseline,
    RBenchmark,
    BBehavioral,
    RMisreliant,
    GammaBehavioral,
    GammaRational,
    Delta,
    RelianceLoss,
    DiscriminationLoss,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::RBaseline,
        Quantity::RBenchmark,
        Quantity::BBehavioral,
        Quantity::RMisreliant,
        Quantity::GammaBehavioral,
        Quantity::GammaRational,
        Quantity::Delta,
        Quantity::RelianceLoss,
        Quantity::DiscriminationLoss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::RBaseline => "r_baseline",
            Quantity::RBenchmark => "r_benchmark",
            Quantity::BBehavioral => "b_behavioral",
            Quantity::RMisreliant => "r_misreliant",
            Quantity::GammaBehavioral => "gamma_behavioral",
            Quantity::GammaRational => "gamma_rational",
            Quantity::Delta => "delta",
            Quantity::RelianceLoss => "reliance_loss",
            Quantity::DiscriminationLoss => "discrimination_loss",
        }
    }

    /// Value in `a`; `None` for reliance levels without disagreements and
    /// normalized losses with a degenerate `Δ`.
    pub fn extract(self, a: &ConditionAnalysis) -> Option<f64> {
        let e = &a.estimates;
        let losses = (!a.losses.degenerate).then_some(&a.losses);
        match self {
            Quantity::RBaseline => Some(e.r_baseline),
            Quantity::RBenchmark => Some(e.r_benchmark),
            Quantity::BBehavioral => Some(e.b_behavioral),
            Quantity::RMisreliant => Some(e.r_misreliant),
            Quantity::GammaBehavioral => e.gamma_behavioral,
            Quantity::GammaRational => e.gamma_rational,
            Quantity::Delta => Some(a.losses.delta),
            Quantity::RelianceLoss => losses.map(|l| l.reliance_loss),
            Quantity::DiscriminationLoss => losses.map(|l| l.discrimination_loss),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub quantity: Quantity,
    pub point: Option<f64>,
    /// One entry per iteration.
    pub samples: Vec<Option<f64>>,
    /// Over the defined samples only; empty when none are defined.
    pub intervals: Vec<Interval>,
}

impl QuantitySummary {
    pub fn interval(&self, level: f64) -> Option<Interval> {
        self.intervals.iter().copied().find(|i| i.level == level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub iterations: usize,
    pub sample_size: usize,
    pub unit: ResampleUnit,
    pub seed: u64,
    pub quantities: Vec<QuantitySummary>,
    /// Iterations whose resample had no disagreement trials.
    pub undefined_reliance: Vec<usize>,
    /// Iterations with `|Δ|` at or below tolerance.
    pub degenerate_delta: Vec<usize>,
}

impl BootstrapResult {
    pub fn get(&self, q: Quantity) -> &QuantitySummary {
        self.quantities.iter().find(|s| s.quantity == q).expect("every quantity is summarized")
    }

    /// Collects per-iteration analyses (indexed by iteration) into summaries.
    pub fn assemble(
        point: &ConditionAnalysis,
        cfg: &BootstrapConfig,
        sample_size: usize,
        iterations: &[ConditionAnalysis],
    ) -> Result<Self> {
        let mut quantities = Vec::with_capacity(Quantity::ALL.len());
        for q in Quantity::ALL {
            let samples: Vec<Option<f64>> = iterations.iter().map(|a| q.extract(a)).collect();
            let defined: Vec<f64> = samples.iter().flatten().copied().collect();
            let intervals = if defined.is_empty() {
                Vec::new()
            } else {
                cfg.levels
                    .iter()
                    .map(|&level| intervals(&defined, level).map(|(lo, hi)| Interval { level, lo, hi }))
                    .collect::<Result<_>>()?
            };
            quantities.push(QuantitySummary { quantity: q, point: q.extract(point), samples, intervals });
        }
        let flagged = |f: fn(&ConditionAnalysis) -> bool| {
            iterations.iter().enumerate().filter(|(_, a)| f(a)).map(|(i, _)| i).collect()
        };
        Ok(Self {
            iterations: iterations.len(),
            sample_size,
            unit: cfg.unit,
            seed: cfg.seed,
            quantities,
            undefined_reliance: flagged(|a| a.estimates.gamma_behavioral.is_none()),
            degenerate_delta: flagged(|a| a.losses.degenerate),
        })
    }
}

/// Central percentile interval with linear interpolation between order statistics.
pub fn intervals(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("interval level {level} not in (0, 1)")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&sorted, tail), quantile(&sorted, 1.0 - tail)))
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Participants that have at least one observation, in first-appearance order.
fn present_participants(prepared: &Prepared) -> Vec<u32> {
    let mut seen = vec![false; prepared.participants.len()];
    let mut out = Vec::new();
    for o in &prepared.observations {
        if !core::mem::replace(&mut seen[o.participant as usize], true) {
            out.push(o.participant);
        }
    }
    out
}

/// Number of units a full-size resample draws.
pub fn unit_count(prepared: &Prepared, unit: ResampleUnit) -> usize {
    match unit {
        ResampleUnit::Participant => present_participants(prepared).len(),
        ResampleUnit::Trial => prepared.observations.len(),
    }
}

/// The resample of iteration `iteration`.
///
/// Participant copies drawn more than once become distinct participants, so
/// each copy keeps its own reliance constraint. Row resamples keep the
/// original participant labels.
pub fn resample(prepared: &Prepared, cfg: &BootstrapConfig, iteration: usize) -> Result<Prepared> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::Bootstrap, iteration as u64));
    match cfg.unit {
        ResampleUnit::Participant => {
            let present = present_participants(prepared);
            if present.is_empty() {
                return Err(Error::Empty);
            }
            let mut by_participant: BTreeMap<u32, Vec<&Observation>> = BTreeMap::new();
            for o in &prepared.observations {
                by_participant.entry(o.participant).or_default().push(o);
            }
            let n = cfg.sample_size.unwrap_or(present.len());
            let mut observations = Vec::with_capacity(prepared.observations.len());
            let mut names: Vec<String> = Vec::with_capacity(n);
            for copy in 0..n {
                let p = present[rng.random_range(0..present.len())];
                names.push(format!("{}~{copy}", prepared.participants[p as usize]));
                observations.extend(by_participant[&p].iter().map(|o| Observation { participant: copy as u32, ..**o }));
            }
            Ok(prepared.with_observations(observations, names))
        }
        ResampleUnit::Trial => {
            let all = &prepared.observations;
            if all.is_empty() {
                return Err(Error::Empty);
            }
            let n = cfg.sample_size.unwrap_or(all.len());
            let observations = (0..n).map(|_| all[rng.random_range(0..all.len())]).collect();
            Ok(prepared.with_observations(observations, prepared.participants.clone()))
        }
    }
}

/// Runs `analyze` on `cfg.iterations` resamples.
///
/// `analyze` receives the resample and the iteration index, which callers use
/// to derive per-iteration seeds (for example a k-means refit).
pub fn bootstrap<F>(prepared: &Prepared, point: &ConditionAnalysis, cfg: &BootstrapConfig, analyze: F) -> Result<BootstrapResult>
where
    F: Fn(&Prepared, usize) -> Result<ConditionAnalysis>,
{
    cfg.validate()?;
    let sample_size = cfg.sample_size.unwrap_or_else(|| unit_count(prepared, cfg.unit));
    let runs = (0..cfg.iterations)
        .map(|i| analyze(&resample(prepared, cfg, i)?, i))
        .collect::<Result<Vec<_>>>()?;
    BootstrapResult::assemble(point, cfg, sample_size, &runs)
}
