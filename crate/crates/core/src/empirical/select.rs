//! Choosing the number of clusters by holdout payoff.
//!
//! Participants are split into a training and a test group. For each k the
//! clusters and a per-cluster best response are learned on the training group
//! and the best response is scored on the test group. The k with the highest
//! test payoff wins; ties go to the smaller k.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_weighted, strictly_better, Clustering, KMeansConfig, Keying, SignalTable, Standardizer};
use crate::analysis::{Observation, Prepared};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, Stream};
use crate::task::{DerivedChoice, ScoringRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectKConfig {
    pub k_grid: Vec<usize>,
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Independent holdout splits averaged per k.
    pub repeats: usize,
    pub kmeans: KMeansConfig,
}

impl Default for SelectKConfig {
    fn default() -> Self {
        Self {
            k_grid: vec![1, 2, 4, 8, 16, 32],
            holdout_fraction: 0.2,
            seed: 0,
            repeats: 1,
            kmeans: KMeansConfig::default(),
        }
    }
}

/// Feature standardization followed by nearest-centroid assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub standardizer: Standardizer,
    pub clustering: Clustering,
}

impl Discretizer {
    /// Fits on all observations of `prepared`, each signal weighted by its multiplicity.
    pub fn fit(prepared: &Prepared, k: usize, seed: u64, cfg: KMeansConfig) -> Result<Self> {
        let weights = signal_weights(&prepared.signals, prepared.observations.iter());
        Self::fit_weighted(&prepared.signals, &weights, k, seed, cfg)
    }

    fn fit_weighted(signals: &SignalTable, weights: &[f64], k: usize, seed: u64, cfg: KMeansConfig) -> Result<Self> {
        let (vectors, w): (Vec<&[f64]>, Vec<f64>) = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(id, &w)| (signals.vector(id as u32), w))
            .unzip();
        let standardizer = Standardizer::fit(&vectors, &w, signals.feature_dim());
        let scaled: Vec<Vec<f64>> = vectors.iter().map(|v| standardizer.transform(v)).collect();
        let clustering = fit_weighted(&scaled, &w, k, seed, cfg)?;
        Ok(Self { standardizer, clustering })
    }

    pub fn assign(&self, v: &[f64]) -> Result<u32> {
        self.clustering.assign(&self.standardizer.transform(v))
    }

    /// Cluster id for every signal in `signals`.
    pub fn keying(&self, signals: &SignalTable) -> Result<Keying> {
        let ids = signals.vectors().iter().map(|v| self.assign(v)).collect::<Result<Vec<_>>>()?;
        Ok(Keying::Clustered(ids))
    }
}

fn signal_weights<'a>(signals: &SignalTable, obs: impl Iterator<Item = &'a Observation>) -> Vec<f64> {
    let mut w = vec![0.0; signals.len()];
    for o in obs {
        w[o.signal as usize] += 1.0;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRecord {
    pub k: usize,
    pub train_payoff: f64,
    pub test_payoff: f64,
    /// `train_payoff − test_payoff`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionDiagnostics {
    pub records: Vec<KRecord>,
    /// Grid values larger than the number of distinct training signals.
    pub skipped: Vec<usize>,
    pub chosen_k: usize,
    pub holdout_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
}

/// Splits participants, sweeps `cfg.k_grid` and refits the chosen k on all data.
pub fn select_k(prepared: &Prepared, cfg: &SelectKConfig) -> Result<(Discretizer, KSelectionDiagnostics)> {
    let mut grid = cfg.k_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || grid[0] == 0 {
        return Err(Error::InvalidConfig("k grid must hold positive cluster counts".into()));
    }
    if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("holdout fraction {} not in (0, 1)", cfg.holdout_fraction)));
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    let present: alloc::collections::BTreeSet<u32> = prepared.observations.iter().map(|o| o.participant).collect();
    let participants: Vec<u32> = present.into_iter().collect();
    if participants.len() < 2 {
        return Err(Error::DegenerateSplit(format!("{} participant(s); need at least 2", participants.len())));
    }
    let n_test = (libm::round(cfg.holdout_fraction * participants.len() as f64) as usize).clamp(1, participants.len() - 1);

    let mut sums: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut skipped: Vec<usize> = Vec::new();
    for r in 0..cfg.repeats {
        let mut order = participants.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::HoldoutSplit, r as u64)));
        let test_set: alloc::collections::BTreeSet<u32> = order[..n_test].iter().copied().collect();
        let (test, train): (Vec<&Observation>, Vec<&Observation>) =
            prepared.observations.iter().partition(|o| test_set.contains(&o.participant));
        let weights = signal_weights(&prepared.signals, train.iter().copied());
        let distinct = weights.iter().filter(|&&w| w > 0.0).count();

        for &k in &grid {
            if k > distinct {
                if !skipped.contains(&k) {
                    skipped.push(k);
                }
                continue;
            }
            let seed = derive_seed(cfg.seed, Stream::KMeans, ((r as u64) << 32) | k as u64);
            let disc = Discretizer::fit_weighted(&prepared.signals, &weights, k, seed, cfg.kmeans)?;
            let Keying::Clustered(ids) = disc.keying(&prepared.signals)? else { unreachable!() };
            let policy = ClusterPolicy::learn(&train, &ids, &prepared.rule);
            let e = sums.entry(k).or_insert((0.0, 0.0));
            e.0 += policy.payoff(&train, &ids, &prepared.rule);
            e.1 += policy.payoff(&test, &ids, &prepared.rule);
        }
    }

    let reps = cfg.repeats as f64;
    let records: Vec<KRecord> = grid
        .iter()
        .filter(|k| !skipped.contains(k))
        .map(|&k| {
            let (train, test) = sums[&k];
            let (train_payoff, test_payoff) = (train / reps, test / reps);
            KRecord { k, train_payoff, test_payoff, gap: train_payoff - test_payoff }
        })
        .collect();
    let best = records
        .iter()
        .fold(None::<&KRecord>, |best, r| match best {
            Some(b) if !strictly_better(r.test_payoff, b.test_payoff) => Some(b),
            _ => Some(r),
        })
        .ok_or(Error::TooManyClusters { k: grid[0], distinct: 0 })?;
    let chosen_k = best.k;
    log::debug!("select_k: chose k = {chosen_k} from {records:?}");

    let discretizer = Discretizer::fit(prepared, chosen_k, derive_seed(cfg.seed, Stream::KMeans, chosen_k as u64), cfg.kmeans)?;
    skipped.sort_unstable();
    let diagnostics = KSelectionDiagnostics {
        records,
        skipped,
        chosen_k,
        holdout_fraction: cfg.holdout_fraction,
        repeats: cfg.repeats,
        seed: cfg.seed,
    };
    Ok((discretizer, diagnostics))
}

/// Best response per cluster, with the prior best response for clusters the
/// training group never reached.
struct ClusterPolicy {
    per_cluster: BTreeMap<u32, DerivedChoice>,
    fallback: DerivedChoice,
}

impl ClusterPolicy {
    fn learn(train: &[&Observation], ids: &[u32], rule: &ScoringRule) -> Self {
        let mut sums: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        let (mut human, mut ai) = (0.0, 0.0);
        for o in train {
            let h = rule.derived_payoff(DerivedChoice::Human, &o.derived.state);
            let a = rule.derived_payoff(DerivedChoice::Ai, &o.derived.state);
            let e = sums.entry(ids[o.signal as usize]).or_insert((0.0, 0.0));
            e.0 += h;
            e.1 += a;
            human += h;
            ai += a;
        }
        let per_cluster = sums
            .into_iter()
            .map(|(c, (h, a))| (c, if strictly_better(a, h) { DerivedChoice::Ai } else { DerivedChoice::Human }))
            .collect();
        // Baseline convention: ties go to the AI.
        let fallback = if strictly_better(human, ai) { DerivedChoice::Human } else { DerivedChoice::Ai };
        Self { per_cluster, fallback }
    }

    fn payoff(&self, obs: &[&Observation], ids: &[u32], rule: &ScoringRule) -> f64 {
        if obs.is_empty() {
            return 0.0;
        }
        let total: f64 = obs
            .iter()
            .map(|o| {
                let choice = self.per_cluster.get(&ids[o.signal as usize]).copied().unwrap_or(self.fallback);
                rule.derived_payoff(choice, &o.derived.state)
            })
            .sum();
        total / obs.len() as f64
    }
}
