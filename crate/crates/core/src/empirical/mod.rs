//! Empirical joint distribution over derived states and signals.
//!
//! Every observation adds one count to the cell of its (signal key, derived
//! state); probabilities are counts over the total. Posteriors follow by Bayes
//! rule, `π(θ̂ | v̂) = π(θ̂, v̂) / π(v̂)`.
//!
//! Signals are keyed either by the raw encoded vector (the overfit upper bound)
//! or by a k-means cluster id (the discretized lower bound).

mod kmeans;
mod select;
mod signal;

pub use kmeans::{fit_kmeans, fit_weighted, Clustering, KMeansConfig};
pub use select::{select_k, Discretizer, KRecord, KSelectionDiagnostics, SelectKConfig};
pub use signal::{encode_signal, SignalTable, SignalTableBuilder, Standardizer};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::Observation;
use crate::error::{Error, Result};
use crate::task::{DerivedChoice, DerivedState, ScoringRule};

/// Identifies a signal in a [`JointDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum SignalKey {
    /// Index of an exact encoded signal vector in the [`SignalTable`].
    Raw(u32),
    /// Cluster id in `[0, k)`.
    Cluster(u32),
}

/// How observations map to signal keys.
#[derive(Debug, Clone, PartialEq)]
pub enum Keying {
    Raw,
    /// Cluster id for every raw signal id.
    Clustered(Vec<u32>),
}

impl Keying {
    #[inline]
    pub fn key(&self, signal: u32) -> SignalKey {
        match self {
            Keying::Raw => SignalKey::Raw(signal),
            Keying::Clustered(ids) => SignalKey::Cluster(ids[signal as usize]),
        }
    }
}

/// Posterior-expected payoffs of the two derived choices for one signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPayoffs {
    pub human: f64,
    pub ai: f64,
}

impl PosteriorPayoffs {
    /// `E[S(yAI, y) | v̂] − E[S(yH, y) | v̂]`.
    #[inline]
    pub fn advantage(&self) -> f64 {
        self.ai - self.human
    }

    /// Best response; ties go to the human recommendation.
    #[inline]
    pub fn best(&self) -> DerivedChoice {
        if strictly_better(self.ai, self.human) {
            DerivedChoice::Ai
        } else {
            DerivedChoice::Human
        }
    }
}

/// `a > b` beyond floating-point noise in the accumulated expectations.
#[inline]
pub(crate) fn strictly_better(a: f64, b: f64) -> bool {
    a - b > 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Empirical distribution `π̃(θ̂, v̂)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointDistribution {
    cells: BTreeMap<(SignalKey, DerivedState), u64>,
    marginals: BTreeMap<SignalKey, u64>,
    total: u64,
}

/// Counts each observation into its (key, state) cell and normalizes.
pub fn build_joint(observations: &[Observation], keying: &Keying) -> Result<JointDistribution> {
    if observations.is_empty() {
        return Err(Error::Empty);
    }
    let mut joint = JointDistribution::default();
    for obs in observations {
        let key = keying.key(obs.signal);
        *joint.cells.entry((key, obs.derived.state)).or_insert(0) += 1;
        *joint.marginals.entry(key).or_insert(0) += 1;
    }
    joint.total = observations.len() as u64;
    Ok(joint)
}

impl JointDistribution {
    /// Number of observations counted.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, key: SignalKey, state: &DerivedState) -> f64 {
        self.cells.get(&(key, *state)).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    pub fn marginal(&self, key: SignalKey) -> f64 {
        self.marginals.get(&key).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    pub fn entries(&self) -> impl Iterator<Item = (SignalKey, DerivedState, f64)> + '_ {
        let n = self.total as f64;
        self.cells.iter().map(move |(&(k, s), &c)| (k, s, c as f64 / n))
    }

    pub fn signal_marginals(&self) -> impl Iterator<Item = (SignalKey, f64)> + '_ {
        let n = self.total as f64;
        self.marginals.iter().map(move |(&k, &c)| (k, c as f64 / n))
    }

    pub fn signal_count(&self) -> usize {
        self.marginals.len()
    }

    fn cells_of(&self, key: SignalKey) -> Result<(u64, impl Iterator<Item = (&DerivedState, u64)>)> {
        let m = *self.marginals.get(&key).ok_or(Error::MissingSignal(key))?;
        let lo = (key, DerivedState::MIN);
        let iter = self
            .cells
            .range(lo..)
            .take_while(move |((k, _), _)| *k == key)
            .map(|((_, s), &c)| (s, c));
        Ok((m, iter))
    }

    /// Distribution over derived states given `key`.
    pub fn posterior(&self, key: SignalKey) -> Result<Vec<(DerivedState, f64)>> {
        let (m, cells) = self.cells_of(key)?;
        let m = m as f64;
        Ok(cells.map(|(s, c)| (*s, c as f64 / m)).collect())
    }

    pub fn posterior_payoffs(&self, key: SignalKey, rule: &ScoringRule) -> Result<PosteriorPayoffs> {
        let (m, cells) = self.cells_of(key)?;
        let (mut human, mut ai) = (0.0, 0.0);
        for (s, c) in cells {
            let c = c as f64;
            human += c * rule.derived_payoff(DerivedChoice::Human, s);
            ai += c * rule.derived_payoff(DerivedChoice::Ai, s);
        }
        let m = m as f64;
        Ok(PosteriorPayoffs { human: human / m, ai: ai / m })
    }

    /// Posterior payoffs for every signal with positive mass.
    pub fn payoff_table(&self, rule: &ScoringRule) -> BTreeMap<SignalKey, PosteriorPayoffs> {
        self.marginals
            .keys()
            .map(|&k| (k, self.posterior_payoffs(k, rule).expect("key has positive marginal")))
            .collect()
    }

    /// True when every signal pins down a single state, i.e. all posteriors are point masses.
    pub fn is_deterministic(&self) -> bool {
        self.cells.len() == self.marginals.len()
    }
}

impl DerivedState {
    const MIN: DerivedState = DerivedState {
        truth: crate::task::Outcome::Label(0),
        human: crate::task::Outcome::Label(0),
        ai: crate::task::Outcome::Label(0),
    };
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{BehavioralChoice, DerivedObservation, Outcome};
    use approx::assert_abs_diff_eq;

    fn obs(signal: u32, y: u32, h: u32, a: u32) -> Observation {
        let state = DerivedState::new(Outcome::Label(y), Outcome::Label(h), Outcome::Label(a));
        Observation {
            participant: 0,
            trial_index: signal as u64,
            signal,
            derived: DerivedObservation {
                state,
                choice: BehavioralChoice::AgreementIndeterminate,
                action: Outcome::Label(y),
            },
        }
    }

    #[test]
    fn distinct_signals_get_uniform_mass() {
        let data = [obs(0, 1, 1, 0), obs(1, 0, 1, 0), obs(2, 1, 1, 1), obs(3, 0, 0, 1)];
        let joint = build_joint(&data, &Keying::Raw).unwrap();
        let entries: Vec<_> = joint.entries().collect();
        assert_eq!(entries.len(), 4);
        assert!(entries.iter().all(|e| e.2 == 0.25));
        assert!(joint.is_deterministic());
    }

    #[test]
    fn shared_signal_splits_over_states() {
        let data = [obs(0, 1, 1, 0), obs(0, 0, 1, 0)];
        let joint = build_joint(&data, &Keying::Raw).unwrap();
        assert_eq!(joint.signal_count(), 1);
        assert_eq!(joint.marginal(SignalKey::Raw(0)), 1.0);
        let post = joint.posterior(SignalKey::Raw(0)).unwrap();
        assert_eq!(post.len(), 2);
        assert!(post.iter().all(|p| p.1 == 0.5));
        assert!(!joint.is_deterministic());
    }

    #[test]
    fn posterior_from_hand_counts() {
        // Three counts with y = 1, one with y = 0.
        let data = [obs(5, 1, 1, 0), obs(5, 1, 1, 0), obs(5, 1, 0, 1), obs(5, 0, 1, 0)];
        let joint = build_joint(&data, &Keying::Raw).unwrap();
        let post = joint.posterior(SignalKey::Raw(5)).unwrap();
        let p_y1: f64 = post.iter().filter(|(s, _)| s.truth == Outcome::Label(1)).map(|p| p.1).sum();
        assert_abs_diff_eq!(p_y1, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(post.iter().map(|p| p.1).sum::<f64>(), 1.0, epsilon = 1e-12);
        let pay = joint.posterior_payoffs(SignalKey::Raw(5), &ScoringRule::ZeroOne).unwrap();
        assert_eq!(pay.human, 0.5);
        assert_eq!(pay.ai, 0.5);
        assert_eq!(pay.best(), DerivedChoice::Human);
    }

    #[test]
    fn point_mass_and_unseen_key() {
        let joint = build_joint(&[obs(0, 1, 0, 1)], &Keying::Raw).unwrap();
        let post = joint.posterior(SignalKey::Raw(0)).unwrap();
        assert_eq!(post, vec![(obs(0, 1, 0, 1).derived.state, 1.0)]);
        assert_eq!(joint.posterior(SignalKey::Raw(9)), Err(Error::MissingSignal(SignalKey::Raw(9))));
        assert_eq!(build_joint(&[], &Keying::Raw), Err(Error::Empty));
    }

    #[test]
    fn clustered_keying_with_one_cluster_per_signal_matches_raw() {
        let data = [obs(0, 1, 1, 0), obs(1, 0, 1, 0), obs(1, 1, 1, 0), obs(2, 0, 0, 1)];
        let raw = build_joint(&data, &Keying::Raw).unwrap();
        // Relabel signals 0,1,2 as clusters 2,0,1.
        let relabel = [2u32, 0, 1];
        let clustered = build_joint(&data, &Keying::Clustered(relabel.to_vec())).unwrap();
        for (k, s, p) in raw.entries() {
            let SignalKey::Raw(id) = k else { unreachable!() };
            assert_eq!(clustered.probability(SignalKey::Cluster(relabel[id as usize]), &s), p);
        }
        assert_eq!(raw.signal_count(), clustered.signal_count());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mass_sums_to_one(rows in proptest::collection::vec((0u32..6, 0u32..2, 0u32..2, 0u32..2), 1..200)) {
                let data: Vec<_> = rows.iter().map(|&(s, y, h, a)| obs(s, y, h, a)).collect();
                let joint = build_joint(&data, &Keying::Raw).unwrap();
                let total: f64 = joint.entries().map(|e| e.2).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for (k, m) in joint.signal_marginals() {
                    let cell_sum: f64 = joint.entries().filter(|e| e.0 == k).map(|e| e.2).sum();
                    prop_assert!((cell_sum - m).abs() < 1e-12);
                    let post: f64 = joint.posterior(k).unwrap().iter().map(|p| p.1).sum();
                    prop_assert!((post - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
