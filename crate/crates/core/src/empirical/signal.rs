use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::task::{Outcome, OutcomeSpace};

/// Encodes the signal `v̂ = (x, yH, yAI)` as a numeric vector.
///
/// Binary labels encode as 0/1, other finite labels one-hot, and unit-interval
/// values as-is.
pub fn encode_signal(features: &[f64], human: Outcome, ai: Outcome, space: &OutcomeSpace) -> Vec<f64> {
    let mut v = Vec::with_capacity(features.len() + 2 * label_width(space));
    v.extend_from_slice(features);
    push_outcome(&mut v, human, space);
    push_outcome(&mut v, ai, space);
    v
}

fn label_width(space: &OutcomeSpace) -> usize {
    match space {
        OutcomeSpace::Labels { labels } => labels.len(),
        _ => 1,
    }
}

fn push_outcome(v: &mut Vec<f64>, outcome: Outcome, space: &OutcomeSpace) {
    match space {
        OutcomeSpace::Labels { labels } => {
            let start = v.len();
            v.resize(start + labels.len(), 0.0);
            if let Outcome::Label(i) = outcome {
                v[start + i as usize] = 1.0;
            }
        }
        _ => v.push(outcome.numeric()),
    }
}

/// Distinct encoded signal vectors, addressed by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalTable {
    feature_dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl SignalTable {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Leading coordinates that come from instance features.
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn vector(&self, id: u32) -> &[f64] {
        &self.vectors[id as usize]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Interns vectors by exact bit pattern (`-0.0` folded into `0.0`).
#[derive(Debug, Default)]
pub struct SignalTableBuilder {
    table: SignalTable,
    index: BTreeMap<Vec<u64>, u32>,
}

impl SignalTableBuilder {
    pub fn new(feature_dim: usize) -> Self {
        Self { table: SignalTable { feature_dim, vectors: Vec::new() }, index: BTreeMap::new() }
    }

    pub fn intern(&mut self, vector: Vec<f64>) -> u32 {
        let bits: Vec<u64> = vector.iter().map(|x| (x + 0.0).to_bits()).collect();
        let next = self.table.vectors.len() as u32;
        let id = *self.index.entry(bits).or_insert(next);
        if id == next {
            self.table.vectors.push(vector);
        }
        id
    }

    pub fn finish(self) -> SignalTable {
        self.table
    }
}

/// Zero-mean, unit-variance scaling of the feature coordinates.
///
/// Label coordinates (past `feature_dim`) pass through unchanged. Constant
/// features are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits on `vectors` weighted by `weights`.
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V], weights: &[f64], feature_dim: usize) -> Self {
        let total: f64 = weights.iter().sum();
        let mut mean = alloc::vec![0.0; feature_dim];
        for (v, &w) in vectors.iter().zip(weights) {
            for (m, x) in mean.iter_mut().zip(v.as_ref()) {
                *m += w * x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= total);
        let mut var = alloc::vec![0.0; feature_dim];
        for (v, &w) in vectors.iter().zip(weights) {
            for ((s, x), m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
                *s += w * (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / total);
                if sd > 0.0 { sd } else { 1.0 }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for ((x, m), s) in out.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
        out
    }
}
