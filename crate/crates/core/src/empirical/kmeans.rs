//! Lloyd's algorithm with k-means++ seeding.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
    /// Independent seedings; the fit with the lowest SSE is kept.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6, restarts: 4 }
    }
}

/// A fitted k-means model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub seed: u64,
    /// Which seeding produced this fit.
    pub restart: usize,
    pub iterations_run: usize,
    /// Weighted within-cluster sum of squared distances at the final centroids.
    pub sse: f64,
    /// SSE after each assignment step; the last entry equals `sse`.
    pub sse_trace: Vec<f64>,
}

impl Clustering {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Nearest centroid; ties go to the lowest cluster id.
    pub fn assign(&self, v: &[f64]) -> Result<u32> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(nearest(&self.centroids, v).0 as u32)
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Number of distinct vectors carrying positive weight.
fn distinct_count<V: AsRef<[f64]>>(vectors: &[V], weights: &[f64]) -> usize {
    let mut bits: Vec<Vec<u64>> = vectors
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(v, _)| v.as_ref().iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    bits.sort_unstable();
    bits.dedup();
    bits.len()
}

/// Unweighted k-means on `vectors`.
pub fn fit_kmeans<V: AsRef<[f64]>>(
    vectors: &[V],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Clustering> {
    let weights = vec![1.0; vectors.len()];
    fit_weighted(vectors, &weights, k, seed, KMeansConfig { max_iter, tol, restarts: 1 })
}

/// k-means where point `i` counts `weights[i]` times.
pub fn fit_weighted<V: AsRef<[f64]>>(
    vectors: &[V],
    weights: &[f64],
    k: usize,
    seed: u64,
    cfg: KMeansConfig,
) -> Result<Clustering> {
    if vectors.is_empty() {
        return Err(Error::Empty);
    }
    if weights.len() != vectors.len() {
        return Err(Error::DimensionMismatch { expected: vectors.len(), got: weights.len() });
    }
    let dim = vectors[0].as_ref().len();
    if let Some(v) = vectors.iter().find(|v| v.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: v.as_ref().len() });
    }
    if k == 0 || cfg.max_iter == 0 || cfg.restarts == 0 {
        return Err(Error::InvalidConfig("k-means needs k, max_iter and restarts >= 1".into()));
    }
    let distinct = distinct_count(vectors, weights);
    if k > distinct {
        return Err(Error::TooManyClusters { k, distinct });
    }
    let mut best = lloyd(vectors, weights, k, seed, cfg);
    for restart in 1..cfg.restarts {
        let run_seed = derive_seed(seed, Stream::KMeans, restart as u64);
        let fit = lloyd(vectors, weights, k, run_seed, cfg);
        if fit.sse < best.sse {
            best = Clustering { restart, ..fit };
        }
    }
    Ok(Clustering { seed, ..best })
}

/// One k-means++ seeding followed by Lloyd iterations.
fn lloyd<V: AsRef<[f64]>>(vectors: &[V], weights: &[f64], k: usize, seed: u64, cfg: KMeansConfig) -> Clustering {
    let dim = vectors[0].as_ref().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(vectors, weights, k, &mut rng);
    let mut labels = vec![0usize; vectors.len()];
    let mut sse_trace = Vec::new();
    let mut iterations_run = 0;
    let tol_sq = cfg.tol * cfg.tol;

    for _ in 0..cfg.max_iter {
        sse_trace.push(assign_all(vectors, weights, &centroids, &mut labels));

        let mut sums = vec![vec![0.0; dim]; k];
        let mut mass = vec![0.0; k];
        for ((v, &w), &j) in vectors.iter().zip(weights).zip(&labels) {
            mass[j] += w;
            for (s, x) in sums[j].iter_mut().zip(v.as_ref()) {
                *s += w * x;
            }
        }
        let mut max_shift = 0.0f64;
        for j in 0..k {
            // Empty clusters keep their centroid.
            if mass[j] > 0.0 {
                sums[j].iter_mut().for_each(|s| *s /= mass[j]);
                max_shift = max_shift.max(sq_dist(&sums[j], &centroids[j]));
                centroids[j] = core::mem::take(&mut sums[j]);
            }
        }
        iterations_run += 1;
        if max_shift < tol_sq {
            break;
        }
    }
    let sse = assign_all(vectors, weights, &centroids, &mut labels);
    sse_trace.push(sse);

    Clustering { k, centroids, seed, restart: 0, iterations_run, sse, sse_trace }
}

fn assign_all<V: AsRef<[f64]>>(
    vectors: &[V],
    weights: &[f64],
    centroids: &[Vec<f64>],
    labels: &mut [usize],
) -> f64 {
    let mut sse = 0.0;
    for ((v, &w), label) in vectors.iter().zip(weights).zip(labels.iter_mut()) {
        let (j, d) = nearest(centroids, v.as_ref());
        *label = j;
        sse += w * d;
    }
    sse
}

/// D²-weighted seeding. Requires `k` distinct positively weighted points.
fn plus_plus<V: AsRef<[f64]>>(vectors: &[V], weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let first = sample_index(weights, rng);
    let mut centroids = vec![vectors[first].as_ref().to_vec()];
    let mut d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v.as_ref(), &centroids[0])).collect();
    while centroids.len() < k {
        let scores: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        let next = sample_index(&scores, rng);
        let c = vectors[next].as_ref().to_vec();
        for (d, v) in d2.iter_mut().zip(vectors) {
            *d = d.min(sq_dist(v.as_ref(), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Index drawn with probability proportional to `scores` (only positive scores can be drawn).
fn sample_index(scores: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = scores.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 {
            if target < s {
                return i;
            }
            target -= s;
            last_positive = i;
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    /// Best SSE over every assignment of points to two non-empty clusters.
    fn brute_force_two_means(points: &[f64]) -> (f64, [f64; 2]) {
        let n = points.len();
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for mask in 1..(1u32 << n) - 1 {
            let (a, b): (Vec<f64>, Vec<f64>) =
                (0..n).map(|i| (mask >> i & 1 == 1, points[i])).fold((vec![], vec![]), |(mut a, mut b), (in_a, p)| {
                    if in_a { a.push(p) } else { b.push(p) }
                    (a, b)
                });
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let sse: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
            if sse < best.0 {
                let mut c = [ma, mb];
                c.sort_by(f64::total_cmp);
                best = (sse, c);
            }
        }
        best
    }

    #[test]
    fn two_clusters_in_one_dimension() {
        let points: Vec<Vec<f64>> = [0.0, 0.1, 10.0, 10.1].iter().map(|&x| vec![x]).collect();
        let (oracle_sse, oracle_c) = brute_force_two_means(&[0.0, 0.1, 10.0, 10.1]);
        assert_abs_diff_eq!(oracle_sse, 0.01, epsilon = 1e-12);
        for seed in 0..20 {
            let c = fit_kmeans(&points, 2, seed, 100, 1e-6).unwrap();
            let mut got: Vec<f64> = c.centroids.iter().map(|v| v[0]).collect();
            got.sort_by(f64::total_cmp);
            assert_abs_diff_eq!(got[0], oracle_c[0], epsilon = 1e-12);
            assert_abs_diff_eq!(got[1], oracle_c[1], epsilon = 1e-12);
            assert_abs_diff_eq!(c.sse, oracle_sse, epsilon = 1e-12);
            let far = c.centroids.iter().position(|v| (v[0] - 10.05).abs() < 1e-9).unwrap();
            assert_eq!(c.assign(&[9.0]).unwrap() as usize, far);
        }
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![5.0, 3.0]];
        let c = fit_kmeans(&pts, 1, 7, 100, 1e-6).unwrap();
        assert_abs_diff_eq!(c.centroids[0][0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.centroids[0][1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_cluster_per_distinct_point_has_zero_sse() {
        let pts = vec![vec![0.0], vec![1.0], vec![1.0], vec![4.0]];
        let c = fit_kmeans(&pts, 3, 1, 100, 1e-6).unwrap();
        assert_eq!(c.sse, 0.0);
        assert_eq!(
            fit_kmeans(&pts, 4, 1, 100, 1e-6).unwrap_err(),
            Error::TooManyClusters { k: 4, distinct: 3 }
        );
    }

    #[test]
    fn assign_ties_and_dimension() {
        let c = Clustering {
            k: 3,
            centroids: vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![5.0, 5.0]],
            seed: 0,
            restart: 0,
            iterations_run: 0,
            sse: 0.0,
            sse_trace: vec![],
        };
        assert_eq!(c.assign(&[5.0, 5.0]).unwrap(), 2);
        assert_eq!(c.assign(&[1.0, 0.0]).unwrap(), 0);
        assert_eq!(c.assign(&[1.0]).unwrap_err(), Error::DimensionMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn rejects_empty_and_degenerate_inputs() {
        let empty: Vec<Vec<f64>> = vec![];
        assert_eq!(fit_kmeans(&empty, 1, 0, 10, 1e-6).unwrap_err(), Error::Empty);
        assert!(fit_kmeans(&[vec![1.0]], 0, 0, 10, 1e-6).is_err());
        assert!(fit_kmeans(&[vec![1.0], vec![1.0, 2.0]], 1, 0, 10, 1e-6).is_err());
    }

    #[test]
    fn weights_act_as_multiplicities() {
        let pts = vec![vec![0.0], vec![3.0]];
        let c = fit_weighted(&pts, &[2.0, 1.0], 1, 0, KMeansConfig::default()).unwrap();
        assert_abs_diff_eq!(c.centroids[0][0], 1.0, epsilon = 1e-12);
        let dup = vec![vec![0.0], vec![0.0], vec![3.0]];
        let d = fit_kmeans(&dup, 1, 0, 100, 1e-6).unwrap();
        assert_abs_diff_eq!(c.sse, d.sse, epsilon = 1e-12);
    }

    #[test]
    fn sse_never_increases_between_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.random_range(2..60);
            let dim = rng.random_range(1..4);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            let k = rng.random_range(1..=n.min(6));
            let c = fit_kmeans(&pts, k, rng.random(), 100, 1e-6).unwrap();
            for w in c.sse_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", c.sse_trace);
            }
        }
    }
}
