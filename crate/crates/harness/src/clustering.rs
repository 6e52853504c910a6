//! Clustering accuracy under the best label mapping, and centroid clustering
//! of fused opinions.

use kphd_core::model::{predict, MultiViewBatch, MultiViewModel};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};

pub const MAX_CLUSTERS: usize = 20;
const LLOYD_ITERATIONS: usize = 100;

/// Minimum-cost perfect assignment on a square matrix. Returns, for each
/// row, its assigned column.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based potentials; column 0 is a sentinel.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = INF;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

/// `counts[p][t]`: samples with predicted id `p` and true label `t`.
pub fn contingency(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<u64>>> {
    if pred.len() != truth.len() {
        return Err(HarnessError::Shape(format!("{} ids for {} labels", pred.len(), truth.len())));
    }
    let mut table = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(HarnessError::Shape(format!("id {} is not below {k}", p.max(t))));
        }
        table[p][t] += 1;
    }
    Ok(table)
}

/// Largest total of a one-to-one mapping from rows to columns.
pub fn best_matching(table: &[Vec<u64>]) -> u64 {
    let cost: Vec<Vec<i64>> = table.iter().map(|r| r.iter().map(|&c| -(c as i64)).collect()).collect();
    hungarian(&cost).iter().enumerate().map(|(r, &c)| table[r][c]).sum()
}

/// Fraction of samples matched under the best one-to-one mapping of
/// predicted ids to labels.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if k == 0 || k > MAX_CLUSTERS {
        return Err(HarnessError::Shape(format!("cluster count {k} outside 1..={MAX_CLUSTERS}")));
    }
    if pred.is_empty() {
        return Err(HarnessError::Shape("no cluster ids".into()));
    }
    let table = contingency(pred, truth, k)?;
    Ok(best_matching(&table) as f64 / pred.len() as f64)
}

/// Lloyd iterations from a k-means++ seeding. Ties go to the lowest centroid
/// index; an emptied cluster keeps its centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > MAX_CLUSTERS {
        return Err(HarnessError::Shape(format!("cluster count {k} outside 1..={MAX_CLUSTERS}")));
    }
    if k == 1 {
        return Ok(vec![0; points.len()]);
    }
    if points.len() < k {
        return Err(HarnessError::Shape(format!("{} points for {k} clusters", points.len())));
    }
    let mut centroids = seed_centroids(points, k, seed);
    let mut ids = vec![usize::MAX; points.len()];
    for _ in 0..LLOYD_ITERATIONS {
        let mut changed = false;
        for (p, id) in points.iter().zip(ids.iter_mut()) {
            let nearest = nearest(&centroids, p);
            if nearest != *id {
                *id = nearest;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &id) in points.iter().zip(&ids) {
            counts[id] += 1;
            for (s, x) in sums[id].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(ids)
}

fn seed_centroids(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| sq_dist(&centroids[nearest(&centroids, p)], p)).collect();
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(&mut rng),
            // Every point sits on a centroid already.
            Err(_) => rng.random_range(0..points.len()),
        };
        centroids.push(points[next].clone());
    }
    centroids
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, centre) in centroids.iter().enumerate() {
        let d = sq_dist(centre, p);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

/// Cluster ids from k-means on the fused projected probabilities.
pub fn cluster_assignments(model: &MultiViewModel, batch: &MultiViewBatch, k: usize, seed: u64) -> Result<Vec<usize>> {
    let pred = predict(model, batch, None)?;
    let points: Vec<Vec<f64>> = pred.fused.iter().map(|op| op.projected()).collect();
    kmeans(&points, k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_permutation() {
        let truth = [0, 1, 2, 2, 1, 0, 0];
        assert_eq!(clustering_accuracy(&truth, &truth, 3).unwrap(), 1.0);
        let perm = [2, 0, 1];
        let pred: Vec<usize> = truth.iter().map(|&t| perm[t]).collect();
        assert_eq!(clustering_accuracy(&pred, &truth, 3).unwrap(), 1.0);
    }

    #[test]
    fn hungarian_small_case() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = hungarian(&cost);
        let total: i64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 5);
    }

    #[test]
    fn rejects_large_k() {
        assert!(clustering_accuracy(&[0], &[0], 21).is_err());
        assert!(clustering_accuracy(&[0], &[0], 20).is_ok());
    }

    #[test]
    fn kmeans_single_cluster_and_determinism() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        assert_eq!(kmeans(&pts, 1, 0).unwrap(), vec![0; 10]);
        assert_eq!(kmeans(&pts, 3, 4).unwrap(), kmeans(&pts, 3, 4).unwrap());
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, centre) in [(0.0, 0.0), (5.0, 5.0), (0.0, 9.0)].iter().enumerate() {
            for j in 0..20 {
                pts.push(vec![centre.0 + 0.01 * j as f64, centre.1 - 0.01 * j as f64]);
                truth.push(c);
            }
        }
        for seed in 0..5 {
            let ids = kmeans(&pts, 3, seed).unwrap();
            let ca = clustering_accuracy(&ids, &truth, 3).unwrap();
            assert_eq!(ca, 1.0, "seed {seed}");
        }
    }
}
