//! Lloyd's k-means with seeded Forgy initialization.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Inertia after every assignment step, first entry from the initial centroids.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], mode: ExecMode) -> (Vec<usize>, f64) {
    let nearest = mode.map_slice(points, |p| {
        let mut best = (0, f64::INFINITY);
        for (j, c) in centroids.iter().enumerate() {
            let d = sq_dist(p, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    });
    let inertia = nearest.iter().map(|&(_, d)| d).sum();
    (nearest.into_iter().map(|(j, _)| j).collect(), inertia)
}

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<ClusterResult> {
    kmeans_with(points, k, seed, max_iter, ExecMode::default())
}

pub fn kmeans_with(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, mode: ExecMode) -> Result<ClusterResult> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("k must be in 1..={n}, got {k}")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("k-means points must share one dimension".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = sample(&mut rng, n, k).into_iter().map(|i| points[i].clone()).collect();
    let (mut assignments, mut inertia) = assign(points, &centroids, mode);
    let mut history = vec![inertia];
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for ((c, s), &m) in centroids.iter_mut().zip(sums).zip(&counts) {
            // empty clusters keep their previous centroid
            if m > 0 {
                *c = s.into_iter().map(|v| v / m as f64).collect();
            }
        }
        let (next, next_inertia) = assign(points, &centroids, mode);
        history.push(next_inertia);
        let converged = next == assignments;
        assignments = next;
        inertia = next_inertia;
        if converged {
            break;
        }
    }

    Ok(ClusterResult {
        centroids,
        assignments,
        inertia,
        inertia_history: history,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let r = kmeans(&pts, 7, 1, 50).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 7);
    }

    #[test]
    fn two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts = Vec::new();
        for _ in 0..200 {
            pts.push(vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]);
            pts.push(vec![10.0 + rng.gen_range(-0.5..0.5), 10.0 + rng.gen_range(-0.5..0.5)]);
        }
        let r = kmeans(&pts, 2, 3, 100).unwrap();
        let mut cs = r.centroids.clone();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!(cs[0].iter().all(|v| v.abs() < 0.15), "{cs:?}");
        assert!(cs[1].iter().all(|v| (v - 10.0).abs() < 0.15), "{cs:?}");
    }

    #[test]
    fn inertia_never_increases_and_assignments_are_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let r = kmeans(&pts, 6, 4, 100).unwrap();
        for w in r.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        for (p, &a) in pts.iter().zip(&r.assignments) {
            let d = sq_dist(p, &r.centroids[a]);
            assert!(r.centroids.iter().all(|c| d <= sq_dist(p, c)));
        }
    }

    #[test]
    fn too_many_clusters() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(matches!(kmeans(&pts, 3, 0, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn modes_agree() {
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()])
            .collect();
        let a = kmeans_with(&pts, 5, 1, 30, ExecMode::Sequential).unwrap();
        let b = kmeans_with(&pts, 5, 1, 30, ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
