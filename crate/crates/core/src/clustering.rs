//! Lloyd's K-means with k-means++ seeding and restarts. Used both to turn
//! phase-difference features into binary masks and to cluster embedding
//! rows at separation time.
//!
//! All data-dependent reductions (seeding walks, centroid sums, inertia)
//! run in a value-sorted order, so permuting the input rows permutes the
//! assignments identically, bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_input, Result};
use crate::mat::Mat;
use crate::math;

#[derive(Clone, Copy, Debug)]
pub struct KmeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            restarts: 10,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KmeansResult {
    /// Cluster index per input row, in input order.
    pub assignments: Vec<usize>,
    /// k×d centroid matrix.
    pub centroids: Mat,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

pub fn kmeans(
    points: &Mat,
    k: usize,
    opts: &KmeansOptions,
    rng: &mut ChaCha8Rng,
) -> Result<KmeansResult> {
    let n = points.rows();
    let d = points.cols();
    if k == 0 || d == 0 {
        return Err(invalid_input!("k and dimensionality must be at least 1"));
    }
    if n < k {
        return Err(invalid_input!("{n} points cannot form {k} clusters"));
    }
    if !points.is_finite() {
        return Err(invalid_input!("points contain non-finite values"));
    }

    // Value order shared by every restart.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points
            .row(a)
            .iter()
            .zip(points.row(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(core::cmp::Ordering::Equal)
    });

    let restarts = opts.restarts.max(1);
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.gen()).collect();
    let mut best: Option<KmeansResult> = None;
    for seed in seeds {
        let mut sub = ChaCha8Rng::seed_from_u64(seed);
        let run = lloyd(points, k, &order, opts, &mut sub);
        let better = match &best {
            None => true,
            Some(b) => run.inertia < b.inertia,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| math::sq(x - y)).sum()
}

fn lloyd(
    points: &Mat,
    k: usize,
    order: &[usize],
    opts: &KmeansOptions,
    rng: &mut ChaCha8Rng,
) -> KmeansResult {
    let n = points.rows();
    let d = points.cols();
    let mut centroids = seed_plus_plus(points, k, order, rng);
    let mut assignments = vec![0usize; n];
    let mut point_dist = vec![0.0f64; n];
    let mut history = Vec::new();

    let assign =
        |centroids: &Mat, assignments: &mut [usize], point_dist: &mut [f64]| -> (f64, bool) {
            let mut changed = false;
            for p in 0..n {
                let row = points.row(p);
                let mut best_c = 0usize;
                let mut best_d = f64::INFINITY;
                for c in 0..k {
                    let dd = dist_sq(row, centroids.row(c));
                    // Ties break toward the lowest centroid index.
                    if dd < best_d {
                        best_d = dd;
                        best_c = c;
                    }
                }
                if assignments[p] != best_c {
                    changed = true;
                    assignments[p] = best_c;
                }
                point_dist[p] = best_d;
            }
            let inertia = order.iter().map(|&p| point_dist[p]).sum();
            (inertia, changed)
        };

    let (mut inertia, _) = assign(&centroids, &mut assignments, &mut point_dist);
    history.push(inertia);
    let mut iterations = 0usize;

    for _ in 0..opts.max_iter {
        iterations += 1;
        // Update step: means accumulated in value order.
        let mut sums = Mat::zeros(k, d);
        let mut counts = vec![0usize; k];
        for &p in order {
            let c = assignments[p];
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(points.row(p).iter()) {
                *s += v;
            }
        }
        let mut new_centroids = Mat::zeros(k, d);
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (o, &s) in new_centroids.row_mut(c).iter_mut().zip(sums.row(c).iter()) {
                    *o = s * inv;
                }
            }
        }
        // Empty clusters grab the points farthest from their centroids.
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empties.is_empty() {
            let mut taken = vec![false; n];
            for &c in &empties {
                let mut far_p = None;
                let mut far_d = -1.0;
                for &p in order {
                    if !taken[p] && point_dist[p] > far_d {
                        far_d = point_dist[p];
                        far_p = Some(p);
                    }
                }
                let p = far_p.expect("n >= k guarantees a candidate");
                taken[p] = true;
                new_centroids.row_mut(c).copy_from_slice(points.row(p));
            }
        }

        let shift = (0..k)
            .map(|c| math::sqrt(dist_sq(centroids.row(c), new_centroids.row(c))))
            .fold(0.0f64, f64::max);
        centroids = new_centroids;

        let (new_inertia, changed) = assign(&centroids, &mut assignments, &mut point_dist);
        history.push(new_inertia);
        inertia = new_inertia;

        if shift < opts.tol || !changed {
            break;
        }
    }

    KmeansResult {
        assignments,
        centroids,
        inertia,
        iterations_run: iterations,
        inertia_history: history,
    }
}

/// k-means++: first centroid uniform, the rest drawn proportionally to the
/// squared distance from the nearest chosen centroid. The cumulative walks
/// run in value order.
fn seed_plus_plus(points: &Mat, k: usize, order: &[usize], rng: &mut ChaCha8Rng) -> Mat {
    let n = points.rows();
    let d = points.cols();
    let mut centroids = Mat::zeros(k, d);
    let first = order[(rng.gen::<f64>() * n as f64) as usize % n];
    centroids.row_mut(0).copy_from_slice(points.row(first));

    let mut d2 = vec![0.0f64; n];
    for p in 0..n {
        d2[p] = dist_sq(points.row(p), centroids.row(0));
    }
    for c in 1..k {
        let total: f64 = order.iter().map(|&p| d2[p]).sum();
        let u = rng.gen::<f64>();
        let chosen = if total > 0.0 {
            let target = u * total;
            let mut acc = 0.0;
            let mut chosen = order[n - 1];
            for &p in order {
                acc += d2[p];
                if acc >= target {
                    chosen = p;
                    break;
                }
            }
            chosen
        } else {
            // All remaining mass is zero (duplicate points); fall back to a
            // uniform draw so the stream stays aligned across inputs.
            order[(u * n as f64) as usize % n]
        };
        centroids.row_mut(c).copy_from_slice(points.row(chosen));
        for p in 0..n {
            d2[p] = d2[p].min(dist_sq(points.row(p), centroids.row(c)));
        }
    }
    centroids
}

/// Convenience wrapper for 1-D data.
pub fn kmeans_1d(
    values: &[f64],
    k: usize,
    opts: &KmeansOptions,
    rng: &mut ChaCha8Rng,
) -> Result<KmeansResult> {
    let m = Mat::from_vec(values.len(), 1, values.to_vec());
    kmeans(&m, k, opts, rng)
}
