//! Clustering affinity loss in factored form. The objective is the squared
//! Frobenius distance between the scaled self-similarities of the embedding
//! and the target,
//!
//!   (1/K)·|V'V|_F^2 - (2/sqrt(K·C))·|V'Y|_F^2 + (1/C)·|Y'Y|_F^2
//!     = | V·V'/sqrt(K) - Y·Y'/sqrt(C) |_F^2,
//!
//! evaluated through the small K×K, K×C and C×C Gram matrices so the L×L
//! affinities never materialize.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid_input, Result};
use crate::masks::{PartitionTarget, TargetData};
use crate::mat::Mat;
use crate::math;

fn check_rows(v: &Mat, y: &PartitionTarget) -> Result<()> {
    if v.rows() != y.rows() {
        return Err(invalid_input!(
            "embedding has {} rows, target {}",
            v.rows(),
            y.rows()
        ));
    }
    if v.rows() == 0 || v.cols() == 0 {
        return Err(invalid_input!("embedding must be non-empty"));
    }
    Ok(())
}

/// K×C cross-Gram V'Y without densifying Y.
fn cross_gram(v: &Mat, y: &PartitionTarget) -> Mat {
    let k = v.cols();
    match &y.data {
        TargetData::OneHot {
            assignments,
            classes,
        } => {
            let mut m = Mat::zeros(k, *classes);
            for (r, &a) in assignments.iter().enumerate() {
                let row = v.row(r);
                let c = a as usize;
                for (j, &vj) in row.iter().enumerate() {
                    *m.row_mut(j).get_mut(c).unwrap() += vj;
                }
            }
            m
        }
        TargetData::Column(col) => {
            let mut m = Mat::zeros(k, 1);
            for (r, &yv) in col.iter().enumerate() {
                if yv == 0.0 {
                    continue;
                }
                let row = v.row(r);
                for (j, &vj) in row.iter().enumerate() {
                    m.row_mut(j)[0] += yv * vj;
                }
            }
            m
        }
    }
}

/// |Y'Y|_F^2 in closed form: one-hot targets give the squared class counts,
/// a raw column gives the squared sum of squares. Per-class totals are
/// summed in sorted order so relabeling the classes cannot move the result
/// by even an ulp.
fn target_gram_sq(y: &PartitionTarget) -> f64 {
    match &y.data {
        TargetData::OneHot {
            assignments,
            classes,
        } => {
            let mut counts = vec![0.0f64; *classes];
            for &a in assignments {
                counts[a as usize] += 1.0;
            }
            let mut sq: Vec<f64> = counts.iter().map(|&c| c * c).collect();
            sq.sort_by(|a, b| a.total_cmp(b));
            sq.iter().sum()
        }
        TargetData::Column(col) => {
            let s: f64 = col.iter().map(|&v| v * v).sum();
            s * s
        }
    }
}

/// |V'Y|_F^2 with the same label-order canonicalization.
fn cross_gram_sq(vy: &Mat) -> f64 {
    let mut per_col = vec![0.0f64; vy.cols()];
    for r in 0..vy.rows() {
        for (c, &v) in vy.row(r).iter().enumerate() {
            per_col[c] += v * v;
        }
    }
    per_col.sort_by(|a, b| a.total_cmp(b));
    per_col.iter().sum()
}

/// The affinity loss; always >= 0.
pub fn dc_loss(v: &Mat, y: &PartitionTarget) -> Result<f64> {
    check_rows(v, y)?;
    let k = v.cols() as f64;
    let c = y.cols() as f64;
    let vv = v.gram().frobenius_sq();
    let vy = cross_gram_sq(&cross_gram(v, y));
    let yy = target_gram_sq(y);
    Ok(vv / k - 2.0 * vy / math::sqrt(k * c) + yy / c)
}

/// Gradient of `dc_loss` with respect to every entry of V:
/// (4/K)·V·(V'V) - (4/sqrt(K·C))·Y·(Y'V).
pub fn dc_loss_grad(v: &Mat, y: &PartitionTarget) -> Result<Mat> {
    check_rows(v, y)?;
    let l = v.rows();
    let k = v.cols();
    let kf = k as f64;
    let cf = y.cols() as f64;

    let gram = v.gram(); // K×K
    let mut grad = v.matmul(&gram); // L×K
    let scale_self = 4.0 / kf;
    for g in grad.as_mut_slice() {
        *g *= scale_self;
    }

    let vy = cross_gram(v, y); // K×C
    let scale_cross = 4.0 / math::sqrt(kf * cf);
    match &y.data {
        TargetData::OneHot { assignments, .. } => {
            for r in 0..l {
                let c = assignments[r] as usize;
                let out = grad.row_mut(r);
                for j in 0..k {
                    out[j] -= scale_cross * vy.get(j, c);
                }
            }
        }
        TargetData::Column(col) => {
            for r in 0..l {
                let yv = col[r];
                if yv == 0.0 {
                    continue;
                }
                let out = grad.row_mut(r);
                for j in 0..k {
                    out[j] -= scale_cross * yv * vy.get(j, 0);
                }
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use crate::masks::{BinaryMask, TargetKind};
    use crate::rng::stream;
    use rand::Rng;

    fn one_hot_target(assignments: Vec<u8>, classes: usize) -> PartitionTarget {
        let len = assignments.len();
        let mask = BinaryMask::new(assignments, 1, len, classes).unwrap();
        PartitionTarget::from_mask(TargetKind::Ds, &mask)
    }

    fn column_target(values: Vec<f64>) -> PartitionTarget {
        PartitionTarget::column(values)
    }

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = stream(seed, "loss-test");
        let mut m = Mat::zeros(rows, cols);
        for v in m.as_mut_slice() {
            *v = rng.gen_range(-1.0..1.0);
        }
        m
    }

    /// Dense L×L oracle: |V·V'/sqrt(K) - Y·Y'/sqrt(C)|_F^2.
    fn brute_force_loss(v: &Mat, y: &PartitionTarget) -> f64 {
        let dense = y.to_dense();
        let l = v.rows();
        let sk = math::sqrt(v.cols() as f64);
        let sc = math::sqrt(dense.cols() as f64);
        let mut acc = 0.0;
        for a in 0..l {
            for b in 0..l {
                let vv: f64 = v
                    .row(a)
                    .iter()
                    .zip(v.row(b).iter())
                    .map(|(x, y)| x * y)
                    .sum();
                let yy: f64 = dense
                    .row(a)
                    .iter()
                    .zip(dense.row(b).iter())
                    .map(|(x, y)| x * y)
                    .sum();
                acc += math::sq(vv / sk - yy / sc);
            }
        }
        acc
    }

    #[test]
    fn identical_one_hot_embedding_has_zero_loss() {
        let y = one_hot_target(vec![0, 1, 0, 1, 1], 2);
        let v = y.to_dense();
        let loss = dc_loss(&v, &y).unwrap();
        assert!(math::fabs(loss) < 1e-12, "loss {loss}");
    }

    #[test]
    fn hand_computed_two_row_case() {
        // V = [1, 0]^T, Y = [0, 1]^T, K = C = 1:
        // |V'V|^2 = 1, |Y'Y|^2 = 1, V'Y = 0, so the loss is 2.
        let v = Mat::from_vec(2, 1, vec![1.0, 0.0]);
        let y = column_target(vec![0.0, 1.0]);
        assert_eq!(dc_loss(&v, &y).unwrap(), 2.0);
    }

    #[test]
    fn factored_loss_matches_brute_force() {
        let mut rng = stream(5, "sizes");
        for trial in 0..40 {
            let l = rng.gen_range(2..=100);
            let k = rng.gen_range(1..=8);
            let v = random_mat(l, k, 100 + trial);
            // Alternate between one-hot and raw-column targets.
            let y = if trial % 2 == 0 {
                let classes = rng.gen_range(1..=4usize);
                let assignments = (0..l).map(|_| rng.gen_range(0..classes) as u8).collect();
                one_hot_target(assignments, classes)
            } else {
                column_target((0..l).map(|_| rng.gen_range(-1.0..1.0)).collect())
            };
            let fast = dc_loss(&v, &y).unwrap();
            let slow = brute_force_loss(&v, &y);
            let rel = math::fabs(fast - slow) / slow.max(1e-30);
            assert!(rel < 1e-9, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn loss_is_invariant_to_orthogonal_rotation() {
        let mut rng = stream(6, "rotation");
        for trial in 0..20 {
            let k = rng.gen_range(2..=5);
            let l = rng.gen_range(k..=60);
            let v = random_mat(l, k, 200 + trial);
            let y = one_hot_target(
                (0..l).map(|_| rng.gen_range(0..2) as u8).collect(),
                2,
            );
            // Random orthogonal Q by Gram-Schmidt.
            let mut q = random_mat(k, k, 300 + trial);
            for i in 0..k {
                for j in 0..i {
                    let dot: f64 = q
                        .row(i)
                        .iter()
                        .zip(q.row(j).iter())
                        .map(|(a, b)| a * b)
                        .sum();
                    let row_j = q.row(j).to_vec();
                    for (a, b) in q.row_mut(i).iter_mut().zip(row_j.iter()) {
                        *a -= dot * b;
                    }
                }
                let norm = math::sqrt(q.row(i).iter().map(|x| x * x).sum::<f64>());
                for a in q.row_mut(i).iter_mut() {
                    *a /= norm;
                }
            }
            let rotated = v.matmul(&q);
            let a = dc_loss(&v, &y).unwrap();
            let b = dc_loss(&rotated, &y).unwrap();
            assert!(math::fabs(a - b) <= 1e-9 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn loss_is_invariant_to_target_column_permutation() {
        let mut rng = stream(7, "perm");
        for trial in 0..20 {
            let l = rng.gen_range(4..=80);
            let classes = rng.gen_range(2..=4usize);
            let assignments: Vec<u8> = (0..l).map(|_| rng.gen_range(0..classes) as u8).collect();
            let v = random_mat(l, 4, 400 + trial);
            let y = one_hot_target(assignments.clone(), classes);
            // Permute class labels cyclically.
            let permuted: Vec<u8> = assignments
                .iter()
                .map(|&a| ((a as usize + 1) % classes) as u8)
                .collect();
            let y_perm = one_hot_target(permuted, classes);
            let a = dc_loss(&v, &y).unwrap();
            let b = dc_loss(&v, &y_perm).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gradient_is_zero_at_origin_and_at_the_minimum() {
        let y = one_hot_target(vec![0, 1, 1, 0], 2);
        let zero = Mat::zeros(4, 2);
        let g = dc_loss_grad(&zero, &y).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
        // V = Y with K = C sits at the global minimum.
        let v = y.to_dense();
        let g = dc_loss_grad(&v, &y).unwrap();
        assert!(g.as_slice().iter().all(|&v| math::fabs(v) < 1e-12));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = stream(8, "fd");
        for trial in 0..10 {
            let l = 20;
            let k = 4;
            let mut v = random_mat(l, k, 500 + trial);
            let y = if trial % 2 == 0 {
                one_hot_target((0..l).map(|_| rng.gen_range(0..3) as u8).collect(), 3)
            } else {
                column_target((0..l).map(|_| rng.gen_range(-1.0..1.0)).collect())
            };
            let grad = dc_loss_grad(&v, &y).unwrap();
            let h = 1e-5;
            let mut max_rel: f64 = 0.0;
            for idx in 0..l * k {
                let orig = v.as_slice()[idx];
                v.as_mut_slice()[idx] = orig + h;
                let up = dc_loss(&v, &y).unwrap();
                v.as_mut_slice()[idx] = orig - h;
                let down = dc_loss(&v, &y).unwrap();
                v.as_mut_slice()[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                let g = grad.as_slice()[idx];
                let rel = math::fabs(fd - g) / math::fabs(g).max(1e-6);
                max_rel = max_rel.max(rel);
            }
            assert!(max_rel < 1e-4, "trial {trial}: max rel {max_rel}");
        }
    }

    #[test]
    fn row_count_mismatch_is_rejected() {
        let v = random_mat(5, 2, 1);
        let y = one_hot_target(vec![0, 1, 0], 2);
        assert!(dc_loss(&v, &y).is_err());
        assert!(dc_loss_grad(&v, &y).is_err());
    }
}
