//! Separation scoring: gain-invariant projection SDR, permutation
//! resolution for unordered estimates, and the order statistics used by the
//! report writers.

use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::Waveform;
use crate::error::{invalid_input, Result};
use crate::math;

/// Hard cap in dB; estimates proportional to the reference hit it exactly.
pub const SDR_CAP_DB: f64 = 100.0;

/// Gain-invariant SDR: project the estimate onto the reference, call the
/// projection the target and everything else distortion. No time-shift
/// compensation is applied.
pub fn sdr(estimate: &Waveform, reference: &Waveform) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(invalid_input!(
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        ));
    }
    let ref_energy = reference.energy();
    if ref_energy <= 0.0 {
        return Err(invalid_input!("reference is all zero"));
    }
    let dot: f64 = estimate
        .samples
        .iter()
        .zip(reference.samples.iter())
        .map(|(&e, &r)| e * r)
        .sum();
    let gain = dot / ref_energy;
    let target_energy = gain * gain * ref_energy;
    let distortion: f64 = estimate
        .samples
        .iter()
        .zip(reference.samples.iter())
        .map(|(&e, &r)| math::sq(e - gain * r))
        .sum();
    if target_energy <= 0.0 {
        return Ok(-SDR_CAP_DB);
    }
    if distortion <= target_energy * 1e-10 {
        return Ok(SDR_CAP_DB);
    }
    Ok((10.0 * math::log10(target_energy / distortion)).clamp(-SDR_CAP_DB, SDR_CAP_DB))
}

/// All permutations of 0..n, n <= 4.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    assert!(n <= 4, "permutation search supports up to 4 sources");
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let n = used.len();
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// `permutation[j]` is the estimate index matched to reference `j`.
    pub permutation: Vec<usize>,
    /// SDR of the matched estimate per reference, in dB.
    pub sdrs: Vec<f64>,
}

/// Exhaustive assignment of estimates to references maximizing mean SDR.
pub fn resolve_permutation(estimates: &[Waveform], references: &[Waveform]) -> Result<Alignment> {
    let n = references.len();
    if estimates.len() != n || n == 0 {
        return Err(invalid_input!(
            "{} estimates vs {n} references",
            estimates.len()
        ));
    }
    if n > 4 {
        return Err(invalid_input!("permutation search supports up to 4 sources"));
    }
    let mut scores = vec![vec![0.0f64; n]; n];
    for (i, est) in estimates.iter().enumerate() {
        for (j, reference) in references.iter().enumerate() {
            scores[i][j] = sdr(est, reference)?;
        }
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(n) {
        let mean: f64 = (0..n).map(|j| scores[perm[j]][j]).sum::<f64>() / n as f64;
        if best.as_ref().map_or(true, |(m, _)| mean > *m) {
            best = Some((mean, perm));
        }
    }
    let (_, permutation) = best.expect("at least one permutation");
    let sdrs = (0..n).map(|j| scores[permutation[j]][j]).collect();
    Ok(Alignment { permutation, sdrs })
}

/// Median with linear interpolation between closest ranks.
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Quantile `p` in [0, 1] with linear interpolation at rank (n-1)p.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    Some(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Boxplot statistics: median, quartiles and whiskers at the most extreme
/// points within 1.5·IQR of the box.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let median = quantile(values, 0.5)?;
    let q1 = quantile(values, 0.25)?;
    let q3 = quantile(values, 0.75)?;
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = values
        .iter()
        .copied()
        .filter(|&v| v >= lo_fence)
        .fold(f64::INFINITY, f64::min);
    let whisker_hi = values
        .iter()
        .copied()
        .filter(|&v| v <= hi_fence)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(BoxStats {
        median,
        q1,
        q3,
        whisker_lo,
        whisker_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(), 16000)
    }

    #[test]
    fn identical_estimate_hits_the_cap() {
        let r = noise(4000, 1);
        assert_eq!(sdr(&r, &r).unwrap(), SDR_CAP_DB);
    }

    #[test]
    fn scaling_is_invisible() {
        let r = noise(4000, 2);
        let half = Waveform::new(r.samples.iter().map(|&v| 0.5 * v).collect(), 16000);
        assert_eq!(sdr(&half, &r).unwrap(), SDR_CAP_DB);
    }

    #[test]
    fn orthogonal_equal_power_noise_scores_zero_db() {
        let r = noise(16000, 3);
        let mut n = noise(16000, 4);
        // Gram-Schmidt: remove the reference component, then match power.
        let dot: f64 = n
            .samples
            .iter()
            .zip(r.samples.iter())
            .map(|(&a, &b)| a * b)
            .sum();
        let gain = dot / r.energy();
        for (nv, &rv) in n.samples.iter_mut().zip(r.samples.iter()) {
            *nv -= gain * rv;
        }
        let scale = math::sqrt(r.energy() / n.energy());
        let est = Waveform::new(
            r.samples
                .iter()
                .zip(n.samples.iter())
                .map(|(&a, &b)| a + scale * b)
                .collect(),
            16000,
        );
        let got = sdr(&est, &r).unwrap();
        assert!(math::fabs(got) < 0.1, "sdr {got}");
    }

    #[test]
    fn zero_reference_is_rejected() {
        let r = Waveform::zeros(100, 16000);
        let e = noise(100, 5);
        assert!(sdr(&e, &r).is_err());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let r = noise(100, 6);
        let e = noise(101, 7);
        assert!(sdr(&e, &r).is_err());
    }

    #[test]
    fn reversal_permutation_is_found() {
        let a = noise(2000, 8);
        let b = noise(2000, 9);
        let align = resolve_permutation(&[b.clone(), a.clone()], &[a, b]).unwrap();
        assert_eq!(align.permutation, vec![1, 0]);
        assert!(align.sdrs.iter().all(|&s| s == SDR_CAP_DB));
    }

    #[test]
    fn singleton_permutation_is_identity() {
        let a = noise(2000, 10);
        let align = resolve_permutation(core::slice::from_ref(&a), core::slice::from_ref(&a)).unwrap();
        assert_eq!(align.permutation, vec![0]);
    }

    #[test]
    fn planted_three_way_permutation_is_recovered() {
        let refs = [noise(2000, 11), noise(2000, 12), noise(2000, 13)];
        // Estimates are references shuffled by [2, 0, 1].
        let ests = [refs[2].clone(), refs[0].clone(), refs[1].clone()];
        let align = resolve_permutation(&ests, &refs).unwrap();
        assert_eq!(align.permutation, vec![1, 2, 0]);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let a = noise(500, 14);
        let b = noise(500, 15);
        assert!(resolve_permutation(&[a], &[b.clone(), b]).is_err());
    }

    #[test]
    fn quartiles_interpolate() {
        let vals = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(median(&vals), Some(2.5));
        assert_eq!(quantile(&vals, 0.25), Some(1.75));
        assert_eq!(quantile(&vals, 1.0), Some(4.0));
        let b = box_stats(&vals).unwrap();
        assert_eq!(b.median, 2.5);
        assert_eq!(b.whisker_lo, 1.0);
        assert_eq!(b.whisker_hi, 4.0);
    }
}
