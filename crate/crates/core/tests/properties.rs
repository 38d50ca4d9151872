use mixclust_core::clustering::{kmeans, KmeansOptions};
use mixclust_core::dsp::{istft, stft, StftConfig, Waveform};
use mixclust_core::features::normalized_phase_difference;
use mixclust_core::masks::{apply_mask, bpd_mask};
use mixclust_core::mat::Mat;
use mixclust_core::rng::stream;
use proptest::prelude::*;
use rand::Rng as _;

fn waveform(samples: Vec<f64>) -> Waveform {
    Waveform::new(samples, 16000)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Round trip on the fully overlapped interior for arbitrary signals of
    /// at least four frames.
    #[test]
    fn stft_round_trip_interior(seed in 0u64..1000, frames in 4usize..24) {
        let cfg = StftConfig::default_16k();
        let len = cfg.fft_size + (frames - 1) * cfg.hop;
        let mut rng = stream(seed, "prop-signal");
        let x = waveform((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let s = stft(&x, &cfg).unwrap();
        let y = istft(&s).unwrap();
        let lo = cfg.fft_size;
        let hi = len.saturating_sub(cfg.fft_size);
        prop_assume!(hi > lo);
        let mut err = 0.0;
        let mut sig = 0.0;
        for i in lo..hi {
            err += (y.samples[i] - x.samples[i]).powi(2);
            sig += x.samples[i].powi(2);
        }
        prop_assert!((err / sig).sqrt() < 1e-6);
    }

    #[test]
    fn stft_linearity(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let cfg = StftConfig::default_16k();
        let len = 2048;
        let mut rng = stream(seed, "prop-lin");
        let x = waveform((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let y = waveform((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mixed = waveform(
            x.samples.iter().zip(y.samples.iter()).map(|(&u, &v)| a * u + b * v).collect(),
        );
        let sm = stft(&mixed, &cfg).unwrap();
        let sx = stft(&x, &cfg).unwrap();
        let sy = stft(&y, &cfg).unwrap();
        for i in 0..sm.num_bins() {
            let expect = sx.as_slice()[i].scale(a) + sy.as_slice()[i].scale(b);
            prop_assert!((sm.as_slice()[i] - expect).abs() < 1e-10);
        }
    }

    /// Every mask partitions: masked spectra sum to the mixture bit-exactly.
    #[test]
    fn masked_spectra_partition_the_mixture(seed in 0u64..1000, n_sources in 1usize..4) {
        let cfg = StftConfig::default_16k();
        let mut rng = stream(seed, "prop-mask");
        let m1 = waveform((0..2048).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let m2 = waveform((0..2048).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let s1 = stft(&m1, &cfg).unwrap();
        let s2 = stft(&m2, &cfg).unwrap();
        let npd = normalized_phase_difference(&s1, &s2, -60.0).unwrap();
        prop_assume!(npd.valid_count() >= n_sources);
        let mut krng = stream(seed, "prop-kmeans");
        let mask = bpd_mask(&npd, n_sources, &mut krng).unwrap();
        let parts = apply_mask(&s1, &mask).unwrap();
        for i in 0..s1.num_bins() {
            let mut acc = mixclust_core::Complex::ZERO;
            for p in &parts {
                acc += p.as_slice()[i];
            }
            prop_assert_eq!(acc, s1.as_slice()[i]);
        }
    }

    /// K-means is deterministic in its seed and never loses points.
    #[test]
    fn kmeans_deterministic_and_total(seed in 0u64..500, n in 8usize..200, k in 1usize..5) {
        prop_assume!(n >= k);
        let mut rng = stream(seed, "prop-pts");
        let pts = Mat::from_vec(n, 2, (0..n * 2).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let a = kmeans(&pts, k, &KmeansOptions::default(), &mut stream(seed, "prop-km")).unwrap();
        let b = kmeans(&pts, k, &KmeansOptions::default(), &mut stream(seed, "prop-km")).unwrap();
        prop_assert_eq!(&a.assignments, &b.assignments);
        prop_assert!(a.assignments.iter().all(|&c| c < k));
        for w in a.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
    }
}
