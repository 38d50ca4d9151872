//! Iterative radix-2 FFT. Power-of-two lengths only, which the STFT config
//! enforces; arbitrary-length callers zero-pad.

use alloc::vec;
use alloc::vec::Vec;

use crate::complex::Complex;
use crate::math;

/// In-place forward FFT. `buf.len()` must be a power of two.
pub fn fft(buf: &mut [Complex]) {
    transform(buf, false);
}

/// In-place inverse FFT including the 1/N scaling.
pub fn ifft(buf: &mut [Complex]) {
    transform(buf, true);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v = v.scale(scale);
    }
}

fn transform(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * math::TAU / len as f64;
        let wlen = Complex::from_polar(1.0, ang);
        let mut start = 0;
        while start < n {
            let mut w = Complex::new(1.0, 0.0);
            for k in 0..len / 2 {
                let even = buf[start + k];
                let odd = buf[start + k + len / 2] * w;
                buf[start + k] = even + odd;
                buf[start + k + len / 2] = even - odd;
                w = w * wlen;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Smallest power of two that is >= n.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Forward FFT of a real signal zero-padded to `padded_len` (power of two).
pub fn real_fft_padded(signal: &[f64], padded_len: usize) -> Vec<Complex> {
    assert!(padded_len >= signal.len());
    let mut buf = vec![Complex::ZERO; padded_len];
    for (b, &s) in buf.iter_mut().zip(signal.iter()) {
        b.re = s;
    }
    fft(&mut buf);
    buf
}
