//! FFT convolution with reusable plans; the direct sum is the reference
//! semantics, the FFT path is an equivalence-tested fast path.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

/// Full linear convolution, direct evaluation: out[j] = Σ_k a[k] b[j−k].
pub fn conv_direct<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a.len() + b.len() - 1;
    let mut out = vec![T::zero(); n];
    for (k, &ak) in a.iter().enumerate() {
        if ak == T::zero() {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[k + j] += ak * bj;
        }
    }
    out
}

/// One precomputed kernel spectrum for repeated convolutions against many
/// signals of bounded length.
pub struct PlannedConv<T: Scalar> {
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
    kernel_spec: Vec<Complex<T>>,
    kernel_len: usize,
    nfft: usize,
}

impl<T: Scalar> PlannedConv<T> {
    /// Plan for convolving `kernel` with signals of length ≤ `max_signal_len`.
    pub fn new(kernel: &[T], max_signal_len: usize) -> Self {
        let out_len = kernel.len() + max_signal_len - 1;
        let nfft = out_len.next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(nfft);
        let ifft = planner.plan_fft_inverse(nfft);
        let mut buf: Vec<Complex<T>> = kernel
            .iter()
            .map(|&x| Complex::new(x, T::zero()))
            .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
            .take(nfft)
            .collect();
        fft.process(&mut buf);
        PlannedConv { fft, ifft, kernel_spec: buf, kernel_len: kernel.len(), nfft }
    }

    pub fn kernel_len(&self) -> usize {
        self.kernel_len
    }

    /// Convolve with `signal`; returns the full convolution (length
    /// `kernel_len + signal.len() − 1`).
    pub fn convolve(&self, signal: &[T]) -> Vec<T> {
        assert!(self.kernel_len + signal.len() - 1 <= self.nfft);
        let mut buf: Vec<Complex<T>> = signal
            .iter()
            .map(|&x| Complex::new(x, T::zero()))
            .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
            .take(self.nfft)
            .collect();
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_spec) {
            *b = *b * *k;
        }
        self.ifft.process(&mut buf);
        let scale = T::of_usize(self.nfft).recip();
        buf.iter()
            .take(self.kernel_len + signal.len() - 1)
            .map(|c| c.re * scale)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let a: Vec<f64> = (0..37).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let b: Vec<f64> = (0..53).map(|i| ((i * 5 + 1) % 13) as f64 * 0.25).collect();
        let d = conv_direct(&a, &b);
        let p = PlannedConv::new(&a, b.len());
        let f = p.convolve(&b);
        assert_eq!(d.len(), f.len());
        for (x, y) in d.iter().zip(&f) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn planned_reuse_shorter_signal() {
        let a = vec![1.0f64, 2.0, 3.0];
        let p = PlannedConv::new(&a, 16);
        let f = p.convolve(&[1.0, 1.0]);
        assert_eq!(f.len(), 4);
        let d = conv_direct(&a, &[1.0, 1.0]);
        for (x, y) in d.iter().zip(&f) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
