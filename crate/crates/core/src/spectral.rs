//! Thin FFT helpers over rustfft.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub use rustfft::num_complex::Complex64 as Complex;

pub fn fft(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_forward(data.len()).process(data);
}

/// Inverse transform including the 1/n factor.
pub fn ifft(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_inverse(data.len()).process(data);
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Planned forward and inverse transforms of one length, for repeated use.
pub struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Includes the 1/n factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.len as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut buf);
    buf
}

/// |X_k|² / n over all n bins, so the sum equals Σx².
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    fft_real(x).iter().map(|c| c.norm_sqr() / n).collect()
}

/// Fourier amplitudes |X_k| over all bins.
pub fn amplitudes(x: &[f64]) -> Vec<f64> {
    fft_real(x).iter().map(|c| c.norm()).collect()
}
