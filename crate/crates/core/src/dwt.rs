//! Daubechies filter banks and the periodic discrete wavelet transform.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;
use crate::spectral::Complex;

pub const MAX_VANISHING_MOMENTS: usize = 10;

/// Orthonormal Daubechies (extremal-phase) filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    vanishing_moments: usize,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl WaveletBasis {
    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn filter_len(&self) -> usize {
        self.lowpass.len()
    }
}

/// Daubechies filters with `vanishing_moments` = N in 1..=10 (2N taps).
///
/// Obtained by spectral factorization: the roots of the half-band
/// polynomial inside the unit circle, times (1 + z)^N.
pub fn build_wavelet(vanishing_moments: usize) -> Result<WaveletBasis> {
    let n = vanishing_moments;
    if !(1..=MAX_VANISHING_MOMENTS).contains(&n) {
        return Err(Error::UnsupportedWavelet(n));
    }
    // P(y) = Σ_{k<N} C(N−1+k, k) y^k, y = sin²(ω/2).
    let coeffs: Vec<f64> = (0..n).map(|k| binomial(n - 1 + k, k)).collect();
    let y_roots = polynomial_roots(&coeffs);

    let mut poly = vec![Complex::new(1.0, 0.0)];
    for _ in 0..n {
        poly = poly_mul(&poly, &[Complex::new(1.0, 0.0), Complex::new(1.0, 0.0)]);
    }
    for y in y_roots {
        // y = (2 − z − 1/z)/4  ⇔  z² − (2 − 4y) z + 1 = 0
        let b = Complex::new(2.0, 0.0) - y * 4.0;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) / 2.0;
        let z2 = (b - disc) / 2.0;
        let z = if z1.norm() < z2.norm() { z1 } else { z2 };
        poly = poly_mul(&poly, &[Complex::new(1.0, 0.0), -z]);
    }
    let raw: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let sum: f64 = raw.iter().sum();
    let lowpass: Vec<f64> = raw.iter().map(|v| v * std::f64::consts::SQRT_2 / sum).collect();
    let len = lowpass.len();
    let highpass = (0..len)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * lowpass[len - 1 - k]
        })
        .collect();
    Ok(WaveletBasis {
        vanishing_moments: n,
        lowpass,
        highpass,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn poly_mul(a: &[Complex], b: &[Complex]) -> Vec<Complex> {
    let mut out = vec![Complex::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(coeffs: &[f64], x: Complex) -> (Complex, Complex) {
    let mut p = Complex::new(0.0, 0.0);
    let mut dp = Complex::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Roots of Σ c_k x^k (ascending coefficients) by Aberth iteration
/// followed by Newton polishing.
fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex> {
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let lead = coeffs[degree];
    let radius = 1.0
        + coeffs[..degree]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0, f64::max);
    let mut roots: Vec<Complex> = (0..degree)
        .map(|k| Complex::from_polar(radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / degree as f64))
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let (p, dp) = poly_eval(coeffs, roots[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex = (0..degree)
                .filter(|&j| j != i)
                .map(|j| Complex::new(1.0, 0.0) / (roots[i] - roots[j]))
                .sum();
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
            roots[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + roots[i].norm()));
        }
        if max_step < 1e-15 {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = poly_eval(coeffs, *r);
            if dp.norm() == 0.0 {
                break;
            }
            *r -= p / dp;
        }
    }
    roots
}

/// Coefficient scaling convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Orthonormal,
    /// Orthonormal coefficients times 2^{−j/2}.
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
}

/// Detail coefficients per scale, j = 1 finest.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPyramid {
    details: Vec<Vec<f64>>,
    approximation: Vec<f64>,
    clean: Vec<usize>,
    n: usize,
    normalization: Normalization,
    boundary: Boundary,
}

impl CoefficientPyramid {
    /// Builds a pyramid from raw detail arrays (finest first) with every
    /// coefficient treated as unaffected by the boundary.
    pub fn from_details(details: Vec<Vec<f64>>, normalization: Normalization) -> Result<Self> {
        if details.is_empty() {
            return Err(Error::InsufficientScales { needed: 1, got: 0 });
        }
        if let Some(j) = details.iter().position(|d| d.is_empty()) {
            return Err(Error::EmptyScale { level: j + 1 });
        }
        let clean = details.iter().map(Vec::len).collect();
        let n = details[0].len() * 2;
        Ok(Self {
            details,
            approximation: Vec::new(),
            clean,
            n,
            normalization,
            boundary: Boundary::Periodic,
        })
    }

    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Details at scale `level` (1-based).
    pub fn details(&self, level: usize) -> &[f64] {
        &self.details[level - 1]
    }

    pub fn all_details(&self) -> &[Vec<f64>] {
        &self.details
    }

    pub fn approximation(&self) -> &[f64] {
        &self.approximation
    }

    /// Number of leading coefficients at `level` whose filter support does
    /// not wrap around the periodic boundary at any finer stage.
    pub fn clean_len(&self, level: usize) -> usize {
        self.clean[level - 1]
    }

    pub fn input_len(&self) -> usize {
        self.n
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Writes `scale,position,coefficient` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "scale,position,coefficient").map_err(io)?;
        for (j, d) in self.details.iter().enumerate() {
            for (k, v) in d.iter().enumerate() {
                writeln!(out, "{},{},{:.16e}", j + 1, k, v).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }
}

/// Largest J with 2^J · (2N − 1) ≤ n.
pub fn max_decomposition_level(n: usize, basis: &WaveletBasis) -> usize {
    let support = 2 * basis.vanishing_moments() - 1;
    let mut level = 0;
    while (support << (level + 1)) <= n {
        level += 1;
    }
    level
}

/// Periodic cascaded filter bank with L1 normalization.
pub fn dwt_forward(series: &TimeSeries, basis: &WaveletBasis, max_level: usize) -> Result<CoefficientPyramid> {
    dwt_forward_with(series.values(), basis, max_level, Normalization::L1)
}

pub fn dwt_forward_with(
    x: &[f64],
    basis: &WaveletBasis,
    max_level: usize,
    normalization: Normalization,
) -> Result<CoefficientPyramid> {
    if max_level == 0 {
        return Err(Error::invalid("max_level", "must be at least 1"));
    }
    let n = x.len();
    let support = 2 * basis.vanishing_moments() - 1;
    let needed = support.checked_shl(max_level as u32).unwrap_or(usize::MAX);
    if n < needed || max_level >= usize::BITS as usize {
        return Err(Error::TooShort {
            context: "wavelet decomposition depth",
            needed,
            got: n,
        });
    }
    let h = basis.lowpass();
    let g = basis.highpass();
    let len = h.len();
    let mut approx = x.to_vec();
    let mut clean_prev = n;
    let mut details = Vec::with_capacity(max_level);
    let mut clean = Vec::with_capacity(max_level);
    for j in 1..=max_level {
        let m = approx.len();
        let half = m / 2;
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        for k in 0..half {
            let mut sa = 0.0;
            let mut sd = 0.0;
            for l in 0..len {
                let v = approx[(2 * k + l) % m];
                sa += h[l] * v;
                sd += g[l] * v;
            }
            a[k] = sa;
            d[k] = sd;
        }
        if normalization == Normalization::L1 {
            let scale = 2f64.powf(-(j as f64) / 2.0);
            d.iter_mut().for_each(|v| *v *= scale);
        }
        clean_prev = if clean_prev >= len {
            ((clean_prev - len) / 2 + 1).min(half)
        } else {
            0
        };
        clean.push(clean_prev);
        details.push(d);
        approx = a;
    }
    Ok(CoefficientPyramid {
        details,
        approximation: approx,
        clean,
        n,
        normalization,
        boundary: Boundary::Periodic,
    })
}
