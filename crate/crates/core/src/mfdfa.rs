//! Multifractal detrended fluctuation analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;
use crate::regression::{ols_fit, LinearFit};
use crate::wlmfa::{legendre_from_zeta, QGrid, SingularitySpectrum};

pub const MIN_LENGTH: usize = 64;
pub const DEFAULT_ORDER: usize = 2;
pub const DEFAULT_WINDOWS: usize = 16;
pub const MIN_WINDOW: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdfaConfig {
    pub windows: Vec<usize>,
    /// Detrending polynomial order.
    pub order: usize,
    pub qgrid: QGrid,
}

impl MfdfaConfig {
    /// 16 geometrically spaced window sizes in [16, n/4], order 2.
    pub fn for_length(n: usize, qgrid: QGrid) -> Result<Self> {
        let windows = geometric_windows(MIN_WINDOW, n / 4, DEFAULT_WINDOWS);
        let config = Self {
            windows,
            order: DEFAULT_ORDER,
            qgrid,
        };
        config.validate(n)?;
        Ok(config)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.order < 1 {
            return Err(Error::config("mfdfa.order", "detrending order must be at least 1"));
        }
        if self.windows.is_empty() {
            return Err(Error::config("mfdfa.windows", "window grid is empty"));
        }
        if self.windows.iter().any(|&s| s < self.order + 2 || s > n / 4) {
            return Err(Error::config(
                "mfdfa.windows",
                format!("window sizes must lie in [{}, {}]", self.order + 2, n / 4),
            ));
        }
        if self.windows.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("mfdfa.windows", "window sizes must be strictly increasing"));
        }
        Ok(())
    }
}

/// Up to `count` distinct rounded sizes spaced geometrically in [lo, hi].
pub fn geometric_windows(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if hi < lo || count == 0 {
        return Vec::new();
    }
    if count == 1 || hi == lo {
        return vec![lo];
    }
    let ratio = (hi as f64 / lo as f64).ln() / (count - 1) as f64;
    let mut out: Vec<usize> = (0..count)
        .map(|i| (lo as f64 * (ratio * i as f64).exp()).round() as usize)
        .map(|s| s.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}

/// Running sum of the mean-removed series.
pub fn mfdfa_profile(series: &TimeSeries) -> Result<Vec<f64>> {
    if series.len() < MIN_LENGTH {
        return Err(Error::TooShort {
            context: "MFDFA",
            needed: MIN_LENGTH,
            got: series.len(),
        });
    }
    Ok(series.integrated()?.into_values())
}

/// Orthonormal basis for polynomials of degree ≤ order on 0..s.
fn polynomial_basis(s: usize, order: usize) -> Vec<Vec<f64>> {
    let mid = (s as f64 - 1.0) / 2.0;
    let half = mid.max(1.0);
    let t: Vec<f64> = (0..s).map(|i| (i as f64 - mid) / half).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for p in 0..=order {
        let mut v: Vec<f64> = t.iter().map(|x| x.powi(p as i32)).collect();
        for _ in 0..2 {
            for e in &basis {
                let dot: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    basis
}

fn residual_variance(segment: &[f64], basis: &[Vec<f64>]) -> f64 {
    let mut r = segment.to_vec();
    for e in basis {
        let dot: f64 = r.iter().zip(e).map(|(a, b)| a * b).sum();
        r.iter_mut().zip(e).for_each(|(a, b)| *a -= dot * b);
    }
    r.iter().map(|a| a * a).sum::<f64>() / r.len() as f64
}

/// F(s, q) over window sizes and moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fluctuations {
    pub windows: Vec<usize>,
    pub q: Vec<f64>,
    /// [window][q]
    pub f: Vec<Vec<f64>>,
    pub segments: Vec<usize>,
}

/// Segment variances from both ends of the profile, aggregated per q;
/// q = 0 uses the exponential of the mean log-variance.
pub fn mfdfa_fluctuations(profile: &[f64], config: &MfdfaConfig) -> Result<Fluctuations> {
    let n = profile.len();
    config.validate(n)?;
    let q = config.qgrid.values().to_vec();
    let rows: Vec<(Vec<f64>, usize)> = config
        .windows
        .par_iter()
        .map(|&s| {
            let basis = polynomial_basis(s, config.order);
            let count = n / s;
            let offset = n - count * s;
            let variances: Vec<f64> = (0..count)
                .map(|k| residual_variance(&profile[k * s..(k + 1) * s], &basis))
                .chain((0..count).map(|k| residual_variance(&profile[offset + k * s..offset + (k + 1) * s], &basis)))
                .collect();
            let logs: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
            let row = q
                .iter()
                .map(|&q| {
                    if q == 0.0 {
                        (0.5 * logs.iter().sum::<f64>() / logs.len() as f64).exp()
                    } else {
                        let a = q / 2.0;
                        let peak = logs.iter().map(|l| a * l).fold(f64::NEG_INFINITY, f64::max);
                        if !peak.is_finite() {
                            return if q > 0.0 { 0.0 } else { f64::INFINITY };
                        }
                        let mean = logs.iter().map(|l| (a * l - peak).exp()).sum::<f64>() / logs.len() as f64;
                        ((peak + mean.ln()) / q).exp()
                    }
                })
                .collect();
            (row, 2 * count)
        })
        .collect();
    let (f, segments) = rows.into_iter().unzip();
    Ok(Fluctuations {
        windows: config.windows.clone(),
        q,
        f,
        segments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdfaResult {
    pub q: Vec<f64>,
    /// Generalized Hurst exponents h(q).
    pub h: Vec<f64>,
    /// τ(q) = q h(q) − 1.
    pub tau: Vec<f64>,
    /// q h(q), on the same footing as the wavelet-leader ζ(q).
    pub zeta: Vec<f64>,
    /// dζ/dq at q = 0, which equals h(0).
    pub c1: f64,
    pub spectrum: SingularitySpectrum,
    pub fits: Vec<LinearFit>,
    pub windows: Vec<usize>,
}

/// Log-log slopes of F(s, q) against s, and the Legendre spectrum of q h(q).
pub fn mfdfa_exponents(fluct: &Fluctuations, config: &MfdfaConfig) -> Result<MfdfaResult> {
    if fluct.windows.len() < 5 {
        return Err(Error::InsufficientScales {
            needed: 5,
            got: fluct.windows.len(),
        });
    }
    let x: Vec<f64> = fluct.windows.iter().map(|&s| (s as f64).ln()).collect();
    let fits = (0..fluct.q.len())
        .map(|qi| {
            let y: Vec<f64> = fluct.f.iter().map(|row| row[qi].ln()).collect();
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonPositiveStructureFunction {
                    level: 0,
                    q: fluct.q[qi],
                });
            }
            ols_fit(&x, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let zeta: Vec<f64> = fluct.q.iter().zip(&h).map(|(q, h)| q * h).collect();
    let tau = zeta.iter().map(|z| z - 1.0).collect();
    let spectrum = legendre_from_zeta(&config.qgrid, &zeta)?;
    let c1 = h[config.qgrid.index_of(0.0).expect("q grid contains 0")];
    Ok(MfdfaResult {
        q: fluct.q.clone(),
        h,
        tau,
        zeta,
        c1,
        spectrum,
        fits,
        windows: fluct.windows.clone(),
    })
}

/// Profile, fluctuations and exponents with the default configuration.
pub fn mfdfa(series: &TimeSeries, qgrid: &QGrid) -> Result<MfdfaResult> {
    let config = MfdfaConfig::for_length(series.len(), qgrid.clone())?;
    let profile = mfdfa_profile(series)?;
    let fluct = mfdfa_fluctuations(&profile, &config)?;
    mfdfa_exponents(&fluct, &config)
}
