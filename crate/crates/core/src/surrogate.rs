//! Shuffle and IAAFT surrogates, and ensemble medians of their
//! multifractal estimates.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Source, TimeSeries};
use crate::spectral::{Complex, FftPair};
use crate::synth::{derive_seed, rng};
use crate::wlmfa::{analyze_series, Estimate, WlmfaSettings};

pub const IAAFT_MIN_LENGTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateMethod {
    Shuffle,
    Iaaft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub method: SurrogateMethod,
    pub count: usize,
    pub max_iterations: usize,
    /// Relative change of the spectral error below which IAAFT stops.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            method: SurrogateMethod::Shuffle,
            count: 2000,
            max_iterations: 200,
            tolerance: 1e-6,
            seed: 42,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::config("surrogate_count", "at least 2 surrogates are required"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("iaaft_tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("iaaft_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Uniform random permutation (Fisher–Yates).
pub fn shuffle_surrogate(series: &TimeSeries, seed: u64) -> Result<TimeSeries> {
    let mut values = series.values().to_vec();
    values.shuffle(&mut rng(seed));
    series.with_values(values, Source::Surrogate, Some(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IaaftResult {
    pub series: TimeSeries,
    pub converged: bool,
    pub iterations: usize,
    /// Relative L2 distance between the surrogate's and the original's
    /// periodogram over the non-negative frequencies.
    pub spectral_error: f64,
}

/// Relative L2 distance between periodograms on bins 0..=n/2.
pub fn periodogram_distance(target_power: &[f64], power: &[f64]) -> f64 {
    let half = target_power.len() / 2 + 1;
    let num: f64 = (0..half).map(|k| (power[k] - target_power[k]).powi(2)).sum();
    let den: f64 = (0..half).map(|k| target_power[k].powi(2)).sum();
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}

fn power(fft: &FftPair, x: &[f64], buf: &mut Vec<Complex>) -> Vec<f64> {
    buf.clear();
    buf.extend(x.iter().map(|&v| Complex::new(v, 0.0)));
    fft.forward(buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

fn rank_remap(signal: &[f64], sorted: &[f64], order: &mut [usize], out: &mut [f64]) {
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    order.sort_by(|&a, &b| signal[a].total_cmp(&signal[b]).then(a.cmp(&b)));
    for (rank, &i) in order.iter().enumerate() {
        out[i] = sorted[rank];
    }
}

/// Iterative amplitude-adjusted Fourier transform surrogate.
///
/// Alternates imposing the original Fourier amplitudes and remapping to the
/// original values by rank. Stops when the rank order repeats, when the
/// spectral error changes by less than the tolerance (relative), or at the
/// iteration cap; the best iterate is returned in every case.
pub fn iaaft_surrogate(series: &TimeSeries, config: &SurrogateConfig, seed: u64) -> Result<IaaftResult> {
    let n = series.len();
    if n < IAAFT_MIN_LENGTH {
        return Err(Error::TooShort {
            context: "IAAFT surrogate",
            needed: IAAFT_MIN_LENGTH,
            got: n,
        });
    }
    let x = series.values();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let fft = FftPair::new(n);
    let mut buf = Vec::with_capacity(n);
    let target = power(&fft, x, &mut buf);
    let amplitude: Vec<f64> = target.iter().map(|p| p.sqrt()).collect();

    let mut current = x.to_vec();
    current.shuffle(&mut rng(seed));
    let mut order = vec![0usize; n];
    let mut next = vec![0.0; n];
    let mut best = current.clone();
    let mut best_error = periodogram_distance(&target, &power(&fft, &current, &mut buf));
    let mut previous_error = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        buf.clear();
        buf.extend(current.iter().map(|&v| Complex::new(v, 0.0)));
        fft.forward(&mut buf);
        for (c, &a) in buf.iter_mut().zip(&amplitude) {
            let norm = c.norm();
            *c = if norm > 0.0 {
                *c * (a / norm)
            } else {
                Complex::new(a, 0.0)
            };
        }
        fft.inverse(&mut buf);
        let shaped: Vec<f64> = buf.iter().map(|c| c.re).collect();
        rank_remap(&shaped, &sorted, &mut order, &mut next);

        let error = periodogram_distance(&target, &power(&fft, &next, &mut buf));
        let unchanged = next == current;
        std::mem::swap(&mut current, &mut next);
        if error < best_error {
            best_error = error;
            best.copy_from_slice(&current);
        }
        let small_change = previous_error.is_finite()
            && (previous_error - error).abs() <= config.tolerance * previous_error.max(f64::MIN_POSITIVE);
        if unchanged || small_change || error == 0.0 {
            converged = true;
            break;
        }
        previous_error = error;
    }
    Ok(IaaftResult {
        series: series.with_values(best, Source::Surrogate, Some(seed))?,
        converged,
        iterations,
        spectral_error: best_error,
    })
}

/// Per-q medians across a surrogate ensemble, next to the original's curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSummary {
    pub method: SurrogateMethod,
    pub count: usize,
    pub failures: usize,
    pub q: Vec<f64>,
    pub zeta_median: Vec<f64>,
    pub h_median: Vec<f64>,
    pub d_median: Vec<f64>,
    pub zeta_base: Vec<f64>,
    pub h_base: Vec<f64>,
    pub d_base: Vec<f64>,
    pub width_base: f64,
    pub width_median: f64,
    /// IAAFT only.
    pub converged: Option<usize>,
    pub max_spectral_error: Option<f64>,
}

/// Median with the two middle values averaged for even counts.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Spectrum width reported in surrogate summaries: h range over q in [−5, 5].
pub const WIDTH_Q_RANGE: (f64, f64) = (-5.0, 5.0);

fn curve_width(q: &[f64], h: &[f64]) -> f64 {
    let hs = q
        .iter()
        .zip(h)
        .filter(|(&q, _)| q >= WIDTH_Q_RANGE.0 && q <= WIDTH_Q_RANGE.1)
        .map(|(_, &h)| h);
    let (lo, hi) = hs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), h| (a.min(h), b.max(h)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Runs the wavelet-leader analysis on every surrogate and reports medians.
pub fn surrogate_analysis(
    series: &TimeSeries,
    config: &SurrogateConfig,
    settings: &WlmfaSettings,
) -> Result<SurrogateSummary> {
    config.validate()?;
    let base = analyze_series(series, settings)?.estimate;
    let runs: Vec<Result<(Estimate, Option<(bool, f64)>)>> = (0..config.count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, i);
            let (surrogate, info) = match config.method {
                SurrogateMethod::Shuffle => (shuffle_surrogate(series, seed)?, None),
                SurrogateMethod::Iaaft => {
                    let r = iaaft_surrogate(series, config, seed)?;
                    (r.series, Some((r.converged, r.spectral_error)))
                }
            };
            Ok((analyze_series(&surrogate, settings)?.estimate, info))
        })
        .collect();

    let mut estimates = Vec::with_capacity(runs.len());
    let mut infos = Vec::new();
    let mut failures = 0;
    let mut first = None;
    for r in runs {
        match r {
            Ok((e, info)) => {
                estimates.push(e);
                infos.extend(info);
            }
            Err(e) => {
                failures += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failures * 100 > config.count {
        return Err(Error::SurrogateAborted {
            failures,
            count: config.count,
            first: first.unwrap_or_default(),
        });
    }

    let q = base.scaling.q.clone();
    let column = |f: &dyn Fn(&Estimate, usize) -> f64| -> Vec<f64> {
        (0..q.len())
            .map(|i| median(&mut estimates.iter().map(|e| f(e, i)).collect::<Vec<_>>()))
            .collect()
    };
    let zeta_median = column(&|e, i| e.scaling.zeta[i]);
    let h_median = column(&|e, i| e.spectrum.h[i]);
    let d_median = column(&|e, i| e.spectrum.d[i]);
    let width_base = curve_width(&q, &base.spectrum.h);
    let width_median = curve_width(&q, &h_median);
    let (converged, max_spectral_error) = match config.method {
        SurrogateMethod::Shuffle => (None, None),
        SurrogateMethod::Iaaft => (
            Some(infos.iter().filter(|i| i.0).count()),
            Some(infos.iter().map(|i| i.1).fold(0.0, f64::max)),
        ),
    };
    Ok(SurrogateSummary {
        method: config.method,
        count: config.count,
        failures,
        zeta_median,
        h_median,
        d_median,
        zeta_base: base.scaling.zeta.clone(),
        h_base: base.spectrum.h.clone(),
        d_base: base.spectrum.d.clone(),
        q,
        width_base,
        width_median,
        converged,
        max_spectral_error,
    })
}
