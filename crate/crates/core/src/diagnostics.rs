//! Autocorrelation, partial autocorrelation and the log-log periodogram slope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeSeries;
use crate::regression::ols_fit;
use crate::spectral::periodogram;

pub const MIN_SPECTRUM_LENGTH: usize = 64;

fn check_lag(series: &TimeSeries, max_lag: usize) -> Result<()> {
    if max_lag >= series.len() {
        return Err(Error::invalid(
            "max_lag",
            format!("{max_lag} must be below the series length {}", series.len()),
        ));
    }
    Ok(())
}

/// Biased autocorrelation (denominator n) for lags 0..=max_lag.
pub fn acf(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    check_lag(series, max_lag)?;
    let x = series.values();
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if c0 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let ck: f64 = (0..n - k).map(|i| c[i] * c[i + k]).sum();
        out.push(ck / c0);
    }
    Ok(out)
}

/// Partial autocorrelation for lags 0..=max_lag via Levinson–Durbin.
pub fn pacf(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    let r = acf(series, max_lag)?;
    pacf_from_acf(&r)
}

pub fn pacf_from_acf(r: &[f64]) -> Result<Vec<f64>> {
    let max_lag = r.len() - 1;
    let mut out = vec![1.0];
    let mut phi: Vec<f64> = Vec::new();
    let mut err = 1.0;
    for k in 1..=max_lag {
        let num = r[k] - (0..k - 1).map(|j| phi[j] * r[k - 1 - j]).sum::<f64>();
        if err <= 1e-12 {
            return Err(Error::SingularToeplitz { lag: k });
        }
        let a = num / err;
        let prev = phi.clone();
        for j in 0..k - 1 {
            phi[j] = prev[j] - a * prev[k - 2 - j];
        }
        phi.push(a);
        err *= 1.0 - a * a;
        out.push(a);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFit {
    /// Positive frequencies k/n in cycles per sample, k = 1..=n/2.
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Fitted band as fractions of the Nyquist frequency.
    pub band: (f64, f64),
    /// Indices into `frequencies` used by the fit.
    pub fitted: Vec<usize>,
    /// Set when a single bin carries most of the band's power, i.e. the
    /// spectrum is line-like rather than a power law.
    pub low_quality: bool,
}

/// Periodogram of the mean-removed series and an OLS fit of ln P on ln f.
///
/// The default band starts at the third positive bin and runs to Nyquist.
pub fn power_spectrum_slope(series: &TimeSeries, band: Option<(f64, f64)>) -> Result<SpectrumFit> {
    let n = series.len();
    if n < MIN_SPECTRUM_LENGTH {
        return Err(Error::TooShort {
            context: "power spectrum",
            needed: MIN_SPECTRUM_LENGTH,
            got: n,
        });
    }
    if let Some((lo, hi)) = band {
        if !(lo >= 0.0 && lo < hi && hi <= 1.0) {
            return Err(Error::invalid("band", format!("({lo}, {hi}) is not an ordered pair in [0, 1]")));
        }
    }
    let mean = series.values().iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.values().iter().map(|v| v - mean).collect();
    let full = periodogram(&centered);
    let half = n / 2;
    let frequencies: Vec<f64> = (1..=half).map(|k| k as f64 / n as f64).collect();
    let power: Vec<f64> = full[1..=half].to_vec();

    let nyquist = 0.5;
    let fitted: Vec<usize> = (0..half)
        .filter(|&i| {
            let keep = match band {
                Some((lo, hi)) => {
                    let f = frequencies[i] / nyquist;
                    f >= lo - 1e-12 && f <= hi + 1e-12
                }
                None => i >= 2,
            };
            keep && power[i] > 0.0
        })
        .collect();
    if fitted.len() < 3 {
        return Err(Error::TooShort {
            context: "spectral fit band",
            needed: 3,
            got: fitted.len(),
        });
    }
    let x: Vec<f64> = fitted.iter().map(|&i| frequencies[i].ln()).collect();
    let y: Vec<f64> = fitted.iter().map(|&i| power[i].ln()).collect();
    let fit = ols_fit(&x, &y)?;
    let band_power: f64 = fitted.iter().map(|&i| power[i]).sum();
    let peak = fitted.iter().map(|&i| power[i]).fold(0.0, f64::max);
    let band = (
        frequencies[fitted[0]] / nyquist,
        frequencies[*fitted.last().unwrap()] / nyquist,
    );
    Ok(SpectrumFit {
        frequencies,
        power,
        slope: fit.slope,
        slope_se: fit.slope_se,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        band,
        fitted,
        low_quality: peak > 0.5 * band_power,
    })
}
