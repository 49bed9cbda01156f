//! Weighted least-squares line fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// F-statistic reported for fits whose residuals vanish to rounding error.
pub const F_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Weighted residual sum of squares.
    pub sse: f64,
    /// Weighted regression sum of squares.
    pub ssr: f64,
    pub sst: f64,
    pub dof: usize,
    pub f_statistic: f64,
    pub r_squared: f64,
}

/// Fits y = a + b x minimizing Σ w (y − a − b x)². Needs at least 3 points.
pub fn weighted_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if y.len() != n || w.len() != n {
        return Err(Error::invalid("regression", "x, y and weights differ in length"));
    }
    if n < 3 {
        return Err(Error::TooShort {
            context: "regression",
            needed: 3,
            got: n,
        });
    }
    if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("regression", "weights must be positive"));
    }
    let total: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut sst = 0.0;
    for i in 0..n {
        let dx = x[i] - xm;
        let dy = y[i] - ym;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        sst += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::invalid("regression", "abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let mut sse = 0.0;
    let mut max_resid = 0.0f64;
    for i in 0..n {
        let e = y[i] - intercept - slope * x[i];
        sse += w[i] * e * e;
        max_resid = max_resid.max(e.abs());
    }
    let ssr = slope * slope * sxx;
    let dof = n - 2;
    let sigma2 = sse / dof as f64;
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let perfect = max_resid <= 1e-9 * scale;
    let f_statistic = if perfect {
        F_CAP
    } else {
        (ssr / sigma2).min(F_CAP)
    };
    let r_squared = if sst > 0.0 { ssr / sst } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se: (sigma2 / sxx).sqrt(),
        sse,
        ssr,
        sst,
        dof,
        f_statistic,
        r_squared,
    })
}

/// Unweighted fit.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    weighted_fit(x, y, &vec![1.0; x.len()])
}
