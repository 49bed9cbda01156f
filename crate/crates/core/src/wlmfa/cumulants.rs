use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaders::LeaderPyramid;
use crate::regression::{weighted_fit, LinearFit};

use super::structure::check_range;
use super::ScaleRange;

pub const MAX_ORDER: usize = 5;

/// One row of the cumulant table. Test fields stay empty until a bootstrap runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cumulant {
    pub order: usize,
    pub value: f64,
    /// Bootstrap standard deviation when a bootstrap ran, otherwise the
    /// regression standard error.
    pub std: f64,
    pub regression_se: f64,
    pub f_statistic: f64,
    pub reject: Option<bool>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCumulants {
    pub rows: Vec<Cumulant>,
    /// Sample cumulants of ln L per scale, rows follow the scale range.
    pub per_scale: Vec<[f64; MAX_ORDER]>,
}

impl LogCumulants {
    pub fn values(&self) -> [f64; MAX_ORDER] {
        let mut out = [0.0; MAX_ORDER];
        for (o, r) in out.iter_mut().zip(&self.rows) {
            *o = r.value;
        }
        out
    }

    pub fn c(&self, order: usize) -> f64 {
        self.rows[order - 1].value
    }
}

/// Biased sample cumulants κ1..κ5 of ln v over the positive entries.
pub fn scale_cumulants(values: &[f64]) -> Option<([f64; MAX_ORDER], usize)> {
    let logs: Vec<f64> = values.iter().filter(|&&v| v > 0.0).map(|v| v.ln()).collect();
    if logs.is_empty() {
        return None;
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4, mut m5) = (0.0, 0.0, 0.0, 0.0);
    for l in &logs {
        let d = l - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        m5 += d2 * d2 * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m5 /= n;
    Some((
        [mean, m2, m3, m4 - 3.0 * m2 * m2, m5 - 10.0 * m3 * m2],
        logs.len(),
    ))
}

/// c_m = slope / ln 2 of κ_m(j) against j, weighted by the counts.
pub(crate) fn fit_cumulants(
    levels: &[usize],
    counts: &[usize],
    per_scale: &[[f64; MAX_ORDER]],
) -> Result<Vec<LinearFit>> {
    let x: Vec<f64> = levels.iter().map(|&j| j as f64).collect();
    let w: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    (0..MAX_ORDER)
        .map(|m| {
            let y: Vec<f64> = per_scale.iter().map(|k| k[m] / std::f64::consts::LN_2).collect();
            weighted_fit(&x, &y, &w)
        })
        .collect()
}

pub fn log_cumulants(leaders: &LeaderPyramid, range: ScaleRange) -> Result<LogCumulants> {
    check_range(leaders, range)?;
    let mut per_scale = Vec::with_capacity(range.len());
    let mut counts = Vec::with_capacity(range.len());
    let levels: Vec<usize> = range.levels().collect();
    for &level in &levels {
        let (k, n) = scale_cumulants(&leaders.scale(level).usable_values())
            .ok_or(Error::NoUsableLeaders { level, q: 0.0 })?;
        per_scale.push(k);
        counts.push(n);
    }
    let fits = fit_cumulants(&levels, &counts, &per_scale)?;
    let rows = fits
        .iter()
        .enumerate()
        .map(|(m, f)| Cumulant {
            order: m + 1,
            value: f.slope,
            std: f.slope_se,
            regression_se: f.slope_se,
            f_statistic: f.f_statistic,
            reject: None,
            p_value: None,
        })
        .collect();
    Ok(LogCumulants { rows, per_scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn sample_cumulants_by_hand() {
        // ln values 0, 1, 2, 6: mean 2.25
        let v: Vec<f64> = [0.0f64, 1.0, 2.0, 6.0].iter().map(|l| l.exp()).collect();
        let (k, n) = scale_cumulants(&v).unwrap();
        assert_eq!(n, 4);
        let d = [-2.25f64, -1.25, -0.25, 3.75];
        let m = |p: i32| d.iter().map(|x| x.powi(p)).sum::<f64>() / 4.0;
        assert!((k[0] - 2.25).abs() < 1e-12);
        assert!((k[1] - m(2)).abs() < 1e-12);
        assert!((k[2] - m(3)).abs() < 1e-12);
        assert!((k[3] - (m(4) - 3.0 * m(2) * m(2))).abs() < 1e-12);
        assert!((k[4] - (m(5) - 10.0 * m(3) * m(2))).abs() < 1e-10);
        assert!(scale_cumulants(&[0.0, 0.0]).is_none());
    }

    #[test]
    fn lognormal_field_recovers_c1() {
        // Same standardized log-normal sample at every scale, shifted by a·j·ln2.
        let a = 0.37;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let base: Vec<f64> = Normal::new(0.0, 0.4).unwrap().sample_iter(&mut rng).take(32).collect();
        let scales: Vec<Vec<f64>> = (1..=6)
            .map(|j| {
                let reps = 1 << (6 - j);
                base.repeat(reps)
                    .iter()
                    .map(|z| (z + a * j as f64 * std::f64::consts::LN_2).exp())
                    .collect()
            })
            .collect();
        let l = LeaderPyramid::from_scales(scales).unwrap();
        let c = log_cumulants(&l, ScaleRange::new(2, 6).unwrap()).unwrap();
        assert!((c.c(1) - a).abs() < 1e-8);
        for m in 2..=5 {
            assert!(c.c(m).abs() < 1e-8, "c{m} = {}", c.c(m));
        }
    }
}
