//! Circular block bootstrap of leaders, percentile intervals and the
//! log-cumulant significance test.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaders::LeaderPyramid;
use crate::synth::{derive_seed, rng};
use crate::wlmfa::{estimate, scale_cumulants, QGrid, ScaleRange, SpectrumBands, MAX_ORDER};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Fixed block length; `None` uses round(n_j^{1/3}), at least 2.
    pub block_length: Option<usize>,
    /// Percentile pair in (0, 100).
    pub percentiles: (f64, f64),
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 2000,
            block_length: None,
            percentiles: (5.0, 95.0),
            seed: 42,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::config(
                "bootstrap",
                format!("{} replicates; at least {MIN_REPLICATES} are required", self.replicates),
            ));
        }
        let (lo, hi) = self.percentiles;
        if !(lo > 0.0 && lo < hi && hi < 100.0) {
            return Err(Error::config("ci", format!("{lo},{hi} is not an ordered pair inside (0, 100)")));
        }
        if self.block_length == Some(0) {
            return Err(Error::config("block_length", "must be positive"));
        }
        Ok(())
    }

    /// Block length used for a scale holding `n` leaders.
    pub fn block_length_for(&self, n: usize) -> usize {
        let raw = self
            .block_length
            .unwrap_or_else(|| ((n as f64).cbrt().round() as usize).max(2));
        raw.clamp(1, n.max(1))
    }
}

fn resample_scale(values: &[f64], block: usize, seed: u64, level: usize) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut rng = rng(seed);
    rng.set_stream(level as u64);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let start = rng.random_range(0..n);
        for i in 0..block.min(n - out.len()) {
            out.push(values[(start + i) % n]);
        }
    }
    out
}

/// Independent circular block resampling of the usable leaders at every
/// scale. A pure function of (leaders, seed, replicate index).
pub fn resample_leaders(leaders: &LeaderPyramid, config: &BootstrapConfig, replicate_index: u64) -> LeaderPyramid {
    let seed = derive_seed(config.seed, replicate_index);
    let values = leaders
        .scales()
        .iter()
        .map(|s| {
            let v = s.usable_values();
            resample_scale(&v, config.block_length_for(v.len()), seed, s.level)
        })
        .collect();
    leaders.with_usable_values(values)
}

/// Type-7 (linear interpolation) percentile of sorted data, p in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    pub estimate: f64,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub low: f64,
    pub high: f64,
}

impl BootstrapDistribution {
    pub fn new(estimate: f64, values: Vec<f64>, percentiles: (f64, f64)) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Self {
            estimate,
            low: percentile(&sorted, percentiles.0),
            high: percentile(&sorted, percentiles.1),
            values,
            mean,
            std: var.sqrt(),
        }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantTest {
    pub reject: bool,
    pub p_value: f64,
    /// Replicates on the far side of 0 from the estimate.
    pub exceedances: usize,
}

/// min(1, 2(r + 1)/(B + 1)).
pub fn p_value_from_exceedances(r: usize, replicates: usize) -> f64 {
    (2.0 * (r as f64 + 1.0) / (replicates as f64 + 1.0)).min(1.0)
}

/// Two-sided percentile test of H0: c = 0.
pub fn cumulant_test(estimate: f64, replicates: &[f64], level: f64) -> CumulantTest {
    let r = if estimate > 0.0 {
        replicates.iter().filter(|&&v| v <= 0.0).count()
    } else if estimate < 0.0 {
        replicates.iter().filter(|&&v| v >= 0.0).count()
    } else {
        replicates.len()
    };
    let p_value = p_value_from_exceedances(r, replicates.len());
    CumulantTest {
        reject: p_value < level,
        p_value,
        exceedances: r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Zeta,
    Cumulants,
    Spectrum,
}

/// Replicate distributions for every estimator, in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapStatistics {
    pub replicates: usize,
    pub failures: usize,
    pub zeta: Vec<BootstrapDistribution>,
    pub cumulants: Vec<BootstrapDistribution>,
    pub h: Vec<BootstrapDistribution>,
    pub d: Vec<BootstrapDistribution>,
    pub tests: Vec<CumulantTest>,
}

impl BootstrapStatistics {
    pub fn distributions(&self, estimator: Estimator) -> Vec<&BootstrapDistribution> {
        match estimator {
            Estimator::Zeta => self.zeta.iter().collect(),
            Estimator::Cumulants => self.cumulants.iter().collect(),
            Estimator::Spectrum => self.h.iter().chain(&self.d).collect(),
        }
    }

    pub fn spectrum_bands(&self) -> SpectrumBands {
        SpectrumBands {
            h_low: self.h.iter().map(|d| d.low).collect(),
            h_high: self.h.iter().map(|d| d.high).collect(),
            d_low: self.d.iter().map(|d| d.low).collect(),
            d_high: self.d.iter().map(|d| d.high).collect(),
        }
    }
}

fn check_failures(failures: usize, replicates: usize, first: Option<String>) -> Result<()> {
    if failures * 100 > replicates {
        return Err(Error::BootstrapAborted {
            failures,
            replicates,
            first: first.unwrap_or_default(),
        });
    }
    Ok(())
}

/// Re-estimates ζ, the cumulants and the spectrum on B resampled pyramids.
pub fn bootstrap_statistics(
    leaders: &LeaderPyramid,
    qgrid: &QGrid,
    range: ScaleRange,
    config: &BootstrapConfig,
) -> Result<BootstrapStatistics> {
    config.validate()?;
    let base = estimate(leaders, qgrid, range)?;
    let results: Vec<_> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|b| estimate(&resample_leaders(leaders, config, b), qgrid, range))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = 0;
    let mut first = None;
    for r in results {
        match r {
            Ok(e) => ok.push(e),
            Err(e) => {
                failures += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    check_failures(failures, config.replicates, first)?;

    let nq = qgrid.len();
    let column = |estimate: f64, f: &dyn Fn(&crate::wlmfa::Estimate) -> f64| {
        BootstrapDistribution::new(estimate, ok.iter().map(f).collect(), config.percentiles)
    };
    let zeta = (0..nq)
        .map(|i| column(base.scaling.zeta[i], &|e| e.scaling.zeta[i]))
        .collect();
    let h = (0..nq)
        .map(|i| column(base.spectrum.h[i], &|e| e.spectrum.h[i]))
        .collect();
    let d = (0..nq)
        .map(|i| column(base.spectrum.d[i], &|e| e.spectrum.d[i]))
        .collect();
    let cumulants: Vec<BootstrapDistribution> = (0..MAX_ORDER)
        .map(|m| column(base.scaling.cumulants.rows[m].value, &|e| e.scaling.cumulants.rows[m].value))
        .collect();
    let tests = cumulants
        .iter()
        .map(|dist| cumulant_test(dist.estimate, &dist.values, SIGNIFICANCE_LEVEL))
        .collect();
    Ok(BootstrapStatistics {
        replicates: config.replicates,
        failures,
        zeta,
        cumulants,
        h,
        d,
        tests,
    })
}

/// Per-replicate sample cumulants for scales j1..=j2, using the same
/// resamples as [`resample_leaders`].
pub fn replicate_scale_cumulants(
    leaders: &LeaderPyramid,
    j1: usize,
    j2: usize,
    config: &BootstrapConfig,
) -> Result<Vec<Vec<[f64; MAX_ORDER]>>> {
    config.validate()?;
    let usable: Vec<Vec<f64>> = (j1..=j2).map(|j| leaders.scale(j).usable_values()).collect();
    let results: Vec<Option<Vec<[f64; MAX_ORDER]>>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let seed = derive_seed(config.seed, b);
            (j1..=j2)
                .zip(&usable)
                .map(|(level, v)| {
                    let r = resample_scale(v, config.block_length_for(v.len()), seed, level);
                    scale_cumulants(&r).map(|(k, _)| k)
                })
                .collect()
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();
    check_failures(failures, config.replicates, Some("a resampled scale has no positive leaders".into()))?;
    Ok(results.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramCell {
    pub h: f64,
    pub d: f64,
    pub count: usize,
}

/// bins × bins joint histogram of (h, D) replicate pairs; cells are bin
/// centers in row-major (h outer) order.
pub fn joint_histogram(h: &[f64], d: &[f64], bins: usize) -> Vec<HistogramCell> {
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5e-6, lo + 0.5e-6)
        }
    };
    if h.is_empty() || bins == 0 {
        return Vec::new();
    }
    let (h0, h1) = range(h);
    let (d0, d1) = range(d);
    let index = |v: f64, lo: f64, hi: f64| (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
    let mut counts = vec![0usize; bins * bins];
    for (&a, &b) in h.iter().zip(d) {
        counts[index(a, h0, h1) * bins + index(b, d0, d1)] += 1;
    }
    let hw = (h1 - h0) / bins as f64;
    let dw = (d1 - d0) / bins as f64;
    (0..bins * bins)
        .map(|c| HistogramCell {
            h: h0 + (c / bins) as f64 * hw + hw / 2.0,
            d: d0 + (c % bins) as f64 * dw + dw / 2.0,
            count: counts[c],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pyramid() -> LeaderPyramid {
        let scales = (1..=5)
            .map(|j| (0..(256 >> j)).map(|k| 1.0 + ((k * 7 + j) % 11) as f64).collect())
            .collect();
        LeaderPyramid::from_scales(scales).unwrap()
    }

    #[test]
    fn table_p_values() {
        assert_eq!(format!("{:.8}", p_value_from_exceedances(0, 2000)), "0.00099950");
        assert_eq!(format!("{:.8}", p_value_from_exceedances(1, 2000)), "0.00199900");
        assert_eq!(format!("{:.8}", p_value_from_exceedances(551, 2000)), "0.55172414");
        assert_eq!(format!("{:.8}", p_value_from_exceedances(204, 2000)), "0.20489755");
        assert_eq!(format!("{:.8}", p_value_from_exceedances(454, 2000)), "0.45477261");
        assert_eq!(p_value_from_exceedances(2000, 2000), 1.0);
    }

    #[test]
    fn test_decisions() {
        let mut reps = vec![0.3; 2000];
        let t = cumulant_test(0.26, &reps, 0.05);
        assert!(t.reject);
        assert_eq!(t.exceedances, 0);
        reps[5] = -0.1;
        let t = cumulant_test(0.26, &reps, 0.05);
        assert_eq!(t.exceedances, 1);
        assert!((t.p_value - 4.0 / 2001.0).abs() < 1e-15);
        let sym: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let t = cumulant_test(0.01, &sym, 0.05);
        assert!(!t.reject);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn percentiles_type7() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&s, 0.0), 1.0);
        assert_eq!(percentile(&s, 50.0), 3.0);
        assert_eq!(percentile(&s, 100.0), 5.0);
        assert!((percentile(&s, 5.0) - 1.2).abs() < 1e-12);
        assert!((percentile(&s, 95.0) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn full_block_is_rotation() {
        let l = pyramid();
        let original = l.scale(2).usable_values();
        let cfg = BootstrapConfig {
            block_length: Some(original.len()),
            ..Default::default()
        };
        let r = resample_leaders(&l, &cfg, 3);
        let v = &r.scale(2).values;
        let n = v.len();
        let shift = original.iter().position(|&x| x == v[0]).unwrap();
        let rotation = (0..n).any(|s| (0..n).all(|i| v[i] == original[(i + s) % n]));
        assert!(rotation, "shift {shift}");
    }

    #[test]
    fn resampling_is_closed_and_deterministic() {
        let l = pyramid();
        let cfg = BootstrapConfig::default();
        let a = resample_leaders(&l, &cfg, 7);
        let b = resample_leaders(&l, &cfg, 7);
        assert_eq!(a, b);
        assert_ne!(a, resample_leaders(&l, &cfg, 8));
        for j in 1..=5 {
            let orig = l.scale(j).usable_values();
            assert_eq!(a.scale(j).values.len(), orig.len());
            assert!(a.scale(j).values.iter().all(|v| orig.contains(v)));
        }
    }

    #[test]
    fn block_lengths() {
        let cfg = BootstrapConfig::default();
        assert_eq!(cfg.block_length_for(1000), 10);
        assert_eq!(cfg.block_length_for(3), 2);
        assert_eq!(cfg.block_length_for(1), 1);
        let fixed = BootstrapConfig {
            block_length: Some(50),
            ..Default::default()
        };
        assert_eq!(fixed.block_length_for(20), 20);
    }

    #[test]
    fn config_validation() {
        assert!(BootstrapConfig::default().validate().is_ok());
        let few = BootstrapConfig {
            replicates: 99,
            ..Default::default()
        };
        assert!(few.validate().is_err());
        let bad = BootstrapConfig {
            percentiles: (95.0, 5.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_field_has_zero_width() {
        let scales = (1..=5).map(|j| vec![2.0; 256 >> j]).collect();
        let l = LeaderPyramid::from_scales(scales).unwrap();
        let cfg = BootstrapConfig {
            replicates: 100,
            ..Default::default()
        };
        let g = QGrid::default();
        let stats = bootstrap_statistics(&l, &g, ScaleRange::new(2, 5).unwrap(), &cfg).unwrap();
        assert!(stats.zeta.iter().all(|d| d.width() == 0.0));
        let q0 = g.index_of(0.0).unwrap();
        assert!(stats.d[q0].values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn histogram_counts_everything() {
        let h: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let d: Vec<f64> = (0..100).map(|i| 1.0 - (i as f64 / 100.0).powi(2)).collect();
        let cells = joint_histogram(&h, &d, 20);
        assert_eq!(cells.len(), 400);
        assert_eq!(cells.iter().map(|c| c.count).sum::<usize>(), 100);
        let degenerate = joint_histogram(&[1.0; 5], &[1.0; 5], 4);
        assert_eq!(degenerate.iter().map(|c| c.count).sum::<usize>(), 5);
    }
}
