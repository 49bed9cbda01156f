//! Wavelet-leader multifractal estimation: structure functions, scaling
//! exponents, log-cumulants, the Legendre spectrum and scale-range selection.

mod cumulants;
mod legendre;
mod range;
mod structure;

use serde::{Deserialize, Serialize};

pub use cumulants::{log_cumulants, scale_cumulants, Cumulant, LogCumulants, MAX_ORDER};
pub use legendre::{legendre_from_zeta, legendre_spectrum, SingularitySpectrum, SpectrumBands};
pub use range::{rank_ranges, select_scale_range, RangeRow, LAMBDA_DEFINITION};
pub use structure::{structure_functions, StructureFunctions, MIN_COARSE_LEADERS};

use crate::dwt::{build_wavelet, dwt_forward, CoefficientPyramid};
use crate::error::{Error, Result};
use crate::ingest::TimeSeries;
use crate::leaders::{compute_leaders, LeaderPyramid};
use crate::regression::{weighted_fit, LinearFit};

/// Strictly increasing moment orders containing 0, 1 and 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QGrid(Vec<f64>);

impl QGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|q| !q.is_finite()) {
            return Err(Error::invalid("q", "moments must be finite"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("q", "moments must be strictly increasing"));
        }
        for required in [0.0, 1.0, 2.0] {
            if !values.contains(&required) {
                return Err(Error::invalid("q", format!("grid must contain {required}")));
            }
        }
        Ok(Self(values))
    }

    /// lo, lo + step, ... up to hi inclusive, rounded to 1e-9.
    pub fn range(lo: f64, step: f64, hi: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) {
            return Err(Error::invalid("q", "need step > 0 and hi ≥ lo"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(Error::invalid("q", "grid has too many points"));
        }
        let values = (0..count)
            .map(|i| {
                let q = ((lo + i as f64 * step) * 1e9).round() / 1e9;
                if q == 0.0 {
                    0.0
                } else {
                    q
                }
            })
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, q: f64) -> Option<usize> {
        self.0.iter().position(|&v| (v - q).abs() < 1e-9)
    }
}

impl Default for QGrid {
    /// −7 to 7 in steps of 0.5.
    fn default() -> Self {
        Self::range(-7.0, 0.5, 7.0).expect("default grid is valid")
    }
}

impl TryFrom<Vec<f64>> for QGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QGrid> for Vec<f64> {
    fn from(g: QGrid) -> Self {
        g.0
    }
}

/// Inclusive range of dyadic scales used for the regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub j1: usize,
    pub j2: usize,
}

impl ScaleRange {
    pub fn new(j1: usize, j2: usize) -> Result<Self> {
        if j1 < 2 {
            return Err(Error::invalid("scales", format!("j1 = {j1}; the finest usable leader scale is 2")));
        }
        if j2 < j1 + 2 {
            return Err(Error::invalid("scales", format!("{j1}:{j2} spans fewer than 3 scales")));
        }
        Ok(Self { j1, j2 })
    }

    pub fn len(&self) -> usize {
        self.j2 + 1 - self.j1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn levels(&self) -> impl Iterator<Item = usize> {
        self.j1..=self.j2
    }
}

impl Default for ScaleRange {
    fn default() -> Self {
        Self { j1: 2, j2: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Each scale weighted by its number of usable leaders.
    LeaderCount,
}

/// Scaling exponents, generalized Hurst exponents and log-cumulants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub q: Vec<f64>,
    /// Slope of log2 S_j(q) against j.
    pub zeta: Vec<f64>,
    pub zeta_se: Vec<f64>,
    /// Partition-function exponent ζ(q) − 1.
    pub tau: Vec<f64>,
    /// (τ(q) + 1)/q; the q = 0 entry is the limit value c1.
    pub hurst: Vec<f64>,
    /// Per-q regression residuals, one per scale.
    pub residuals: Vec<Vec<f64>>,
    pub sse: Vec<f64>,
    pub cumulants: LogCumulants,
    pub range: ScaleRange,
    pub weighting: Weighting,
    /// Usable leaders per scale in the range.
    pub counts: Vec<usize>,
    /// Zero leaders left out of negative moments, per scale.
    pub zero_excluded: Vec<usize>,
}

impl ScalingResult {
    pub fn zeta_at(&self, q: f64) -> Option<f64> {
        self.index(q).map(|i| self.zeta[i])
    }

    pub fn hurst_at(&self, q: f64) -> Option<f64> {
        self.index(q).map(|i| self.hurst[i])
    }

    fn index(&self, q: f64) -> Option<usize> {
        self.q.iter().position(|&v| (v - q).abs() < 1e-9)
    }

    /// ζ(q) rebuilt from the cumulant expansion Σ c_m q^m / m!.
    pub fn zeta_from_cumulants(&self, q: f64) -> f64 {
        let mut term = 1.0;
        let mut total = 0.0;
        for (m, c) in self.cumulants.values().iter().enumerate() {
            term *= q / (m + 1) as f64;
            total += c * term;
        }
        total
    }
}

/// H(q) = (τ(q) + 1)/q.
pub fn hurst_from_partition_exponent(tau: f64, q: f64) -> f64 {
    (tau + 1.0) / q
}

/// Weighted regressions of log2 S_j(q) on j, one per q.
pub fn scaling_exponents(sf: &StructureFunctions) -> Result<Vec<LinearFit>> {
    if sf.levels().len() < 3 {
        return Err(Error::InsufficientScales {
            needed: 3,
            got: sf.levels().len(),
        });
    }
    let x: Vec<f64> = sf.levels().iter().map(|&j| j as f64).collect();
    let w: Vec<f64> = sf.counts().iter().map(|&n| n as f64).collect();
    (0..sf.qgrid().len())
        .map(|qi| {
            let y = sf.log2_column(qi);
            if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonPositiveStructureFunction {
                    level: sf.levels()[pos],
                    q: sf.qgrid().values()[qi],
                });
            }
            weighted_fit(&x, &y, &w)
        })
        .collect()
}

/// H(q) for every q, with the q = 0 entry set to c1.
pub fn hurst_q(q: &[f64], tau: &[f64], c1: f64) -> Vec<f64> {
    q.iter()
        .zip(tau)
        .map(|(&q, &t)| if q == 0.0 { c1 } else { hurst_from_partition_exponent(t, q) })
        .collect()
}

/// Structure functions, ζ(q), H(q) and cumulants over one scale range.
pub fn scaling_result(leaders: &LeaderPyramid, qgrid: &QGrid, range: ScaleRange) -> Result<ScalingResult> {
    let sf = structure_functions(leaders, qgrid, range)?;
    let fits = scaling_exponents(&sf)?;
    let cumulants = log_cumulants(leaders, range)?;
    Ok(assemble(&sf, &fits, cumulants))
}

fn assemble(sf: &StructureFunctions, fits: &[LinearFit], cumulants: LogCumulants) -> ScalingResult {
    let q = sf.qgrid().values().to_vec();
    let zeta: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let tau: Vec<f64> = zeta.iter().map(|z| z - 1.0).collect();
    let hurst = hurst_q(&q, &tau, cumulants.values()[0]);
    let residuals = fits
        .iter()
        .enumerate()
        .map(|(qi, f)| {
            sf.levels()
                .iter()
                .zip(sf.log2_column(qi))
                .map(|(&j, y)| y - f.intercept - f.slope * j as f64)
                .collect()
        })
        .collect();
    ScalingResult {
        zeta_se: fits.iter().map(|f| f.slope_se).collect(),
        sse: fits.iter().map(|f| f.sse).collect(),
        q,
        zeta,
        tau,
        hurst,
        residuals,
        cumulants,
        range: sf.range(),
        weighting: Weighting::LeaderCount,
        counts: sf.counts().to_vec(),
        zero_excluded: sf.zero_excluded().to_vec(),
    }
}

/// Scaling result and spectrum estimated from one leader pyramid.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub scaling: ScalingResult,
    pub spectrum: SingularitySpectrum,
}

pub fn estimate(leaders: &LeaderPyramid, qgrid: &QGrid, range: ScaleRange) -> Result<Estimate> {
    let scaling = scaling_result(leaders, qgrid, range)?;
    let spectrum = legendre_spectrum(&scaling)?;
    Ok(Estimate { scaling, spectrum })
}

/// Settings for the series-to-spectrum chain.
#[derive(Debug, Clone, PartialEq)]
pub struct WlmfaSettings {
    pub vanishing_moments: usize,
    pub range: ScaleRange,
    pub qgrid: QGrid,
    /// Analyze the mean-removed running sum instead of the series itself.
    pub integrate: bool,
}

impl Default for WlmfaSettings {
    fn default() -> Self {
        Self {
            vanishing_moments: 3,
            range: ScaleRange::default(),
            qgrid: QGrid::default(),
            integrate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub pyramid: CoefficientPyramid,
    pub leaders: LeaderPyramid,
    pub estimate: Estimate,
}

/// DWT, leaders and estimation in one step.
pub fn analyze_series(series: &TimeSeries, settings: &WlmfaSettings) -> Result<Analysis> {
    let basis = build_wavelet(settings.vanishing_moments)?;
    let integrated;
    let input = if settings.integrate {
        integrated = series.integrated()?;
        &integrated
    } else {
        series
    };
    let pyramid = dwt_forward(input, &basis, settings.range.j2)?;
    let leaders = compute_leaders(&pyramid)?;
    let estimate = estimate(&leaders, &settings.qgrid, settings.range)?;
    Ok(Analysis {
        pyramid,
        leaders,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn qgrid_rules() {
        let g = QGrid::default();
        assert_eq!(g.len(), 29);
        assert_eq!(g.values()[0], -7.0);
        assert_eq!(g.values()[14], 0.0);
        assert_eq!(g.values()[28], 7.0);
        assert!(QGrid::new(vec![0.0, 2.0, 1.0]).is_err());
        assert!(QGrid::new(vec![-1.0, 1.0, 2.0]).is_err());
        assert!(QGrid::new(vec![0.0, 1.0, 1.0, 2.0]).is_err());
        assert!(QGrid::range(-2.0, 0.1, 2.0).unwrap().index_of(1.0).is_some());
        let json = serde_json::to_string(&g).unwrap();
        let back: QGrid = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<QGrid>("[0.0, 1.0]").is_err());
    }

    #[test]
    fn scale_range_rules() {
        assert!(ScaleRange::new(1, 5).is_err());
        assert!(ScaleRange::new(2, 3).is_err());
        assert_eq!(ScaleRange::new(2, 4).unwrap().len(), 3);
    }

    #[test]
    fn hurst_formula() {
        assert_eq!(hurst_from_partition_exponent(1.0, 2.0), 1.0);
        // τ(q) = 0.4q
        let q = [1.0, 2.0, 4.0];
        let h: Vec<f64> = q.iter().map(|&q| hurst_from_partition_exponent(0.4 * q, q)).collect();
        assert!((h[1] - 0.9).abs() < 1e-15);
        assert!(h[0] > h[1] && h[1] > h[2]);
        let full = hurst_q(&[-1.0, 0.0, 2.0], &[-1.5, -1.0, 0.4], 0.33);
        assert_eq!(full[1], 0.33);
        assert!((full[2] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn exact_power_law_structure() {
        // leaders at scale j all equal to 2^{0.7 j} give ζ(q) = 0.7 q
        let scales: Vec<Vec<f64>> = (1..=6).map(|j| vec![2f64.powf(0.7 * j as f64); 512 >> (j - 1)]).collect();
        let l = LeaderPyramid::from_scales(scales).unwrap();
        let g = QGrid::range(-2.0, 0.5, 2.0).unwrap();
        let r = scaling_result(&l, &g, ScaleRange::new(2, 5).unwrap()).unwrap();
        for (q, z) in r.q.iter().zip(&r.zeta) {
            assert!((z - 0.7 * q).abs() < 1e-10, "q={q}: {z}");
        }
        assert!((r.cumulants.values()[0] - 0.7).abs() < 1e-10);
        assert!((r.hurst_at(2.0).unwrap() - 0.7).abs() < 1e-10);
        assert!((r.hurst_at(0.0).unwrap() - 0.7).abs() < 1e-10);
    }

    #[test]
    fn fbm_hurst_end_to_end() {
        let settings = WlmfaSettings {
            range: ScaleRange::new(3, 9).unwrap(),
            ..Default::default()
        };
        let x = synth::fbm(1 << 15, 0.7, 5).unwrap();
        let a = analyze_series(&x, &settings).unwrap();
        let h2 = a.estimate.scaling.hurst_at(2.0).unwrap();
        assert!((h2 - 0.7).abs() < 0.1, "{h2}");
        assert_eq!(a.estimate.scaling.zeta_at(0.0), Some(0.0));
    }

    #[test]
    fn cumulant_expansion_tracks_zeta() {
        let settings = WlmfaSettings {
            range: ScaleRange::new(3, 9).unwrap(),
            ..Default::default()
        };
        let x = synth::fbm(1 << 15, 0.6, 1).unwrap();
        let r = analyze_series(&x, &settings).unwrap().estimate.scaling;
        for (&q, &z) in r.q.iter().zip(&r.zeta) {
            if q.abs() <= 2.0 {
                assert!((r.zeta_from_cumulants(q) - z).abs() < 0.1, "q={q}");
            }
        }
    }
}
