use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{QGrid, ScalingResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBands {
    pub h_low: Vec<f64>,
    pub h_high: Vec<f64>,
    pub d_low: Vec<f64>,
    pub d_high: Vec<f64>,
}

/// Parametric singularity spectrum (h(q), D(q)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularitySpectrum {
    pub q: Vec<f64>,
    pub h: Vec<f64>,
    /// Raw D(q), including negative values.
    pub d: Vec<f64>,
    /// False where D(q) < 0; such points are left out of the reported curve.
    pub retained: Vec<bool>,
    /// h(q) increases somewhere, i.e. ζ is not concave on the grid.
    pub non_concave: bool,
    pub bands: Option<SpectrumBands>,
}

impl SingularitySpectrum {
    /// max h − min h over retained points with q in [lo, hi].
    pub fn width_over(&self, lo: f64, hi: f64) -> f64 {
        let hs = self
            .q
            .iter()
            .zip(&self.h)
            .zip(&self.retained)
            .filter(|((&q, _), &keep)| keep && q >= lo - 1e-12 && q <= hi + 1e-12)
            .map(|((_, &h), _)| h);
        let (min, max) = hs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), h| (a.min(h), b.max(h)));
        if min.is_finite() {
            max - min
        } else {
            0.0
        }
    }

    pub fn width(&self) -> f64 {
        self.width_over(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn at(&self, q: f64) -> Option<(f64, f64)> {
        self.q
            .iter()
            .position(|&v| (v - q).abs() < 1e-9)
            .map(|i| (self.h[i], self.d[i]))
    }
}

/// Three-point derivative on a possibly non-uniform grid, one-sided at the ends.
fn derivative(q: &[f64], f: &[f64]) -> Vec<f64> {
    let n = q.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                let (h1, h2) = (q[1] - q[0], q[2] - q[1]);
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1]
                    - h1 / (h2 * (h1 + h2)) * f[2]
            } else if i == n - 1 {
                let (h1, h2) = (q[n - 2] - q[n - 3], q[n - 1] - q[n - 2]);
                h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2]
                    + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1]
            } else {
                let (h1, h2) = (q[i] - q[i - 1], q[i + 1] - q[i]);
                -h2 / (h1 * (h1 + h2)) * f[i - 1] + (h2 - h1) / (h1 * h2) * f[i]
                    + h1 / (h2 * (h1 + h2)) * f[i + 1]
            }
        })
        .collect()
}

/// h = dζ/dq, D = 1 + q h − ζ.
pub fn legendre_from_zeta(qgrid: &QGrid, zeta: &[f64]) -> Result<SingularitySpectrum> {
    let q = qgrid.values();
    if q.len() < 5 {
        return Err(Error::invalid("q", "the Legendre spectrum needs at least 5 moments"));
    }
    if zeta.len() != q.len() {
        return Err(Error::invalid("zeta", "length differs from the q grid"));
    }
    let h = derivative(q, zeta);
    let d: Vec<f64> = q
        .iter()
        .zip(&h)
        .zip(zeta)
        .map(|((&q, &h), &z)| if q == 0.0 { 1.0 - z } else { 1.0 + q * h - z })
        .collect();
    let non_concave = h.windows(2).any(|w| w[1] > w[0] + 1e-12 * (1.0 + w[0].abs()));
    let retained = d.iter().map(|&v| v >= 0.0).collect();
    Ok(SingularitySpectrum {
        q: q.to_vec(),
        h,
        d,
        retained,
        non_concave,
        bands: None,
    })
}

pub fn legendre_spectrum(result: &ScalingResult) -> Result<SingularitySpectrum> {
    legendre_from_zeta(&QGrid::new(result.q.clone())?, &result.zeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_collapses_to_point() {
        let g = QGrid::default();
        let zeta: Vec<f64> = g.values().iter().map(|q| 0.6 * q).collect();
        let s = legendre_from_zeta(&g, &zeta).unwrap();
        for (h, d) in s.h.iter().zip(&s.d) {
            assert!((h - 0.6).abs() < 1e-12);
            assert!((d - 1.0).abs() < 1e-12);
        }
        assert!(s.width() < 1e-12);
        assert!(!s.non_concave);
    }

    #[test]
    fn quadratic_example() {
        let (c1, c2) = (0.26, -0.035);
        let g = QGrid::default();
        let zeta: Vec<f64> = g.values().iter().map(|q| c1 * q + c2 * q * q / 2.0).collect();
        let s = legendre_from_zeta(&g, &zeta).unwrap();
        assert_eq!(s.at(0.0).unwrap().1, 1.0);
        assert!((s.at(0.0).unwrap().0 - 0.26).abs() < 1e-12);
        let (h7, d7) = s.at(7.0).unwrap();
        assert!((h7 - 0.015).abs() < 1e-12);
        assert!((d7 - 0.1425).abs() < 1e-12);
        for w in s.h.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(s.d.iter().all(|&d| d <= 1.0 + 1e-9));
    }

    #[test]
    fn nonuniform_grid_is_exact_for_quadratics() {
        let g = QGrid::new(vec![-3.0, -1.0, -0.5, 0.0, 1.0, 1.5, 2.0, 4.0]).unwrap();
        let zeta: Vec<f64> = g.values().iter().map(|q| 0.4 * q - 0.05 * q * q).collect();
        let s = legendre_from_zeta(&g, &zeta).unwrap();
        for (q, h) in g.values().iter().zip(&s.h) {
            assert!((h - (0.4 - 0.1 * q)).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn negative_dimensions_are_kept_raw() {
        let (c1, c2) = (0.5, -0.2);
        let g = QGrid::default();
        let zeta: Vec<f64> = g.values().iter().map(|q| c1 * q + c2 * q * q / 2.0).collect();
        let s = legendre_from_zeta(&g, &zeta).unwrap();
        // D(q) = 1 + c2 q²/2 < 0 for |q| > √10
        assert!(!s.retained[0] && !s.retained[28]);
        assert!(s.d[0] < 0.0);
        assert!(s.retained[14]);
    }

    #[test]
    fn convex_zeta_is_flagged() {
        let g = QGrid::default();
        let zeta: Vec<f64> = g.values().iter().map(|q| 0.5 * q + 0.01 * q * q).collect();
        let s = legendre_from_zeta(&g, &zeta).unwrap();
        assert!(s.non_concave);
        assert_eq!(s.h.len(), g.len());
    }

    #[test]
    fn matches_direct_infimum_on_dense_grid() {
        let g = QGrid::range(-4.0, 0.01, 4.0).unwrap();
        let zeta: Vec<f64> = g.values().iter().map(|&q: &f64| 0.7 * q - 0.3 * ((1.0 + q * q).sqrt() - 1.0)).collect();
        let s = legendre_from_zeta(&g, &zeta).unwrap();
        for i in (50..g.len() - 50).step_by(37) {
            let h = s.h[i];
            let inf = g
                .values()
                .iter()
                .zip(&zeta)
                .map(|(&q, &z)| 1.0 + q * h - z)
                .fold(f64::INFINITY, f64::min);
            assert!((inf - s.d[i]).abs() < 1e-3, "q={}", g.values()[i]);
        }
    }
}
