//! Wavelet leaders: suprema of |d| over finer scales in a 3-cell neighborhood.

use crate::dwt::CoefficientPyramid;
use crate::error::{Error, Result};

pub const NEIGHBORHOOD: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderScale {
    pub level: usize,
    /// L(j, k) for every position, including boundary-affected ones.
    pub values: Vec<f64>,
    /// False where the neighborhood wraps around or touches a coefficient
    /// whose filter support wrapped.
    pub usable: Vec<bool>,
}

impl LeaderScale {
    pub fn usable_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.usable)
            .filter_map(|(&v, &u)| u.then_some(v))
            .collect()
    }

    pub fn usable_count(&self) -> usize {
        self.usable.iter().filter(|&&u| u).count()
    }

    pub fn excluded(&self) -> usize {
        self.values.len() - self.usable_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderPyramid {
    scales: Vec<LeaderScale>,
    neighborhood: usize,
}

impl LeaderPyramid {
    /// Builds a pyramid directly from per-scale leader values, finest first,
    /// all marked usable. Values must be non-negative.
    pub fn from_scales(scales: Vec<Vec<f64>>) -> Result<Self> {
        let scales = scales
            .into_iter()
            .enumerate()
            .map(|(i, values)| {
                if values.is_empty() {
                    return Err(Error::EmptyScale { level: i + 1 });
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::invalid("leaders", "values must be finite and non-negative"));
                }
                let usable = vec![true; values.len()];
                Ok(LeaderScale {
                    level: i + 1,
                    values,
                    usable,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if scales.is_empty() {
            return Err(Error::InsufficientScales { needed: 1, got: 0 });
        }
        Ok(Self {
            scales,
            neighborhood: NEIGHBORHOOD,
        })
    }

    pub fn levels(&self) -> usize {
        self.scales.len()
    }

    /// Scale `level` (1-based).
    pub fn scale(&self, level: usize) -> &LeaderScale {
        &self.scales[level - 1]
    }

    pub fn scales(&self) -> &[LeaderScale] {
        &self.scales
    }

    pub fn neighborhood(&self) -> usize {
        self.neighborhood
    }

    /// Positions excluded for boundary effects, per scale.
    pub fn boundary_excluded(&self) -> Vec<usize> {
        self.scales.iter().map(LeaderScale::excluded).collect()
    }

    /// Same structure with new values at every scale; used by resampling.
    pub(crate) fn with_usable_values(&self, values: Vec<Vec<f64>>) -> Self {
        let scales = self
            .scales
            .iter()
            .zip(values)
            .map(|(s, v)| LeaderScale {
                level: s.level,
                usable: vec![true; v.len()],
                values: v,
            })
            .collect();
        Self {
            scales,
            neighborhood: self.neighborhood,
        }
    }
}

/// Bottom-up leaders in O(total coefficients).
pub fn compute_leaders(pyramid: &CoefficientPyramid) -> Result<LeaderPyramid> {
    let mut scales = Vec::with_capacity(pyramid.levels());
    let mut below: Option<(Vec<f64>, Vec<bool>)> = None;
    for level in 1..=pyramid.levels() {
        let d = pyramid.details(level);
        let n = d.len();
        if n == 0 {
            return Err(Error::EmptyScale { level });
        }
        let clean_len = pyramid.clean_len(level);
        let mut sup: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        let mut clean: Vec<bool> = (0..n).map(|k| k < clean_len).collect();
        if let Some((m, ok)) = &below {
            if 2 * n > m.len() {
                return Err(Error::invalid(
                    "pyramid",
                    format!("scale {level} has {n} coefficients but the finer scale only {}", m.len()),
                ));
            }
            for k in 0..n {
                sup[k] = sup[k].max(m[2 * k]).max(m[2 * k + 1]);
                clean[k] &= ok[2 * k] && ok[2 * k + 1];
            }
        }
        let values = (0..n)
            .map(|k| {
                let left = sup[(k + n - 1) % n];
                let right = sup[(k + 1) % n];
                sup[k].max(left).max(right)
            })
            .collect();
        let usable = (0..n)
            .map(|k| k >= 1 && k + 1 < n && clean[k - 1] && clean[k] && clean[k + 1])
            .collect();
        scales.push(LeaderScale {
            level,
            values,
            usable,
        });
        below = Some((sup, clean));
    }
    Ok(LeaderPyramid {
        scales,
        neighborhood: NEIGHBORHOOD,
    })
}
