use crate::error::{Error, Result};
use crate::leaders::LeaderPyramid;

use super::{QGrid, ScaleRange};

/// Minimum usable leaders required at the coarsest scale of a range.
pub const MIN_COARSE_LEADERS: usize = 8;

/// S_j(q) = mean of L(j, ·)^q over usable leaders, stored as log2 values.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureFunctions {
    qgrid: QGrid,
    range: ScaleRange,
    levels: Vec<usize>,
    counts: Vec<usize>,
    zero_excluded: Vec<usize>,
    /// [scale][q]
    log2: Vec<Vec<f64>>,
}

impl StructureFunctions {
    pub fn qgrid(&self) -> &QGrid {
        &self.qgrid
    }

    pub fn range(&self) -> ScaleRange {
        self.range
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// Usable leaders n_j per scale.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn zero_excluded(&self) -> &[usize] {
        &self.zero_excluded
    }

    /// log2 S_j(q) for the scale at row `scale` and q at index `qi`.
    pub fn log2_value(&self, scale: usize, qi: usize) -> f64 {
        self.log2[scale][qi]
    }

    pub fn value(&self, scale: usize, qi: usize) -> f64 {
        self.log2[scale][qi].exp2()
    }

    pub(crate) fn log2_column(&self, qi: usize) -> Vec<f64> {
        self.log2.iter().map(|row| row[qi]).collect()
    }
}

/// Mean of exp(q·ln L) in the log domain, so extreme moments neither
/// overflow nor underflow.
pub(crate) fn log2_moment(log_values: &[f64], q: f64) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    let peak = log_values
        .iter()
        .map(|&l| q * l)
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = log_values.iter().map(|&l| (q * l - peak).exp()).sum();
    (peak + (sum / log_values.len() as f64).ln()) / std::f64::consts::LN_2
}

pub(crate) fn check_range(leaders: &LeaderPyramid, range: ScaleRange) -> Result<()> {
    if range.j1 < 2 {
        return Err(Error::invalid("scales", "j1 must be at least 2"));
    }
    if range.j2 > leaders.levels() {
        return Err(Error::InsufficientScales {
            needed: range.j2,
            got: leaders.levels(),
        });
    }
    let coarse = leaders.scale(range.j2).usable_count();
    if coarse < MIN_COARSE_LEADERS {
        return Err(Error::TooShort {
            context: "usable leaders at the coarsest scale",
            needed: MIN_COARSE_LEADERS,
            got: coarse,
        });
    }
    Ok(())
}

pub fn structure_functions(leaders: &LeaderPyramid, qgrid: &QGrid, range: ScaleRange) -> Result<StructureFunctions> {
    check_range(leaders, range)?;
    let mut levels = Vec::new();
    let mut counts = Vec::new();
    let mut zero_excluded = Vec::new();
    let mut log2 = Vec::new();
    let needs_negative = qgrid.values().iter().any(|&q| q < 0.0);
    for level in range.levels() {
        let values = leaders.scale(level).usable_values();
        if values.is_empty() {
            return Err(Error::NoUsableLeaders { level, q: qgrid.values()[0] });
        }
        let all_logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let positive: Vec<f64> = all_logs.iter().copied().filter(|l| l.is_finite()).collect();
        if needs_negative && positive.is_empty() {
            return Err(Error::NoUsableLeaders {
                level,
                q: qgrid.values()[0],
            });
        }
        let row = qgrid
            .values()
            .iter()
            .map(|&q| {
                if q < 0.0 {
                    log2_moment(&positive, q)
                } else {
                    log2_moment(&all_logs, q)
                }
            })
            .collect();
        levels.push(level);
        counts.push(values.len());
        zero_excluded.push(values.len() - positive.len());
        log2.push(row);
    }
    Ok(StructureFunctions {
        qgrid: qgrid.clone(),
        range,
        levels,
        counts,
        zero_excluded,
        log2,
    })
}
