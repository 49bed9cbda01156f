use serde::{Deserialize, Serialize};

use crate::bootstrap::{cumulant_test, replicate_scale_cumulants, BootstrapConfig, SIGNIFICANCE_LEVEL};
use crate::error::{Error, Result};
use crate::leaders::LeaderPyramid;

use super::cumulants::{fit_cumulants, scale_cumulants, MAX_ORDER};
use super::structure::MIN_COARSE_LEADERS;

/// How `lambda` in [`RangeRow`] is defined.
pub const LAMBDA_DEFINITION: &str =
    "sum over orders m = 1..5 of the F-statistic of the weighted regression of the m-th log-cumulant on scale";

/// One candidate scale range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeRow {
    pub j1: usize,
    pub j2: usize,
    pub length: usize,
    pub lambda: f64,
    /// Cumulants significantly different from 0 at the 5% level; absent
    /// when no bootstrap was run.
    pub valid_cumulants: Option<usize>,
    pub f_statistics: [f64; MAX_ORDER],
}

/// λ descending, then longer first, then smaller j1.
pub fn rank_ranges(rows: &mut [RangeRow]) {
    rows.sort_by(|a, b| {
        b.lambda
            .total_cmp(&a.lambda)
            .then(b.length.cmp(&a.length))
            .then(a.j1.cmp(&b.j1))
    });
}

/// Scores every contiguous range of at least `min_length` scales starting at
/// scale 2 or coarser, best first.
pub fn select_scale_range(
    leaders: &LeaderPyramid,
    min_length: usize,
    significance: Option<&BootstrapConfig>,
) -> Result<Vec<RangeRow>> {
    let min_length = min_length.max(3);
    let mut per_scale = Vec::new();
    let mut counts = Vec::new();
    for level in 2..=leaders.levels() {
        let scale = leaders.scale(level);
        if scale.usable_count() < MIN_COARSE_LEADERS {
            break;
        }
        match scale_cumulants(&scale.usable_values()) {
            Some((k, n)) => {
                per_scale.push(k);
                counts.push(n);
            }
            None => break,
        }
    }
    let last = 1 + per_scale.len();
    if per_scale.len() < min_length {
        return Err(Error::InsufficientScales {
            needed: min_length,
            got: per_scale.len(),
        });
    }

    let replicates = match significance {
        Some(config) => Some(replicate_scale_cumulants(leaders, 2, last, config)?),
        None => None,
    };

    let mut rows = Vec::new();
    for j1 in 2..=last {
        for j2 in (j1 + min_length - 1)..=last {
            let span = (j1 - 2)..(j2 - 1);
            let levels: Vec<usize> = (j1..=j2).collect();
            let fits = fit_cumulants(&levels, &counts[span.clone()], &per_scale[span.clone()])?;
            let mut f_statistics = [0.0; MAX_ORDER];
            for (f, fit) in f_statistics.iter_mut().zip(&fits) {
                *f = fit.f_statistic;
            }
            let valid_cumulants = match &replicates {
                Some(reps) => {
                    let mut valid = 0;
                    for (m, fit) in fits.iter().enumerate() {
                        let slopes: Vec<f64> = reps
                            .iter()
                            .filter_map(|rep| {
                                let ks = &rep[span.clone()];
                                fit_cumulants(&levels, &counts[span.clone()], ks)
                                    .ok()
                                    .map(|f| f[m].slope)
                            })
                            .collect();
                        if cumulant_test(fit.slope, &slopes, SIGNIFICANCE_LEVEL).reject {
                            valid += 1;
                        }
                    }
                    Some(valid)
                }
                None => None,
            };
            rows.push(RangeRow {
                j1,
                j2,
                length: j2 - j1 + 1,
                lambda: f_statistics.iter().sum(),
                valid_cumulants,
                f_statistics,
            });
        }
    }
    rank_ranges(&mut rows);
    Ok(rows)
}
