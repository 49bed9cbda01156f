//! Synthetic signals with known scaling: fractional Gaussian noise and
//! Brownian motion, binomial multiplicative cascades, and iid binomial counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Source, TimeSeries};
use crate::spectral::{fft, Complex};

pub const MIN_LENGTH: usize = 64;

/// Replicate `index` of an ensemble gets `master ^ index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ index
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_length(n: usize) -> Result<()> {
    if n < MIN_LENGTH {
        return Err(Error::TooShort {
            context: "generator length",
            needed: MIN_LENGTH,
            got: n,
        });
    }
    Ok(())
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::invalid("hurst", format!("{hurst} is outside (0, 1)")));
    }
    Ok(())
}

/// Autocovariance of unit-variance fGn at lag k.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let e = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Which exact method produced a fGn sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgnMethod {
    CirculantEmbedding,
    Hosking,
}

/// Unit-variance fractional Gaussian noise with exact covariance.
///
/// Uses circulant embedding and falls back to the Hosking recursion when
/// the embedding has a negative eigenvalue.
pub fn fgn(n: usize, hurst: f64, seed: u64) -> Result<TimeSeries> {
    check_length(n)?;
    check_hurst(hurst)?;
    let (values, _) = fgn_values(n, hurst, seed);
    TimeSeries::new(values, format!("fgn(H={hurst})"), Source::Synthetic, Some(seed))
}

pub(crate) fn fgn_values(n: usize, hurst: f64, seed: u64) -> (Vec<f64>, FgnMethod) {
    match circulant_fgn(n, hurst, seed) {
        Some(v) => (v, FgnMethod::CirculantEmbedding),
        None => (hosking_fgn(n, hurst, seed), FgnMethod::Hosking),
    }
}

fn circulant_fgn(n: usize, hurst: f64, seed: u64) -> Option<Vec<f64>> {
    let m = 2 * n;
    let mut row: Vec<Complex> = (0..m)
        .map(|i| {
            let lag = if i <= n { i } else { m - i };
            Complex::new(fgn_autocovariance(lag, hurst), 0.0)
        })
        .collect();
    fft(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
    if row.iter().any(|c| c.re < -1e-10 * max) {
        return None;
    }
    let mut rng = rng(seed);
    let mut w: Vec<Complex> = row
        .iter()
        .map(|lambda| {
            let amp = (lambda.re.max(0.0) / m as f64).sqrt();
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex::new(a * amp, b * amp)
        })
        .collect();
    fft(&mut w);
    Some(w[..n].iter().map(|c| c.re).collect())
}

/// Durbin–Levinson conditional sampling, O(n²).
fn hosking_fgn(n: usize, hurst: f64, seed: u64) -> Vec<f64> {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, hurst)).collect();
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut v = gamma[0];
    let z: f64 = rng.sample(StandardNormal);
    out.push(z * v.sqrt());
    for t in 1..n {
        let acc: f64 = (0..t - 1).map(|j| phi[j] * gamma[t - 1 - j]).sum();
        let k = (gamma[t] - acc) / v;
        prev.clear();
        prev.extend_from_slice(&phi);
        phi.clear();
        for j in 0..t - 1 {
            phi.push(prev[j] - k * prev[t - 2 - j]);
        }
        phi.push(k);
        v *= 1.0 - k * k;
        let mean: f64 = (0..t).map(|j| phi[j] * out[t - 1 - j]).sum();
        let z: f64 = rng.sample(StandardNormal);
        out.push(mean + z * v.max(0.0).sqrt());
    }
    out
}

/// Fractional Brownian motion path of length n: the running sum of [`fgn`].
pub fn fbm(n: usize, hurst: f64, seed: u64) -> Result<TimeSeries> {
    check_length(n)?;
    check_hurst(hurst)?;
    let (mut values, _) = fgn_values(n, hurst, seed);
    let mut acc = 0.0;
    for v in values.iter_mut() {
        acc += *v;
        *v = acc;
    }
    TimeSeries::new(values, format!("fbm(H={hurst})"), Source::Synthetic, Some(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub levels: u32,
    pub p: f64,
    /// Swap the two weights with probability 1/2 at every split.
    pub randomize: bool,
}

pub const MIN_CASCADE_LEVELS: u32 = 8;
pub const MAX_CASCADE_LEVELS: u32 = 24;

/// Binomial multiplicative measure on 2^levels dyadic cells, total mass 1.
pub fn binomial_cascade(spec: CascadeSpec, seed: u64) -> Result<TimeSeries> {
    if !(MIN_CASCADE_LEVELS..=MAX_CASCADE_LEVELS).contains(&spec.levels) {
        return Err(Error::invalid(
            "levels",
            format!(
                "{} is outside [{MIN_CASCADE_LEVELS}, {MAX_CASCADE_LEVELS}]",
                spec.levels
            ),
        ));
    }
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Err(Error::invalid("p", format!("{} is outside (0, 1)", spec.p)));
    }
    let mut rng = rng(seed);
    let mut mass = vec![1.0f64];
    for _ in 0..spec.levels {
        let mut next = Vec::with_capacity(mass.len() * 2);
        for &m in &mass {
            let w = if spec.randomize && rng.random::<bool>() {
                1.0 - spec.p
            } else {
                spec.p
            };
            next.push(m * w);
            next.push(m * (1.0 - w));
        }
        mass = next;
    }
    TimeSeries::new(
        mass,
        format!("cascade(levels={},p={})", spec.levels, spec.p),
        Source::Synthetic,
        Some(seed),
    )
}

/// Partition-function exponent of the binomial measure: −log2(p^q + (1−p)^q).
pub fn cascade_tau(q: f64, p: f64) -> f64 {
    -(p.powf(q) + (1.0 - p).powf(q)).log2()
}

/// Leader scaling exponent of the cascade's distribution function,
/// i.e. the running sum of the measure: ζ(q) = τ(q) + 1.
pub fn cascade_zeta(q: f64, p: f64) -> f64 {
    cascade_tau(q, p) + 1.0
}

/// n iid Binomial(shots, prob) draws.
pub fn binomial_counts(n: usize, shots: u64, prob: f64, seed: u64) -> Result<TimeSeries> {
    check_length(n)?;
    if shots == 0 {
        return Err(Error::invalid("shots", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::invalid("prob", format!("{prob} is outside [0, 1]")));
    }
    let dist = Binomial::new(shots, prob).map_err(|e| Error::invalid("prob", e.to_string()))?;
    let mut rng = rng(seed);
    let values = (0..n).map(|_| dist.sample(&mut rng) as f64).collect();
    TimeSeries::new(
        values,
        format!("counts(shots={shots},prob={prob})"),
        Source::Synthetic,
        Some(seed),
    )
}
