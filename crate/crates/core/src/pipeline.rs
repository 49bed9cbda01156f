//! End-to-end analysis: configuration, orchestration, the JSON report and
//! plot-ready CSV files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_statistics, joint_histogram, BootstrapConfig, HistogramCell};
use crate::diagnostics::{acf, pacf, power_spectrum_slope, SpectrumFit};
use crate::dwt::{build_wavelet, dwt_forward, max_decomposition_level, CoefficientPyramid};
use crate::error::{Error, Result};
use crate::ingest::{load_series, summarize, SummaryStats, TimeSeries};
use crate::leaders::compute_leaders;
use crate::mfdfa::{mfdfa, MfdfaResult};
use crate::surrogate::{surrogate_analysis, SurrogateConfig, SurrogateMethod, SurrogateSummary};
use crate::synth::{self, CascadeSpec};
use crate::wlmfa::{
    estimate, select_scale_range, Cumulant, QGrid, RangeRow, ScaleRange, ScalingResult, SingularitySpectrum,
    WlmfaSettings, LAMBDA_DEFINITION,
};

pub const MIN_SERIES_LENGTH: usize = 64;
pub const TOOL_NAME: &str = "multifrac";

/// Synthetic input description, written `name:key=value,...`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Cascade(CascadeSpec),
    Fbm { n: usize, hurst: f64 },
    Fgn { n: usize, hurst: f64 },
    Counts { n: usize, shots: u64, prob: f64 },
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<TimeSeries> {
        match *self {
            GeneratorSpec::Cascade(spec) => synth::binomial_cascade(spec, seed),
            GeneratorSpec::Fbm { n, hurst } => synth::fbm(n, hurst, seed),
            GeneratorSpec::Fgn { n, hurst } => synth::fgn(n, hurst, seed),
            GeneratorSpec::Counts { n, shots, prob } => synth::binomial_counts(n, shots, prob, seed),
        }
    }

    /// Increment-like signals (a measure, a noise, counts) whose running sum
    /// is the object with scaling.
    pub fn is_increment_type(&self) -> bool {
        !matches!(self, GeneratorSpec::Fbm { .. })
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Cascade(s) => write!(f, "cascade:levels={},p={},randomize={}", s.levels, s.p, s.randomize),
            GeneratorSpec::Fbm { n, hurst } => write!(f, "fbm:n={n},hurst={hurst}"),
            GeneratorSpec::Fgn { n, hurst } => write!(f, "fgn:n={n},hurst={hurst}"),
            GeneratorSpec::Counts { n, shots, prob } => write!(f, "counts:n={n},shots={shots},prob={prob}"),
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let field = "generate";
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut pairs = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::config(field, format!("expected key=value, got {item:?}")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let allowed: &[&str] = match name {
            "cascade" => &["levels", "p", "randomize"],
            "fbm" | "fgn" => &["n", "hurst"],
            "counts" => &["n", "shots", "prob"],
            other => {
                return Err(Error::config(
                    field,
                    format!("unknown generator {other:?} (expected cascade, fbm, fgn or counts)"),
                ))
            }
        };
        if let Some((k, _)) = pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::config(field, format!("{name} does not take {k:?}")));
        }
        fn get<T: FromStr>(pairs: &[(String, String)], key: &str, default: T) -> Result<T> {
            match pairs.iter().rev().find(|(k, _)| k == key) {
                Some((_, v)) => v
                    .parse()
                    .map_err(|_| Error::config(format!("generate.{key}"), format!("cannot parse {v:?}"))),
                None => Ok(default),
            }
        }
        Ok(match name {
            "cascade" => GeneratorSpec::Cascade(CascadeSpec {
                levels: get(&pairs, "levels", 15)?,
                p: get(&pairs, "p", 0.7)?,
                randomize: get(&pairs, "randomize", false)?,
            }),
            "fbm" => GeneratorSpec::Fbm {
                n: get(&pairs, "n", 1 << 14)?,
                hurst: get(&pairs, "hurst", 0.7)?,
            },
            "fgn" => GeneratorSpec::Fgn {
                n: get(&pairs, "n", 1 << 14)?,
                hurst: get(&pairs, "hurst", 0.7)?,
            },
            _ => GeneratorSpec::Counts {
                n: get(&pairs, "n", 1 << 14)?,
                shots: get(&pairs, "shots", 4000)?,
                prob: get(&pairs, "prob", 0.5)?,
            },
        })
    }
}

/// `auto` or `j1:j2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleSpec {
    Auto,
    Fixed(ScaleRange),
}

impl FromStr for ScaleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(ScaleSpec::Auto);
        }
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::config("scales", format!("expected j1:j2 or auto, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::config("scales", format!("cannot parse {v:?} as a scale index")))
        };
        ScaleRange::new(parse(a)?, parse(b)?)
            .map(ScaleSpec::Fixed)
            .map_err(|e| Error::config("scales", e.to_string()))
    }
}

impl fmt::Display for ScaleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleSpec::Auto => f.write_str("auto"),
            ScaleSpec::Fixed(r) => write!(f, "{}:{}", r.j1, r.j2),
        }
    }
}

impl Serialize for ScaleSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScaleSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `lo:step:hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QRange {
    pub lo: f64,
    pub step: f64,
    pub hi: f64,
}

impl Default for QRange {
    fn default() -> Self {
        Self {
            lo: -7.0,
            step: 0.5,
            hi: 7.0,
        }
    }
}

impl QRange {
    pub fn grid(&self) -> Result<QGrid> {
        QGrid::range(self.lo, self.step, self.hi).map_err(|e| Error::config("q", e.to_string()))
    }
}

impl FromStr for QRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::config("q", format!("expected lo:step:hi, got {s:?}")));
        }
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config("q", format!("cannot parse {v:?}")))
        };
        let r = Self {
            lo: num(parts[0])?,
            step: num(parts[1])?,
            hi: num(parts[2])?,
        };
        r.grid()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrate {
    /// On for increment-type generators, off for paths and file input.
    Auto,
    On,
    Off,
}

impl FromStr for Integrate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Integrate::Auto),
            "on" | "true" | "yes" => Ok(Integrate::On),
            "off" | "false" | "no" => Ok(Integrate::Off),
            other => Err(Error::config("integrate", format!("expected auto, on or off, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateChoice {
    Shuffle,
    Iaaft,
    Both,
}

impl SurrogateChoice {
    pub fn methods(self) -> Vec<SurrogateMethod> {
        match self {
            SurrogateChoice::Shuffle => vec![SurrogateMethod::Shuffle],
            SurrogateChoice::Iaaft => vec![SurrogateMethod::Iaaft],
            SurrogateChoice::Both => vec![SurrogateMethod::Shuffle, SurrogateMethod::Iaaft],
        }
    }
}

impl FromStr for SurrogateChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shuffle" => Ok(SurrogateChoice::Shuffle),
            "iaaft" => Ok(SurrogateChoice::Iaaft),
            "both" => Ok(SurrogateChoice::Both),
            other => Err(Error::config(
                "surrogates",
                format!("expected shuffle, iaaft or both, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub path: PathBuf,
    pub column: usize,
    pub delimiter: char,
    pub header: bool,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            column: 0,
            delimiter: ',',
            header: false,
        }
    }
}

/// Every analysis setting. All fields have documented defaults and are
/// echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub input: Option<InputConfig>,
    pub generate: Option<String>,
    pub wavelet: usize,
    pub scales: ScaleSpec,
    pub q: QRange,
    /// Replicates; 0 disables the bootstrap.
    pub bootstrap: usize,
    pub block_length: Option<usize>,
    pub ci: (f64, f64),
    pub seed: u64,
    pub integrate: Integrate,
    pub max_lag: usize,
    /// Spectral fit band as fractions of Nyquist; default skips the two lowest bins.
    pub spectrum_band: Option<(f64, f64)>,
    pub surrogates: Option<SurrogateChoice>,
    pub surrogate_count: usize,
    pub iaaft_iterations: usize,
    pub iaaft_tolerance: f64,
    pub mfdfa: bool,
    pub min_range_length: usize,
    pub histogram_bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            input: None,
            generate: None,
            wavelet: 3,
            scales: ScaleSpec::Fixed(ScaleRange::default()),
            q: QRange::default(),
            bootstrap: 2000,
            block_length: None,
            ci: (5.0, 95.0),
            seed: 42,
            integrate: Integrate::Auto,
            max_lag: 50,
            spectrum_band: None,
            surrogates: None,
            surrogate_count: 2000,
            iaaft_iterations: 200,
            iaaft_tolerance: 1e-6,
            mfdfa: false,
            min_range_length: 3,
            histogram_bins: 20,
        }
    }
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn bootstrap_config(&self) -> Option<BootstrapConfig> {
        (self.bootstrap > 0).then(|| BootstrapConfig {
            replicates: self.bootstrap,
            block_length: self.block_length,
            percentiles: self.ci,
            seed: self.seed,
        })
    }

    fn surrogate_config(&self, method: SurrogateMethod) -> SurrogateConfig {
        SurrogateConfig {
            method,
            count: self.surrogate_count,
            max_iterations: self.iaaft_iterations,
            tolerance: self.iaaft_tolerance,
            seed: self.seed,
        }
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        match (&self.input, &self.generate) {
            (Some(_), Some(_)) => return Err(Error::config("input", "give either an input file or a generator, not both")),
            (None, None) => return Err(Error::config("input", "an input file or a generator is required")),
            (Some(i), None) if !i.delimiter.is_ascii() => {
                return Err(Error::config("delimiter", "must be a single ASCII character"))
            }
            (None, Some(g)) => {
                g.parse::<GeneratorSpec>()?;
            }
            _ => {}
        }
        if !(1..=crate::dwt::MAX_VANISHING_MOMENTS).contains(&self.wavelet) {
            return Err(Error::config("wavelet", format!("{} is outside 1..=10", self.wavelet)));
        }
        self.q.grid()?;
        if let Some(b) = self.bootstrap_config() {
            b.validate()?;
        }
        if self.bootstrap == 0 {
            let (lo, hi) = self.ci;
            if !(lo > 0.0 && lo < hi && hi < 100.0) {
                return Err(Error::config("ci", "percentiles must be ordered inside (0, 100)"));
            }
        }
        if let Some(choice) = self.surrogates {
            for m in choice.methods() {
                self.surrogate_config(m).validate()?;
            }
        }
        if self.min_range_length < 3 {
            return Err(Error::config("min_range_length", "ranges need at least 3 scales"));
        }
        if self.histogram_bins == 0 {
            return Err(Error::config("histogram_bins", "must be positive"));
        }
        if let Some((lo, hi)) = self.spectrum_band {
            if !(lo >= 0.0 && lo < hi && hi <= 1.0) {
                return Err(Error::config("spectrum_band", "must be an ordered pair in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMeta {
    pub kind: String,
    pub path: Option<PathBuf>,
    pub generator: Option<String>,
    pub name: String,
    pub n: usize,
    pub seed: Option<u64>,
    pub summary: SummaryStats,
    /// Whether the running sum of the series was analyzed.
    pub integrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodNotes {
    pub regularity_correction: String,
    pub boundary: String,
    pub normalization: String,
    pub wavelet_family: String,
    pub leader_neighborhood: usize,
    pub regression_weights: String,
    pub lambda_definition: String,
    pub valid_cumulants: String,
    pub hurst_at_zero: String,
    pub bootstrap_scheme: String,
}

impl Default for MethodNotes {
    fn default() -> Self {
        Self {
            regularity_correction: "none".into(),
            boundary: "periodic; leaders touching wrapped coefficients are excluded".into(),
            normalization: "L1 (orthonormal coefficients times 2^(-j/2))".into(),
            wavelet_family: "Daubechies extremal phase".into(),
            leader_neighborhood: crate::leaders::NEIGHBORHOOD,
            regression_weights: "number of usable leaders per scale".into(),
            lambda_definition: LAMBDA_DEFINITION.into(),
            valid_cumulants: "cumulants whose bootstrap test rejects c_m = 0 at the 5% level".into(),
            hurst_at_zero: "c1 (limit value)".into(),
            bootstrap_scheme: "independent circular block bootstrap of leaders per scale, block round(n_j^(1/3)) >= 2"
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletInfo {
    pub vanishing_moments: usize,
    pub filter_length: usize,
    pub lowpass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionInfo {
    pub levels: usize,
    pub coefficients: Vec<usize>,
    pub clean_coefficients: Vec<usize>,
    pub usable_leaders: Vec<usize>,
    pub boundary_excluded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSelection {
    pub j1: usize,
    pub j2: usize,
    /// "given" or "auto".
    pub selection: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub q: f64,
    pub estimate: f64,
    pub mean: f64,
    pub std: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub q: f64,
    pub cells: Vec<HistogramCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub config: BootstrapConfig,
    pub failures: usize,
    pub zeta: Vec<IntervalRow>,
    pub hurst: Vec<IntervalRow>,
    pub h: Vec<IntervalRow>,
    pub d: Vec<IntervalRow>,
    pub cumulants: Vec<IntervalRow>,
    pub histograms: Vec<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub max_lag: usize,
    pub acf: Vec<f64>,
    pub pacf: Option<Vec<f64>>,
    pub pacf_error: Option<String>,
    pub white_noise_band: f64,
    pub spectrum: SpectrumFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    pub config: AnalysisConfig,
    pub input: InputMeta,
    pub method: String,
    pub notes: MethodNotes,
    pub wavelet: WaveletInfo,
    pub decomposition: DecompositionInfo,
    pub scale_range: ScaleSelection,
    pub range_table: Vec<RangeRow>,
    pub q: Vec<f64>,
    pub scaling: ScalingResult,
    pub spectrum: SingularitySpectrum,
    pub bootstrap: Option<BootstrapReport>,
    pub surrogates: Vec<SurrogateSummary>,
    pub mfdfa: Option<MfdfaResult>,
    pub diagnostics: DiagnosticsReport,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn cumulant_table(&self) -> &[Cumulant] {
        &self.scaling.cumulants.rows
    }
}

/// The report plus intermediate products a caller may want to dump.
pub struct RunOutput {
    pub report: AnalysisReport,
    pub pyramid: CoefficientPyramid,
}

fn load_input(config: &AnalysisConfig) -> Result<(TimeSeries, InputMeta, bool)> {
    let (series, kind, path, generator, increment) = match (&config.input, &config.generate) {
        (Some(input), None) => {
            let s = load_series(&input.path, input.column, input.delimiter as u8, input.header)?;
            (s, "file", Some(input.path.clone()), None, false)
        }
        (None, Some(g)) => {
            let spec: GeneratorSpec = g.parse()?;
            let s = spec.generate(config.seed)?;
            (s, "generator", None, Some(spec.to_string()), spec.is_increment_type())
        }
        _ => unreachable!("validated"),
    };
    if series.len() < MIN_SERIES_LENGTH {
        return Err(Error::config(
            "input",
            format!("series has {} samples; at least {MIN_SERIES_LENGTH} are required", series.len()),
        ));
    }
    let integrated = match config.integrate {
        Integrate::Auto => increment,
        Integrate::On => true,
        Integrate::Off => false,
    };
    let meta = InputMeta {
        kind: kind.into(),
        path,
        generator,
        name: series.name().to_string(),
        n: series.len(),
        seed: series.seed(),
        summary: summarize(&series),
        integrated,
    };
    Ok((series, meta, integrated))
}

fn interval_rows(q: &[f64], dists: &[crate::bootstrap::BootstrapDistribution]) -> Vec<IntervalRow> {
    q.iter()
        .zip(dists)
        .map(|(&q, d)| IntervalRow {
            q,
            estimate: d.estimate,
            mean: d.mean,
            std: d.std,
            low: d.low,
            high: d.high,
        })
        .collect()
}

/// Diagnostics, DWT, leaders, range selection, estimation, bootstrap,
/// surrogates and MFDFA, in that order.
pub fn run(config: &AnalysisConfig) -> Result<RunOutput> {
    config.validate()?;
    let (series, input, integrated) = load_input(config).map_err(|e| e.in_stage("input"))?;
    let qgrid = config.q.grid()?;

    let diagnostics = (|| -> Result<DiagnosticsReport> {
        let max_lag = config.max_lag.min(series.len() - 1);
        let acf = acf(&series, max_lag)?;
        let (pacf, pacf_error) = match pacf(&series, max_lag) {
            Ok(p) => (Some(p), None),
            Err(e @ Error::SingularToeplitz { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        Ok(DiagnosticsReport {
            max_lag,
            acf,
            pacf,
            pacf_error,
            white_noise_band: 2.0 / (series.len() as f64).sqrt(),
            spectrum: power_spectrum_slope(&series, config.spectrum_band)?,
        })
    })()
    .map_err(|e| e.in_stage("diagnostics"))?;

    let basis = build_wavelet(config.wavelet)?;
    let analyzed = if integrated { series.integrated()? } else { series.clone() };
    let levels = max_decomposition_level(analyzed.len(), &basis);
    if let ScaleSpec::Fixed(r) = config.scales {
        if r.j2 > levels {
            return Err(Error::config(
                "scales",
                format!("j2 = {} exceeds the {levels} levels available for n = {}", r.j2, analyzed.len()),
            ));
        }
    }
    let pyramid = dwt_forward(&analyzed, &basis, levels).map_err(|e| e.in_stage("dwt"))?;
    let leaders = compute_leaders(&pyramid).map_err(|e| e.in_stage("leaders"))?;
    let boot = config.bootstrap_config();

    let range_table = select_scale_range(&leaders, config.min_range_length, boot.as_ref());
    let (range, selection, range_table) = match config.scales {
        ScaleSpec::Fixed(r) => (r, "given", range_table.unwrap_or_default()),
        ScaleSpec::Auto => {
            let table = range_table.map_err(|e| e.in_stage("range selection"))?;
            let top = &table[0];
            (ScaleRange::new(top.j1, top.j2)?, "auto", table)
        }
    };

    let est = estimate(&leaders, &qgrid, range).map_err(|e| e.in_stage("estimation"))?;
    let mut scaling = est.scaling;
    let mut spectrum = est.spectrum;

    let bootstrap = match &boot {
        Some(bc) => {
            let stats = bootstrap_statistics(&leaders, &qgrid, range, bc).map_err(|e| e.in_stage("bootstrap"))?;
            for (row, (dist, test)) in scaling
                .cumulants
                .rows
                .iter_mut()
                .zip(stats.cumulants.iter().zip(&stats.tests))
            {
                row.std = dist.std;
                row.reject = Some(test.reject);
                row.p_value = Some(test.p_value);
            }
            spectrum.bands = Some(stats.spectrum_bands());
            let q = qgrid.values();
            let hurst_dists: Vec<_> = q
                .iter()
                .enumerate()
                .map(|(i, &qv)| {
                    if qv == 0.0 {
                        stats.cumulants[0].clone()
                    } else {
                        let z = &stats.zeta[i];
                        crate::bootstrap::BootstrapDistribution::new(
                            z.estimate / qv,
                            z.values.iter().map(|v| v / qv).collect(),
                            bc.percentiles,
                        )
                    }
                })
                .collect();
            let orders: Vec<f64> = (1..=stats.cumulants.len()).map(|m| m as f64).collect();
            let extremes = [0, q.len() - 1];
            let histograms = extremes
                .iter()
                .map(|&i| Histogram {
                    q: q[i],
                    cells: joint_histogram(&stats.h[i].values, &stats.d[i].values, config.histogram_bins),
                })
                .collect();
            Some(BootstrapReport {
                config: bc.clone(),
                failures: stats.failures,
                zeta: interval_rows(q, &stats.zeta),
                hurst: interval_rows(q, &hurst_dists),
                h: interval_rows(q, &stats.h),
                d: interval_rows(q, &stats.d),
                cumulants: interval_rows(&orders, &stats.cumulants),
                histograms,
            })
        }
        None => None,
    };

    let mut surrogates = Vec::new();
    if let Some(choice) = config.surrogates {
        let settings = WlmfaSettings {
            vanishing_moments: config.wavelet,
            range,
            qgrid: qgrid.clone(),
            integrate: integrated,
        };
        for method in choice.methods() {
            let summary = surrogate_analysis(&series, &config.surrogate_config(method), &settings)
                .map_err(|e| e.in_stage("surrogates"))?;
            surrogates.push(summary);
        }
    }

    let mfdfa = if config.mfdfa {
        Some(mfdfa(&series, &qgrid).map_err(|e| e.in_stage("mfdfa"))?)
    } else {
        None
    };

    let report = AnalysisReport {
        tool: ToolInfo {
            name: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        config: config.clone(),
        input,
        method: if config.mfdfa { "wlmfa+mfdfa" } else { "wlmfa" }.into(),
        notes: MethodNotes::default(),
        wavelet: WaveletInfo {
            vanishing_moments: basis.vanishing_moments(),
            filter_length: basis.filter_len(),
            lowpass: basis.lowpass().to_vec(),
        },
        decomposition: DecompositionInfo {
            levels,
            coefficients: pyramid.all_details().iter().map(Vec::len).collect(),
            clean_coefficients: (1..=levels).map(|j| pyramid.clean_len(j)).collect(),
            usable_leaders: leaders.scales().iter().map(|s| s.usable_count()).collect(),
            boundary_excluded: leaders.boundary_excluded(),
        },
        scale_range: ScaleSelection {
            j1: range.j1,
            j2: range.j2,
            selection: selection.into(),
        },
        range_table,
        q: qgrid.values().to_vec(),
        scaling,
        spectrum,
        bootstrap,
        surrogates,
        mfdfa,
        diagnostics,
    };
    Ok(RunOutput { report, pyramid })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes one CSV per plot: H(q), ζ(q), the spectrum with bands, bootstrap
/// (h, D) histograms at the extreme q values, surrogate overlays, ACF,
/// PACF, the log-log periodogram, and the cumulant and range tables.
pub fn emit_plot_data(report: &AnalysisReport, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let s = &report.scaling;
    let boot = report.bootstrap.as_ref();
    let band = |rows: Option<&Vec<IntervalRow>>, i: usize, high: bool| {
        rows.map(|r| if high { r[i].high } else { r[i].low })
    };

    files.push(write_rows(
        dir,
        "hq.csv",
        &["q", "H", "H_lo", "H_hi"],
        (0..s.q.len())
            .map(|i| {
                vec![
                    s.q[i].to_string(),
                    s.hurst[i].to_string(),
                    fmt_opt(band(boot.map(|b| &b.hurst), i, false)),
                    fmt_opt(band(boot.map(|b| &b.hurst), i, true)),
                ]
            })
            .collect(),
    )?);

    files.push(write_rows(
        dir,
        "zeta.csv",
        &["q", "zeta", "zeta_lo", "zeta_hi", "tau"],
        (0..s.q.len())
            .map(|i| {
                vec![
                    s.q[i].to_string(),
                    s.zeta[i].to_string(),
                    fmt_opt(band(boot.map(|b| &b.zeta), i, false)),
                    fmt_opt(band(boot.map(|b| &b.zeta), i, true)),
                    s.tau[i].to_string(),
                ]
            })
            .collect(),
    )?);

    let sp = &report.spectrum;
    let bands = sp.bands.as_ref();
    files.push(write_rows(
        dir,
        "spectrum.csv",
        &["q", "h", "h_lo", "h_hi", "D", "D_lo", "D_hi"],
        (0..sp.q.len())
            .filter(|&i| sp.retained[i])
            .map(|i| {
                vec![
                    sp.q[i].to_string(),
                    sp.h[i].to_string(),
                    fmt_opt(bands.map(|b| b.h_low[i])),
                    fmt_opt(bands.map(|b| b.h_high[i])),
                    sp.d[i].to_string(),
                    fmt_opt(bands.map(|b| b.d_low[i])),
                    fmt_opt(bands.map(|b| b.d_high[i])),
                ]
            })
            .collect(),
    )?);

    for (name, pick) in [("bootstrap_hist_qneg.csv", 0usize), ("bootstrap_hist_qpos.csv", 1)] {
        let rows = boot
            .and_then(|b| b.histograms.get(pick))
            .map(|h| {
                h.cells
                    .iter()
                    .map(|c| vec![h.q.to_string(), c.h.to_string(), c.d.to_string(), c.count.to_string()])
                    .collect()
            })
            .unwrap_or_default();
        files.push(write_rows(dir, name, &["q", "h_bin", "D_bin", "count"], rows)?);
    }

    let find = |m: SurrogateMethod| report.surrogates.iter().find(|x| x.method == m);
    let shuffle = find(SurrogateMethod::Shuffle);
    let iaaft = find(SurrogateMethod::Iaaft);
    files.push(write_rows(
        dir,
        "surrogate_zeta.csv",
        &["q", "zeta_median_shuffle", "zeta_median_iaaft", "zeta_base"],
        (0..s.q.len())
            .map(|i| {
                vec![
                    s.q[i].to_string(),
                    fmt_opt(shuffle.map(|x| x.zeta_median[i])),
                    fmt_opt(iaaft.map(|x| x.zeta_median[i])),
                    s.zeta[i].to_string(),
                ]
            })
            .collect(),
    )?);
    files.push(write_rows(
        dir,
        "surrogate_spectrum.csv",
        &[
            "q",
            "h_median_shuffle",
            "D_median_shuffle",
            "h_median_iaaft",
            "D_median_iaaft",
            "h_base",
            "D_base",
        ],
        (0..s.q.len())
            .map(|i| {
                vec![
                    s.q[i].to_string(),
                    fmt_opt(shuffle.map(|x| x.h_median[i])),
                    fmt_opt(shuffle.map(|x| x.d_median[i])),
                    fmt_opt(iaaft.map(|x| x.h_median[i])),
                    fmt_opt(iaaft.map(|x| x.d_median[i])),
                    sp.h[i].to_string(),
                    sp.d[i].to_string(),
                ]
            })
            .collect(),
    )?);

    let diag = &report.diagnostics;
    files.push(write_rows(
        dir,
        "acf.csv",
        &["lag", "acf"],
        diag.acf.iter().enumerate().map(|(k, v)| vec![k.to_string(), v.to_string()]).collect(),
    )?);
    files.push(write_rows(
        dir,
        "pacf.csv",
        &["lag", "pacf"],
        diag.pacf
            .iter()
            .flatten()
            .enumerate()
            .map(|(k, v)| vec![k.to_string(), v.to_string()])
            .collect(),
    )?);
    let fit = &diag.spectrum;
    files.push(write_rows(
        dir,
        "fft.csv",
        &["log_f", "log_P", "fit"],
        fit.frequencies
            .iter()
            .zip(&fit.power)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&f, &p)| {
                let lf = f.ln();
                vec![lf.to_string(), p.ln().to_string(), (fit.intercept + fit.slope * lf).to_string()]
            })
            .collect(),
    )?);

    files.push(write_rows(
        dir,
        "cumulants.csv",
        &["Cumulant", "Value", "STD", "Reject", "P-Value"],
        report
            .cumulant_table()
            .iter()
            .map(|c| {
                vec![
                    format!("c{}", c.order),
                    format!("{:.6}", c.value),
                    format!("{:.6}", c.std),
                    c.reject.map(|r| u8::from(r).to_string()).unwrap_or_default(),
                    c.p_value.map(|p| format!("{p:.8}")).unwrap_or_default(),
                ]
            })
            .collect(),
    )?);
    files.push(write_rows(
        dir,
        "scale_ranges.csv",
        &["Start Index", "End Index", "Length", "Lambda", "Valid Cumulants"],
        report
            .range_table
            .iter()
            .map(|r| {
                vec![
                    r.j1.to_string(),
                    r.j2.to_string(),
                    r.length.to_string(),
                    format!("{:.4}", r.lambda),
                    r.valid_cumulants.map(|v| v.to_string()).unwrap_or_default(),
                ]
            })
            .collect(),
    )?);
    Ok(files)
}
