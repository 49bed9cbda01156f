//! Time-series container, delimited-text loading and summary statistics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    File,
    Synthetic,
    Surrogate,
    Bootstrap,
}

/// An ordered sequence of finite samples with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    name: String,
    source: Source,
    seed: Option<u64>,
}

impl TimeSeries {
    /// Validates that every sample is finite and that there are at least two.
    pub fn new(
        values: Vec<f64>,
        name: impl Into<String>,
        source: Source,
        seed: Option<u64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        if values.len() < 2 {
            return Err(Error::TooShort {
                context: "time series",
                needed: 2,
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            name: name.into(),
            source,
            seed,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Same provenance, new values. Used for derived series (surrogates, scaled copies).
    pub fn with_values(&self, values: Vec<f64>, source: Source, seed: Option<u64>) -> Result<Self> {
        Self::new(values, self.name.clone(), source, seed)
    }

    /// Mean-removed running sum. Turns an increment-type signal into a path.
    pub fn integrated(&self) -> Result<Self> {
        let mean = self.values.iter().sum::<f64>() / self.values.len() as f64;
        let mut acc = 0.0;
        let values = self
            .values
            .iter()
            .map(|v| {
                acc += v - mean;
                acc
            })
            .collect();
        Self::new(values, self.name.clone(), self.source, self.seed)
    }
}

/// Reads one numeric column from a delimited text file.
///
/// Lines starting with `#` and blank lines are skipped. Rows in error
/// messages are 1-based line numbers within the file.
pub fn load_series(
    path: impl AsRef<Path>,
    column: usize,
    delimiter: u8,
    has_header: bool,
) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut values = Vec::new();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = record
            .get(column)
            .ok_or(Error::MissingColumn { row, column })?;
        let value: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            column,
            value: cell.to_string(),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFiniteCell {
                row,
                column,
                value: cell.to_string(),
            });
        }
        values.push(value);
    }

    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TimeSeries::new(values, name, Source::File, None)
}

/// Writes one sample per line with 17 significant digits, preceded by
/// `# `-prefixed comment lines.
pub fn write_series(path: impl AsRef<Path>, series: &TimeSeries, comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_series_to(BufWriter::new(file), series, comments).map_err(|e| Error::io(path, e))
}

pub fn write_series_to(mut out: impl Write, series: &TimeSeries, comments: &[String]) -> std::io::Result<()> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    for v in series.values() {
        writeln!(out, "{v:.16e}")?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Sample variance with denominator n − 1.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

/// One-pass (Welford) moments.
pub fn summarize(series: &TimeSeries) -> SummaryStats {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (i, &x) in series.values().iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
        min = min.min(x);
        max = max.max(x);
    }
    let n = series.len();
    SummaryStats {
        n,
        mean,
        variance: m2 / (n - 1) as f64,
        min,
        max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_column() {
        let f = file_with("1\n2\n3\n");
        let s = load_series(f.path(), 0, b',', false).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.source(), Source::File);
    }

    #[test]
    fn header_is_skipped() {
        let f = file_with("count\n2000\n1990\n");
        let s = load_series(f.path(), 0, b',', true).unwrap();
        assert_eq!(s.values(), &[2000.0, 1990.0]);
    }

    #[test]
    fn bad_cell_names_row() {
        let f = file_with("1\n2\nabc\n4\n");
        match load_series(f.path(), 0, b',', false) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!(row, 3);
                assert_eq!(column, 0);
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_column_and_delimiter() {
        let f = file_with("# comment\na;1.5\nb;-2\n");
        let s = load_series(f.path(), 1, b';', false).unwrap();
        assert_eq!(s.values(), &[1.5, -2.0]);
    }

    #[test]
    fn rejects_nan_missing_and_empty() {
        let f = file_with("1\nNaN\n");
        assert!(matches!(
            load_series(f.path(), 0, b',', false),
            Err(Error::NonFiniteCell { row: 2, .. })
        ));
        let f = file_with("1,2\n3\n");
        assert!(matches!(
            load_series(f.path(), 1, b',', false),
            Err(Error::MissingColumn { row: 2, column: 1 })
        ));
        let f = file_with("x\n");
        assert!(matches!(
            load_series(f.path(), 0, b',', true),
            Err(Error::EmptySeries)
        ));
        assert!(matches!(
            load_series("/nonexistent/file.csv", 0, b',', false),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn constructor_invariants() {
        assert!(TimeSeries::new(vec![1.0], "x", Source::Synthetic, None).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::INFINITY], "x", Source::Synthetic, None).is_err());
    }

    #[test]
    fn summary_small_cases() {
        let s = TimeSeries::new(vec![1.0; 4], "c", Source::Synthetic, None).unwrap();
        let st = summarize(&s);
        assert_eq!(st.mean, 1.0);
        assert_eq!(st.variance, 0.0);

        let s = TimeSeries::new(vec![0.0, 2.0], "c", Source::Synthetic, None).unwrap();
        let st = summarize(&s);
        assert_eq!(st.mean, 1.0);
        assert_eq!(st.variance, 2.0);
        assert_eq!((st.min, st.max), (0.0, 2.0));
    }

    #[test]
    fn write_then_load_is_exact() {
        let values = vec![0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, std::f64::consts::PI];
        let s = TimeSeries::new(values.clone(), "x", Source::Synthetic, None).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_series(f.path(), &s, &["generator: test".into()]).unwrap();
        let back = load_series(f.path(), 0, b',', false).unwrap();
        assert_eq!(back.values(), values.as_slice());
    }

    #[test]
    fn integration_is_centered() {
        let s = TimeSeries::new(vec![1.0, 3.0, 2.0, 2.0], "x", Source::Synthetic, None).unwrap();
        let p = s.integrated().unwrap();
        assert_eq!(p.values(), &[-1.0, 0.0, 0.0, 0.0]);
    }
}
