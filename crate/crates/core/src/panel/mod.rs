//! Labeled, date-aligned multivariate time-series panels.
//!
//! A [`Panel`] holds one column per series over a shared, strictly increasing
//! date index. Missing observations are stored as `NaN` until [`clean`]
//! removes or fills them.

mod stationarity;

pub use stationarity::{
    adf_test, kpss_test, schwert_max_lag, stationarity_screen, AdfResult, KpssBandwidth, KpssResult,
    SeriesStationarity, StationarityReport, KPSS_CRITICAL_VALUES,
};

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Default detrending window (trading days).
pub const DEFAULT_MA_WINDOW: usize = 100;

/// Trading days treated as one year when converting `--min-years`.
pub const TRADING_DAYS_PER_YEAR: usize = 252;

/// Optional descriptive tags for a series, e.g. category `"R"` and term `"7d"`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
}

impl SeriesMeta {
    pub fn new(category: impl Into<String>, term: impl Into<String>) -> Self {
        Self {
            category: Some(category.into()),
            term: Some(term.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    labels: Vec<String>,
    dates: Vec<NaiveDate>,
    columns: Vec<Vec<f64>>,
    meta: BTreeMap<String, SeriesMeta>,
}

impl Panel {
    /// Builds a panel from column-major data. `NaN` marks a missing cell.
    pub fn new(labels: Vec<String>, dates: Vec<NaiveDate>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} columns",
                labels.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate series label `{label}`")));
            }
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidArgument(format!(
                    "dates must be strictly increasing ({} follows {})",
                    w[1], w[0]
                )));
            }
        }
        for (label, col) in labels.iter().zip(&columns) {
            if col.len() != dates.len() {
                return Err(Error::InvalidArgument(format!(
                    "series `{label}` has {} values for {} dates",
                    col.len(),
                    dates.len()
                )));
            }
        }
        Ok(Self {
            labels,
            dates,
            columns,
            meta: BTreeMap::new(),
        })
    }

    /// Panel over consecutive calendar days starting at `start`.
    pub fn from_columns_daily(
        labels: Vec<String>,
        start: NaiveDate,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let len = columns.first().map_or(0, Vec::len);
        Self::new(labels, daily_dates(start, len), columns)
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, SeriesMeta>) -> Self {
        self.meta = meta
            .into_iter()
            .filter(|(k, _)| self.labels.contains(k))
            .collect();
        self
    }

    pub fn set_meta(&mut self, label: &str, meta: SeriesMeta) -> Result<()> {
        self.index_of(label)?;
        self.meta.insert(label.to_string(), meta);
        Ok(())
    }

    /// Replaces the date index with consecutive calendar days from `start`.
    pub fn redate(mut self, start: NaiveDate) -> Self {
        self.dates = daily_dates(start, self.len());
        self
    }

    /// Number of observations (rows).
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Number of series (columns).
    pub fn width(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &[f64] {
        &self.columns[idx]
    }

    pub fn meta(&self) -> &BTreeMap<String, SeriesMeta> {
        &self.meta
    }

    pub fn meta_for(&self, label: &str) -> Option<&SeriesMeta> {
        self.meta.get(label)
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown series `{label}`")))
    }

    pub fn series(&self, label: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index_of(label)?])
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.iter().filter(|v| v.is_nan()).count())
            .sum()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }

    pub(crate) fn require_complete(&self) -> Result<()> {
        for (label, col) in self.labels.iter().zip(&self.columns) {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "series `{label}` has missing or non-finite values; clean the panel first"
                )));
            }
        }
        Ok(())
    }

    /// Sub-panel with the given series, in the given order.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Panel> {
        let mut out_labels = Vec::with_capacity(labels.len());
        let mut out_cols = Vec::with_capacity(labels.len());
        for l in labels {
            let idx = self.index_of(l.as_ref())?;
            out_labels.push(self.labels[idx].clone());
            out_cols.push(self.columns[idx].clone());
        }
        let meta = self.meta.clone();
        Ok(Panel::new(out_labels, self.dates.clone(), out_cols)?.with_meta(meta))
    }

    /// Rows with `from <= date <= to`.
    pub fn slice_dates(&self, from: NaiveDate, to: NaiveDate) -> Panel {
        let lo = self.dates.partition_point(|d| *d < from);
        let hi = self.dates.partition_point(|d| *d <= to);
        self.slice_rows(lo, hi.max(lo))
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Panel {
        Panel {
            labels: self.labels.clone(),
            dates: self.dates[start..end].to_vec(),
            columns: self.columns.iter().map(|c| c[start..end].to_vec()).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut row = vec![date.format(DATE_FORMAT).to_string()];
            for col in &self.columns {
                let v = col[t];
                row.push(if v.is_nan() { String::new() } else { v.to_string() });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn save_meta(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }
}

pub(crate) fn daily_dates(start: NaiveDate, len: usize) -> Vec<NaiveDate> {
    start.iter_days().take(len).collect()
}

/// Reads a panel from CSV. The named column holds ISO-8601 dates; every other
/// column becomes a series. Empty or non-numeric cells are recorded as missing.
pub fn load_csv(path: impl AsRef<Path>, date_column: &str) -> Result<Panel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Load(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, date_column)
}

pub fn read_csv<R: Read>(reader: R, date_column: &str) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Load(format!("malformed header: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(Error::Load("malformed header: no columns".into()));
    }
    let date_idx = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| Error::Load(format!("malformed header: no `{date_column}` column")))?;

    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    for (i, h) in headers.iter().enumerate() {
        if i == date_idx {
            continue;
        }
        if h.is_empty() {
            return Err(Error::Load(format!("malformed header: empty label in column {}", i + 1)));
        }
        if !seen.insert(h.to_string()) {
            return Err(Error::Load(format!("duplicate column label `{h}`")));
        }
        labels.push(h.to_string());
    }

    let mut dates = Vec::new();
    let mut columns = vec![Vec::new(); labels.len()];
    for (row_no, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Load(format!("row {}: {e}", row_no + 2)))?;
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| {
            Error::Load(format!("row {}: unparseable date `{raw_date}`", row_no + 2))
        })?;
        dates.push(date);
        let mut col = 0;
        for (i, cell) in record.iter().enumerate() {
            if i == date_idx {
                continue;
            }
            if col < columns.len() {
                columns[col].push(cell.parse::<f64>().ok().filter(|v| v.is_finite()).unwrap_or(f64::NAN));
            }
            col += 1;
        }
        for c in columns.iter_mut().skip(col) {
            c.push(f64::NAN);
        }
    }
    Panel::new(labels, dates, columns).map_err(|e| Error::Load(e.to_string()))
}

/// Reads the JSON sidecar mapping label -> `{category, term}`.
pub fn load_meta(path: impl AsRef<Path>) -> Result<BTreeMap<String, SeriesMeta>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Load(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Load(format!("metadata {}: {e}", path.display())))
}

/// Drops short or gappy series, trims leading rows to the latest common start
/// and carries the last observation forward over remaining gaps.
///
/// A series is dropped when it has fewer than `min_length` observations, or
/// when the fraction of missing cells between its first and last observation
/// exceeds `max_missing_frac`.
pub fn clean(panel: &Panel, min_length: usize, max_missing_frac: f64) -> Result<Panel> {
    if !(0.0..=1.0).contains(&max_missing_frac) {
        return Err(Error::InvalidArgument(format!(
            "max_missing_frac must be in [0, 1], got {max_missing_frac}"
        )));
    }
    let mut keep = Vec::new();
    let mut start = 0;
    for (idx, col) in panel.columns.iter().enumerate() {
        let observed = col.iter().filter(|v| !v.is_nan()).count();
        let (Some(first), Some(last)) = (
            col.iter().position(|v| !v.is_nan()),
            col.iter().rposition(|v| !v.is_nan()),
        ) else {
            log::debug!("dropping `{}`: no observations", panel.labels[idx]);
            continue;
        };
        let span = last - first + 1;
        let gap_frac = (span - observed) as f64 / span as f64;
        if observed < min_length {
            log::debug!("dropping `{}`: {observed} < {min_length} observations", panel.labels[idx]);
            continue;
        }
        if gap_frac > max_missing_frac {
            log::debug!("dropping `{}`: missing fraction {gap_frac:.3}", panel.labels[idx]);
            continue;
        }
        start = start.max(first);
        keep.push(idx);
    }
    if keep.is_empty() {
        return Err(Error::EmptyPanel("every series was dropped by cleaning".into()));
    }

    let labels: Vec<String> = keep.iter().map(|&i| panel.labels[i].clone()).collect();
    let columns = keep
        .iter()
        .map(|&i| {
            // carry forward from before the common start too
            let mut col = panel.columns[i].clone();
            let mut last = f64::NAN;
            for v in col.iter_mut() {
                if v.is_nan() {
                    *v = last;
                } else {
                    last = *v;
                }
            }
            col.split_off(start)
        })
        .collect();
    Ok(Panel::new(labels, panel.dates[start..].to_vec(), columns)?.with_meta(panel.meta.clone()))
}

/// Subtracts each series' trailing moving average of `window` observations.
/// The first `window - 1` rows have no full window and are dropped.
pub fn detrend_ma(panel: &Panel, window: usize) -> Result<Panel> {
    if window == 0 {
        return Err(Error::InvalidArgument("moving-average window must be >= 1".into()));
    }
    if let Some(label) = panel.labels.first() {
        if panel.len() <= window {
            return Err(Error::SeriesTooShort {
                label: label.clone(),
                len: panel.len(),
                needed: window,
            });
        }
    }
    panel.require_complete()?;
    let w = window as f64;
    let columns = panel
        .columns
        .iter()
        .map(|col| {
            (window - 1..col.len())
                .map(|t| {
                    // x_t - mean(window) written as a mean of differences, so a
                    // constant series gives exactly zero.
                    let xt = col[t];
                    -col[t + 1 - window..=t].iter().map(|v| v - xt).sum::<f64>() / w
                })
                .collect()
        })
        .collect();
    Ok(
        Panel::new(panel.labels.clone(), panel.dates[window - 1..].to_vec(), columns)?
            .with_meta(panel.meta.clone()),
    )
}
