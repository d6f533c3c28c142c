//! ADF and KPSS tests and the per-series stationarity screen.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::Panel;
use crate::error::{Error, Result};
use crate::linalg::{Moments, SubsetFit};

/// MacKinnon (1994) response surface, constant-only regression, one variable.
const ADF_TAU_MAX: f64 = 2.74;
const ADF_TAU_MIN: f64 = -18.83;
const ADF_TAU_STAR: f64 = -1.61;
const ADF_SMALLP: [f64; 3] = [2.1659, 1.4412, 0.038269];
const ADF_LARGEP: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];

/// KPSS level-stationarity critical values (Kwiatkowski et al. 1992, Table 1)
/// as `(pvalue, critical value)`.
pub const KPSS_CRITICAL_VALUES: [(f64, f64); 4] =
    [(0.10, 0.347), (0.05, 0.463), (0.025, 0.574), (0.01, 0.739)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub used_lag: usize,
    pub nobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpssResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub lags: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KpssBandwidth {
    /// `floor(4 (T/100)^(1/4))`
    #[default]
    Auto,
    Fixed(usize),
}

fn polyval(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Approximate p-value of an ADF t-statistic (constant, no trend).
pub(crate) fn adf_pvalue(stat: f64) -> f64 {
    if stat > ADF_TAU_MAX {
        return 1.0;
    }
    if stat < ADF_TAU_MIN {
        return 0.0;
    }
    let coefs: &[f64] = if stat <= ADF_TAU_STAR { &ADF_SMALLP } else { &ADF_LARGEP };
    Normal::standard().cdf(polyval(coefs, stat))
}

/// Default ADF lag cap, `floor(12 (T/100)^(1/4))`.
pub fn schwert_max_lag(len: usize) -> usize {
    (12.0 * (len as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller test with constant; lag order chosen by BIC over
/// `0..=max_lag` on a common sample, then refitted on the longest sample.
pub fn adf_test(series: &[f64], max_lag: usize) -> Result<AdfResult> {
    let len = series.len();
    if len < 25 + max_lag {
        return Err(Error::InvalidArgument(format!(
            "ADF needs at least {} observations, got {len}",
            25 + max_lag
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("series has missing values".into()));
    }
    let diff: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    if diff.iter().all(|d| *d == 0.0) {
        return Err(Error::Degenerate("constant series".into()));
    }
    // variables: [y_{t}, dy_{t-1}, ..., dy_{t-lags}, dy_t] indexed on diff
    let moments = |lags: usize, first: usize| {
        Moments::from_fn(diff.len() - first, lags + 2, |r, buf| {
            let t = first + r;
            buf[0] = series[t];
            for i in 1..=lags {
                buf[i] = diff[t - i];
            }
            buf[lags + 1] = diff[t];
        })
    };
    let degenerate = |_| Error::Degenerate("ADF regression is singular".into());

    let common = moments(max_lag, max_lag);
    let nobs = common.nobs as f64;
    let resp = max_lag + 1;
    let mut best = (0, f64::INFINITY);
    for k in 0..=max_lag {
        let fit = SubsetFit::new(&common, (0..=k).collect()).map_err(degenerate)?;
        let rss = fit.rss(resp).max(f64::MIN_POSITIVE);
        let bic = nobs * (rss / nobs).ln() + (k + 2) as f64 * nobs.ln();
        if bic < best.1 {
            best = (k, bic);
        }
    }
    let lag = best.0;

    let m = moments(lag, lag);
    let fit = SubsetFit::new(&m, (0..=lag).collect()).map_err(degenerate)?;
    let resp = lag + 1;
    let beta = fit.coefficients(resp)[0];
    let dof = m.nobs as f64 - (lag + 2) as f64;
    let s2 = fit.rss(resp) / dof;
    let se = (s2 * fit.inverse_diag(0)).sqrt();
    if !(se > 0.0) {
        return Err(Error::Degenerate("ADF regression has zero residual variance".into()));
    }
    let statistic = beta / se;
    Ok(AdfResult {
        statistic,
        pvalue: adf_pvalue(statistic),
        used_lag: lag,
        nobs: m.nobs,
    })
}

/// KPSS p-value by linear interpolation in [`KPSS_CRITICAL_VALUES`],
/// clamped to `[0.01, 0.10]`.
pub(crate) fn kpss_pvalue(stat: f64) -> f64 {
    let table = KPSS_CRITICAL_VALUES;
    if stat <= table[0].1 {
        return table[0].0;
    }
    for w in table.windows(2) {
        let ((p0, c0), (p1, c1)) = (w[0], w[1]);
        if stat <= c1 {
            return p0 + (stat - c0) * (p1 - p0) / (c1 - c0);
        }
    }
    table[table.len() - 1].0
}

/// KPSS level-stationarity test with a Bartlett-kernel Newey-West long-run variance.
pub fn kpss_test(series: &[f64], bandwidth: KpssBandwidth) -> Result<KpssResult> {
    let len = series.len();
    if len < 25 {
        return Err(Error::InvalidArgument(format!("KPSS needs at least 25 observations, got {len}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("series has missing values".into()));
    }
    let lags = match bandwidth {
        KpssBandwidth::Auto => (4.0 * (len as f64 / 100.0).powf(0.25)).floor() as usize,
        KpssBandwidth::Fixed(l) => l,
    }
    .min(len - 1);
    let t = len as f64;
    let mean = series.iter().sum::<f64>() / t;
    let resid: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let mut s2 = resid.iter().map(|e| e * e).sum::<f64>() / t;
    if !(s2 > 0.0) {
        return Err(Error::Degenerate("constant series".into()));
    }
    for s in 1..=lags {
        let w = 1.0 - s as f64 / (lags as f64 + 1.0);
        let gamma: f64 = resid[s..].iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>() / t;
        s2 += 2.0 * w * gamma;
    }
    let mut partial = 0.0;
    let mut eta = 0.0;
    for e in &resid {
        partial += e;
        eta += partial * partial;
    }
    let statistic = eta / (t * t * s2);
    Ok(KpssResult {
        statistic,
        pvalue: kpss_pvalue(statistic),
        lags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStationarity {
    pub label: String,
    pub adf_statistic: f64,
    pub adf_pvalue: f64,
    pub kpss_statistic: f64,
    pub kpss_pvalue: f64,
    pub stationary: bool,
    /// Why the tests could not be run, if they failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub alpha: f64,
    /// One record per series, ordered by label.
    pub series: Vec<SeriesStationarity>,
}

impl StationarityReport {
    /// Labels failing either test.
    pub fn excluded(&self) -> Vec<&str> {
        self.series
            .iter()
            .filter(|s| !s.stationary)
            .map(|s| s.label.as_str())
            .collect()
    }

    pub fn stationary_labels(&self) -> Vec<&str> {
        self.series
            .iter()
            .filter(|s| s.stationary)
            .map(|s| s.label.as_str())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "label",
            "adf_statistic",
            "adf_pvalue",
            "kpss_statistic",
            "kpss_pvalue",
            "stationary",
        ])?;
        for s in &self.series {
            w.write_record([
                s.label.clone(),
                format!("{:?}", s.adf_statistic),
                format!("{:?}", s.adf_pvalue),
                format!("{:?}", s.kpss_statistic),
                format!("{:?}", s.kpss_pvalue),
                s.stationary.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn screen_one(label: &str, series: &[f64], alpha: f64) -> SeriesStationarity {
    let max_lag = schwert_max_lag(series.len()).min(series.len().saturating_sub(25));
    let outcome = adf_test(series, max_lag).and_then(|a| Ok((a, kpss_test(series, KpssBandwidth::Auto)?)));
    match outcome {
        Ok((adf, kpss)) => SeriesStationarity {
            label: label.to_string(),
            adf_statistic: adf.statistic,
            adf_pvalue: adf.pvalue,
            kpss_statistic: kpss.statistic,
            kpss_pvalue: kpss.pvalue,
            stationary: adf.pvalue < alpha && kpss.pvalue > alpha,
            note: None,
        },
        Err(e) => SeriesStationarity {
            label: label.to_string(),
            adf_statistic: f64::NAN,
            adf_pvalue: f64::NAN,
            kpss_statistic: f64::NAN,
            kpss_pvalue: f64::NAN,
            stationary: false,
            note: Some(e.to_string()),
        },
    }
}

/// Runs ADF and KPSS on every series. A series is stationary when ADF rejects
/// a unit root and KPSS does not reject stationarity at `alpha`.
pub fn stationarity_screen(panel: &Panel, alpha: f64) -> StationarityReport {
    let mut series: Vec<SeriesStationarity> = panel
        .labels()
        .par_iter()
        .zip(panel.columns().par_iter())
        .map(|(label, col)| screen_one(label, col, alpha))
        .collect();
    series.sort_by(|a, b| a.label.cmp(&b.label));
    StationarityReport { alpha, series }
}
