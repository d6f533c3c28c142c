//! Synthetic panels with planted causal structure, and a brute-force
//! reference statistic used to cross-check the estimators.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Panel, SeriesMeta};
use crate::var::{is_stable, simulate_columns, simulate_var, VarModel, DEFAULT_BURN_IN};

pub const DEFAULT_COUPLING: f64 = 0.4;
pub const DEFAULT_OWN_LAG: f64 = 0.5;
/// Sample length used by [`oracle_gc`].
pub const ORACLE_LEN: usize = 1_000_000;

/// Ground-truth directed edges of a planted model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub labels: Vec<String>,
    pub edges: Vec<(String, String)>,
}

impl Truth {
    fn from_model(model: &VarModel) -> Self {
        let labels = model.labels().to_vec();
        let mut edges = Vec::new();
        for (i, target) in labels.iter().enumerate() {
            for (j, source) in labels.iter().enumerate() {
                if i != j && model.coeffs().iter().any(|a| a[(i, j)] != 0.0) {
                    edges.push((source.clone(), target.clone()));
                }
            }
        }
        edges.sort();
        Self { labels, edges }
    }
}

/// Truth file written by the `synth` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub truth: Truth,
    pub model: VarModel,
}

pub(crate) fn chain_labels(n: usize) -> Vec<String> {
    if n <= 26 {
        (0..n).map(|i| char::from(b'A' + i as u8).to_string()).collect()
    } else {
        (1..=n).map(|i| format!("S{i:03}")).collect()
    }
}

fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// VAR(1) chain: node `i` drives node `i+1` with `coupling`, own lag 0.5,
/// identity innovations. Labels are `A`, `B`, `C`, ...
pub fn make_chain(n: usize, coupling: f64) -> Result<(VarModel, Truth)> {
    if n == 0 {
        return Err(Error::InvalidArgument("chain needs at least one node".into()));
    }
    let mut a = identity(n) * DEFAULT_OWN_LAG;
    for i in 0..n - 1 {
        a[(i + 1, i)] = coupling;
    }
    let model = VarModel::new(vec![a], identity(n), chain_labels(n))?;
    if !is_stable(&model) {
        return Err(Error::Unstable(model.spectral_radius()));
    }
    let truth = Truth::from_model(&model);
    Ok((model, truth))
}

/// One series in a synthetic template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesTemplate {
    pub label: String,
    pub category: String,
    pub term: String,
}

impl SeriesTemplate {
    pub fn new(label: &str, category: &str, term: &str) -> Self {
        Self {
            label: label.into(),
            category: category.into(),
            term: term.into(),
        }
    }
}

/// A block of series in which `hub` drives every other member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubGroup {
    pub name: String,
    pub hub: String,
    pub members: Vec<SeriesTemplate>,
}

/// Three maturity blocks of five rates each, named after common bond-market
/// abbreviations (repo `R`, interbank `IBO`, central bank bill `CBB`, ...).
pub fn default_hub_groups() -> Vec<HubGroup> {
    let t = SeriesTemplate::new;
    vec![
        HubGroup {
            name: "short".into(),
            hub: "R1d".into(),
            members: vec![
                t("R1d", "R", "1d"),
                t("IBO1d", "IBO", "1d"),
                t("R7d", "R", "7d"),
                t("SHIBOR3m", "SHIBOR", "3m"),
                t("CBB1y", "CBB", "1y"),
            ],
        },
        HubGroup {
            name: "mid".into(),
            hub: "CBB2y".into(),
            members: vec![
                t("CBB2y", "CBB", "2y"),
                t("TB3y", "TB", "3y"),
                t("PFB2y", "PFB", "2y"),
                t("HRCB3y", "HRCB", "3y"),
                t("RD5y", "RD", "5y"),
            ],
        },
        HubGroup {
            name: "long".into(),
            hub: "TB7y".into(),
            members: vec![
                t("TB7y", "TB", "7y"),
                t("PFB10y", "PFB", "10y"),
                t("HRCB7y", "HRCB", "7y"),
                t("RD10y", "RD", "10y"),
                t("ABS7y", "ABS", "7y"),
            ],
        },
    ]
}

/// Block-diagonal VAR(1) with one hub per block driving the rest of it.
pub fn make_hub_model(groups: &[HubGroup], coupling: f64) -> Result<(VarModel, Truth, BTreeMap<String, SeriesMeta>)> {
    let templates: Vec<&SeriesTemplate> = groups.iter().flat_map(|g| &g.members).collect();
    let labels: Vec<String> = templates.iter().map(|t| t.label.clone()).collect();
    let n = labels.len();
    let mut a = identity(n) * DEFAULT_OWN_LAG;
    let mut offset = 0;
    for g in groups {
        let hub = g
            .members
            .iter()
            .position(|m| m.label == g.hub)
            .ok_or_else(|| Error::InvalidArgument(format!("hub `{}` is not a member of group `{}`", g.hub, g.name)))?;
        for i in 0..g.members.len() {
            if i != hub {
                a[(offset + i, offset + hub)] = coupling;
            }
        }
        offset += g.members.len();
    }
    let model = VarModel::new(vec![a], identity(n), labels)?;
    if !is_stable(&model) {
        return Err(Error::Unstable(model.spectral_radius()));
    }
    let meta = templates
        .iter()
        .map(|t| (t.label.clone(), SeriesMeta::new(&t.category, &t.term)))
        .collect();
    let truth = Truth::from_model(&model);
    Ok((model, truth, meta))
}

/// Simulated panel from [`make_hub_model`] with default coupling.
pub fn make_hub_panel(groups: &[HubGroup], len: usize, seed: u64) -> Result<(Panel, Truth)> {
    let (model, truth, meta) = make_hub_model(groups, DEFAULT_COUPLING)?;
    let panel = simulate_var(&model, len, seed, DEFAULT_BURN_IN)?.with_meta(meta);
    Ok((panel, truth))
}

/// Daily panel on `[start, end]` whose single hub changes on `switch`:
/// `hub_before` drives the group before that date and `hub_after` from then on.
pub fn make_switching_hub_panel(
    members: &[SeriesTemplate],
    hub_before: &str,
    hub_after: &str,
    start: NaiveDate,
    switch: NaiveDate,
    end: NaiveDate,
    seed: u64,
) -> Result<Panel> {
    if !(start < switch && switch <= end) {
        return Err(Error::InvalidArgument("need start < switch <= end".into()));
    }
    let group = |hub: &str| HubGroup {
        name: "regime".into(),
        hub: hub.into(),
        members: members.to_vec(),
    };
    let (before, _, meta) = make_hub_model(&[group(hub_before)], DEFAULT_COUPLING)?;
    let (after, _, _) = make_hub_model(&[group(hub_after)], DEFAULT_COUPLING)?;
    let len_before = (switch - start).num_days() as usize;
    let len_after = (end - switch).num_days() as usize + 1;
    let first = simulate_columns(&before, len_before, seed, DEFAULT_BURN_IN)?;
    let second = simulate_columns(&after, len_after, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1), DEFAULT_BURN_IN)?;
    let columns = first
        .into_iter()
        .zip(second)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect();
    Ok(Panel::from_columns_daily(before.labels().to_vec(), start, columns)?.with_meta(meta))
}

/// Reference `F_{y -> x | cond}` from a long simulation of `model`, computed
/// by explicit QR least squares on the materialised design matrix.
pub fn oracle_gc(model: &VarModel, x: &str, y: &str, cond: &[&str], seed: u64) -> Result<f64> {
    let panel = simulate_var(model, ORACLE_LEN, seed, DEFAULT_BURN_IN)?;
    oracle_statistic(&panel, x, y, cond, model.order())
}

/// `ln(rss_reduced / rss_full)` via dense QR regressions on `panel`.
pub fn oracle_statistic(panel: &Panel, x: &str, y: &str, cond: &[&str], order: usize) -> Result<f64> {
    let target = panel.series(x)?;
    let mut full_sources = vec![panel.series(x)?, panel.series(y)?];
    for c in cond {
        full_sources.push(panel.series(c)?);
    }
    let reduced_sources: Vec<&[f64]> = full_sources.iter().enumerate().filter(|(i, _)| *i != 1).map(|(_, s)| *s).collect();
    let rss_full = qr_rss(target, &full_sources, order)?;
    let rss_reduced = qr_rss(target, &reduced_sources, order)?;
    Ok((rss_reduced / rss_full).ln())
}

fn qr_rss(target: &[f64], sources: &[&[f64]], order: usize) -> Result<f64> {
    let rows = target.len() - order;
    let cols = 1 + sources.len() * order;
    let design = DMatrix::from_fn(rows, cols, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / sources.len() + 1;
            let s = (c - 1) % sources.len();
            sources[s][r + order - lag]
        }
    });
    let y = DVector::from_iterator(rows, target[order..].iter().copied());
    let qr = design.clone().qr();
    let qty = qr.q().transpose() * &y;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Degenerate("oracle design is rank deficient".into()))?;
    let resid = y - design * beta;
    Ok(resid.norm_squared())
}
