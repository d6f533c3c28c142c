//! End-to-end studies: a single network analysis, maturity-group analysis
//! and rolling-window evolution, plus the on-disk bundle layout.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{Months, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, StageExt};
use crate::gcfreq::{conditional_spectral_profiles, write_peaks_csv, write_profiles_csv, BandEdges, FrequencyGrid, SpectralProfile, DEFAULT_GRID_POINTS};
use crate::gctime::{all_pairs_conditional, Correction, EdgeList, DEFAULT_ALPHA};
use crate::graph::{annotate_frequency, build_network, degree_table, export, write_degree_csv, CausalNetwork, ExportFormat};
use crate::panel::{clean, detrend_ma, stationarity_screen, Panel, StationarityReport, DEFAULT_MA_WINDOW, TRADING_DAYS_PER_YEAR};
use crate::rank::{cheirank, pagerank, top_k, write_scores_csv, RankOptions, RankScores};
use crate::var::{select_order_bic, OrderSelection, DEFAULT_MAX_ORDER};

/// Maturity bucket: a term belongs when `min_years < years <= max_years`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_years: Option<f64>,
}

impl GroupSpec {
    pub fn new(name: &str, min_years: Option<f64>, max_years: Option<f64>) -> Self {
        Self {
            name: name.into(),
            min_years,
            max_years,
        }
    }

    pub fn contains(&self, years: f64) -> bool {
        self.min_years.is_none_or(|lo| years > lo) && self.max_years.is_none_or(|hi| years <= hi)
    }
}

/// Short (up to one year), mid (up to five) and long maturities.
pub fn default_groups() -> Vec<GroupSpec> {
    vec![
        GroupSpec::new("short", None, Some(1.0)),
        GroupSpec::new("mid", Some(1.0), Some(5.0)),
        GroupSpec::new("long", Some(5.0), None),
    ]
}

/// Parses a maturity tag such as `7d`, `2w`, `3m` or `10y` into years.
pub fn term_years(term: &str) -> Result<f64> {
    let t = term.trim().to_ascii_lowercase();
    let bad = || Error::InvalidArgument(format!("cannot parse maturity `{term}`"));
    let unit = t.chars().last().ok_or_else(bad)?;
    let value: f64 = t[..t.len() - unit.len_utf8()].parse().map_err(|_| bad())?;
    let per_year = match unit {
        'd' => 365.0,
        'w' => 52.0,
        'm' => 12.0,
        'y' => 1.0,
        _ => return Err(bad()),
    };
    if !(value >= 0.0) {
        return Err(bad());
    }
    Ok(value / per_year)
}

/// Rolling windows measured in calendar months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width_months: u32,
    pub step_months: u32,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            width_months: 36,
            step_months: 24,
        }
    }
}

impl WindowSpec {
    /// Inclusive `(start, end)` windows inside `[first, last]`; a window that
    /// would run past `last` is dropped.
    pub fn windows(&self, first: NaiveDate, last: NaiveDate) -> Result<Vec<(NaiveDate, NaiveDate)>> {
        if self.width_months == 0 || self.step_months == 0 {
            return Err(Error::InvalidArgument("window width and step must be positive".into()));
        }
        let mut out = Vec::new();
        let mut k = 0u32;
        while let Some(start) = first.checked_add_months(Months::new(k * self.step_months)) {
            let Some(end) = start
                .checked_add_months(Months::new(self.width_months))
                .and_then(|d| d.pred_opt())
            else {
                break;
            };
            if end > last {
                break;
            }
            out.push((start, end));
            k += 1;
        }
        Ok(out)
    }
}

/// Every tunable of the workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub date_column: String,
    /// Minimum observed values per series.
    pub min_length: usize,
    pub max_missing_frac: f64,
    /// Moving-average detrending window; `None` disables detrending.
    pub detrend_window: Option<usize>,
    /// Significance level for both the stationarity screen and causality.
    pub alpha: f64,
    pub drop_nonstationary: bool,
    /// Fixed VAR order; when unset the order is chosen by BIC.
    pub order: Option<usize>,
    pub max_order: usize,
    pub correction: Correction,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub spectral: bool,
    pub grid_points: usize,
    pub band_edges: BandEdges,
    pub top_k: usize,
    pub groups: Vec<GroupSpec>,
    pub window: WindowSpec,
    pub exclude_categories: Vec<String>,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let rank = RankOptions::default();
        Self {
            date_column: "date".into(),
            min_length: 3 * TRADING_DAYS_PER_YEAR,
            max_missing_frac: 0.1,
            detrend_window: Some(DEFAULT_MA_WINDOW),
            alpha: DEFAULT_ALPHA,
            drop_nonstationary: false,
            order: None,
            max_order: DEFAULT_MAX_ORDER,
            correction: Correction::None,
            damping: rank.damping,
            tol: rank.tol,
            max_iter: rank.max_iter,
            spectral: true,
            grid_points: DEFAULT_GRID_POINTS,
            band_edges: BandEdges::default(),
            top_k: 5,
            groups: default_groups(),
            window: WindowSpec::default(),
            exclude_categories: Vec::new(),
            seed: 0,
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Load(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Config = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.max_missing_frac) {
            return bad(format!("max_missing_frac must be in [0, 1], got {}", self.max_missing_frac));
        }
        if self.detrend_window == Some(0) {
            return bad("detrend window must be >= 1".into());
        }
        if self.order == Some(0) || self.max_order == 0 {
            return bad("VAR order must be >= 1".into());
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad(format!("damping must be in (0, 1), got {}", self.damping));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return bad("tolerance and iteration limit must be positive".into());
        }
        if self.grid_points < 2 {
            return bad("grid needs at least 2 points".into());
        }
        BandEdges::new(self.band_edges.low_medium, self.band_edges.medium_high)?;
        if self.top_k == 0 {
            return bad("top_k must be >= 1".into());
        }
        if self.window.width_months == 0 || self.window.step_months == 0 {
            return bad("window width and step must be positive".into());
        }
        Ok(())
    }

    pub fn rank_options(&self) -> RankOptions {
        RankOptions {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::uniform(self.grid_points)
    }
}

/// Drops excluded categories, cleans, then detrends.
pub fn preprocess(raw: &Panel, config: &Config) -> Result<Panel> {
    let panel = if config.exclude_categories.is_empty() {
        raw.clone()
    } else {
        let keep: Vec<&str> = raw
            .labels()
            .iter()
            .filter(|l| {
                raw.meta_for(l)
                    .and_then(|m| m.category.as_ref())
                    .is_none_or(|c| !config.exclude_categories.contains(c))
            })
            .map(String::as_str)
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyPanel("every series is in an excluded category".into()));
        }
        raw.select(&keep)?
    };
    let cleaned = clean(&panel, config.min_length, config.max_missing_frac)?;
    match config.detrend_window {
        Some(w) => detrend_ma(&cleaned, w),
        None => Ok(cleaned),
    }
}

/// Stationarity report and the panel that goes on to causality testing.
pub fn screen(panel: &Panel, config: &Config) -> Result<(StationarityReport, Panel)> {
    let report = stationarity_screen(panel, config.alpha);
    let excluded = report.excluded();
    if !excluded.is_empty() {
        log::warn!("{} series fail the stationarity screen: {}", excluded.len(), excluded.join(", "));
    }
    if config.drop_nonstationary && !excluded.is_empty() {
        let keep = report.stationary_labels();
        if keep.is_empty() {
            return Err(Error::EmptyPanel("no series passed the stationarity screen".into()));
        }
        let kept = panel.select(&keep)?;
        return Ok((report, kept));
    }
    Ok((report, panel.clone()))
}

/// Results of one network analysis.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// Panel the causality tests ran on.
    pub panel: Panel,
    pub stationarity: Option<StationarityReport>,
    /// Present when the order was chosen by BIC.
    pub order_selection: Option<OrderSelection>,
    pub order: usize,
    pub edges: EdgeList,
    pub network: CausalNetwork,
    pub profiles: Vec<SpectralProfile>,
    pub pagerank: RankScores,
    pub cheirank: RankScores,
    /// Top CheiRank labels.
    pub top: Vec<String>,
}

/// Largest order not above `max_order` that passes the degrees-of-freedom guard.
fn feasible_max_order(len: usize, vars: usize, max_order: usize) -> usize {
    (1..=max_order)
        .rev()
        .find(|&p| len > p && len - p > vars * p + 1)
        .unwrap_or(1)
}

/// The configured fixed order, or the BIC choice over the feasible range.
pub fn choose_order(panel: &Panel, config: &Config) -> Result<(usize, Option<OrderSelection>)> {
    match config.order {
        Some(p) => Ok((p, None)),
        None => {
            let max = feasible_max_order(panel.len(), panel.width(), config.max_order);
            let sel = select_order_bic(panel, max)?;
            Ok((sel.chosen, Some(sel)))
        }
    }
}

/// Order selection, all-pairs conditional causality, network, spectral
/// annotation and ranking on an already preprocessed panel.
pub fn analyze_panel(panel: &Panel, config: &Config) -> Result<Analysis> {
    config.validate()?;
    if panel.width() == 0 {
        return Err(Error::EmptyPanel("no series to analyse".into()));
    }
    let (order, order_selection) = choose_order(panel, config).stage("order")?;
    let edges = all_pairs_conditional(panel, order, config.alpha, config.correction).stage("causality")?;
    let network = build_network(&edges, panel.labels()).stage("network")?.with_meta(panel.meta());
    let profiles = if config.spectral && network.edge_count() > 0 {
        let grid = config.grid()?;
        conditional_spectral_profiles(panel, &network.edge_pairs(), order, &grid, &config.band_edges).stage("spectral")?
    } else {
        Vec::new()
    };
    let network = annotate_frequency(&network, &profiles).stage("spectral")?;
    let opts = config.rank_options();
    let pr = pagerank(&network, &opts).stage("rank")?;
    let ch = cheirank(&network, &opts).stage("rank")?;
    let network = network.with_scores(&ch.scores);
    let top = top_k(&ch, config.top_k);
    Ok(Analysis {
        panel: panel.clone(),
        stationarity: None,
        order_selection,
        order,
        edges,
        network,
        profiles,
        pagerank: pr,
        cheirank: ch,
        top,
    })
}

/// Preprocess, screen and analyse a raw panel.
pub fn analyze(raw: &Panel, config: &Config) -> Result<Analysis> {
    config.validate()?;
    let pre = preprocess(raw, config).stage("preprocess")?;
    let (report, screened) = screen(&pre, config).stage("screen")?;
    let mut a = analyze_panel(&screened, config)?;
    a.stationarity = Some(report);
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct GroupResult {
    pub name: String,
    pub labels: Vec<String>,
    pub analysis: Analysis,
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub groups: Vec<GroupResult>,
    pub warnings: Vec<String>,
}

/// Assigns each labelled series to its maturity group. Series without a
/// parseable term are skipped with a warning.
pub fn assign_groups(panel: &Panel, groups: &[GroupSpec]) -> (BTreeMap<String, Vec<String>>, Vec<String>) {
    let mut members: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for label in panel.labels() {
        let years = match panel.meta_for(label).and_then(|m| m.term.as_deref()) {
            Some(term) => match term_years(term) {
                Ok(y) => y,
                Err(e) => {
                    warnings.push(format!("`{label}` excluded from groups: {e}"));
                    continue;
                }
            },
            None => {
                warnings.push(format!("`{label}` excluded from groups: no maturity metadata"));
                continue;
            }
        };
        match groups.iter().find(|g| g.contains(years)) {
            Some(g) => members.entry(g.name.clone()).or_default().push(label.clone()),
            None => warnings.push(format!("`{label}` ({years} years) matches no group")),
        }
    }
    (members, warnings)
}

/// Runs [`analyze`] separately on each maturity group of a raw panel.
pub fn run_group_analysis(raw: &Panel, config: &Config) -> Result<GroupReport> {
    config.validate()?;
    let (members, mut warnings) = assign_groups(raw, &config.groups);
    for w in &warnings {
        log::warn!("{w}");
    }
    let jobs: Vec<(&GroupSpec, Vec<String>)> = config
        .groups
        .iter()
        .filter_map(|g| match members.get(&g.name) {
            Some(m) => Some((g, m.clone())),
            None => {
                warnings.push(format!("group `{}` has no series", g.name));
                None
            }
        })
        .collect();
    let groups = jobs
        .par_iter()
        .map(|(g, labels)| {
            let sub = raw.select(labels)?;
            let analysis = analyze(&sub, config).map_err(|e| e.scoped(format!("group `{}`", g.name)))?;
            Ok(GroupResult {
                name: g.name.clone(),
                labels: labels.clone(),
                analysis,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupReport { groups, warnings })
}

#[derive(Debug, Clone)]
pub struct WindowResult {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub analysis: Option<Analysis>,
    /// Why the window was skipped, if it was.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RollingReport {
    pub windows: Vec<WindowResult>,
}

impl RollingReport {
    /// Top CheiRank label per analysed window.
    pub fn leaders(&self) -> Vec<Option<&str>> {
        self.windows
            .iter()
            .map(|w| w.analysis.as_ref().and_then(|a| a.top.first()).map(String::as_str))
            .collect()
    }
}

/// Runs [`analyze`] on each rolling window of a raw panel. Windows that
/// fail are skipped and the reason recorded.
pub fn run_rolling(raw: &Panel, config: &Config) -> Result<RollingReport> {
    config.validate()?;
    let (Some(&first), Some(&last)) = (raw.dates().first(), raw.dates().last()) else {
        return Err(Error::EmptyPanel("no observations".into()));
    };
    let spans = config.window.windows(first, last)?;
    if spans.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "panel spans {first}..{last}, shorter than one {}-month window",
            config.window.width_months
        )));
    }
    let windows = spans
        .par_iter()
        .map(|&(start, end)| {
            let slice = raw.slice_dates(start, end);
            match analyze(&slice, config) {
                Ok(a) => WindowResult {
                    start,
                    end,
                    analysis: Some(a),
                    skipped: None,
                },
                Err(e) => {
                    log::warn!("window {start}..{end} skipped: {e}");
                    WindowResult {
                        start,
                        end,
                        analysis: None,
                        skipped: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    Ok(RollingReport { windows })
}

/// Output file with its checksum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: Config,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn files(&self) -> impl Iterator<Item = &FileRecord> {
        self.stages.iter().flat_map(|s| &s.files)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes files under `root`, recording paths relative to it.
struct BundleWriter {
    root: PathBuf,
    stages: Vec<StageRecord>,
}

impl BundleWriter {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            stages: Vec::new(),
        })
    }

    fn file(&mut self, stage: &str, rel: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write(&path)?;
        let record = FileRecord {
            path: rel.to_string(),
            sha256: sha256_file(&path)?,
        };
        match self.stages.iter_mut().find(|s| s.stage == stage) {
            Some(s) => s.files.push(record),
            None => self.stages.push(StageRecord {
                stage: stage.to_string(),
                files: vec![record],
            }),
        }
        Ok(())
    }

    fn finish(self, config: &Config) -> Result<Manifest> {
        let manifest = Manifest {
            config: config.clone(),
            stages: self.stages,
        };
        fs::write(self.root.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    }
}

fn write_json<T: Serialize>(value: &T) -> impl FnOnce(&Path) -> Result<()> + '_ {
    move |p| Ok(fs::write(p, serde_json::to_string_pretty(value)? + "\n")?)
}

fn create(p: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(p)?))
}

/// Writes one analysis under `prefix` (empty for the bundle root).
fn write_analysis(w: &mut BundleWriter, a: &Analysis, prefix: &str) -> Result<()> {
    let at = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}/{name}") };
    w.file("preprocess", &at("preprocessed.csv"), |p| a.panel.save_csv(p))?;
    if let Some(report) = &a.stationarity {
        w.file("screen", &at("stationarity.csv"), |p| report.write_csv(create(p)?))?;
    }
    #[derive(Serialize)]
    struct OrderInfo<'a> {
        order: usize,
        selection: Option<&'a OrderSelection>,
    }
    w.file(
        "causality",
        &at("order.json"),
        write_json(&OrderInfo {
            order: a.order,
            selection: a.order_selection.as_ref(),
        }),
    )?;
    w.file("causality", &at("tests.csv"), |p| a.edges.write_csv(create(p)?))?;
    w.file("network", &at("network.json"), |p| export(&a.network, ExportFormat::Json, p))?;
    w.file("network", &at("network.dot"), |p| export(&a.network, ExportFormat::Dot, p))?;
    w.file("network", &at("network.graphml"), |p| export(&a.network, ExportFormat::Graphml, p))?;
    w.file("network", &at("edges.csv"), |p| export(&a.network, ExportFormat::Csv, p))?;
    w.file("network", &at("degrees.csv"), |p| write_degree_csv(&degree_table(&a.network), create(p)?))?;
    w.file("spectral", &at("spectral.csv"), |p| write_profiles_csv(&a.profiles, create(p)?))?;
    w.file("spectral", &at("peaks.csv"), |p| write_peaks_csv(&a.profiles, create(p)?))?;
    w.file("rank", &at("scores.csv"), |p| write_scores_csv(&a.pagerank, &a.cheirank, create(p)?))?;
    Ok(())
}

/// Runs [`analyze`] and writes the bundle with its manifest into `out`.
pub fn run_full(raw: &Panel, config: &Config, out: impl AsRef<Path>) -> Result<(Analysis, Manifest)> {
    let analysis = analyze(raw, config)?;
    let manifest = write_bundle(&analysis, config, out).stage("write")?;
    Ok((analysis, manifest))
}

pub fn write_bundle(analysis: &Analysis, config: &Config, out: impl AsRef<Path>) -> Result<Manifest> {
    let mut w = BundleWriter::new(out.as_ref())?;
    w.file("config", CONFIG_FILE, write_json(config))?;
    write_analysis(&mut w, analysis, "")?;
    w.finish(config)
}

#[derive(Serialize)]
struct LeaderRow<'a> {
    scope: &'a str,
    rank: usize,
    label: &'a str,
    cheirank: f64,
}

/// Per-group subdirectories plus `leaders.csv` and a manifest.
pub fn write_group_bundle(report: &GroupReport, config: &Config, out: impl AsRef<Path>) -> Result<Manifest> {
    let mut w = BundleWriter::new(out.as_ref())?;
    w.file("config", CONFIG_FILE, write_json(config))?;
    for g in &report.groups {
        write_analysis(&mut w, &g.analysis, &g.name)?;
    }
    w.file("summary", "leaders.csv", |p| {
        let mut csv = csv::Writer::from_writer(create(p)?);
        for g in &report.groups {
            for (i, label) in g.analysis.top.iter().enumerate() {
                csv.serialize(LeaderRow {
                    scope: &g.name,
                    rank: i + 1,
                    label,
                    cheirank: g.analysis.cheirank.scores[label],
                })?;
            }
        }
        csv.flush()?;
        Ok(())
    })?;
    w.file("summary", "warnings.json", write_json(&report.warnings))?;
    w.finish(config)
}

#[derive(Serialize)]
struct WindowRow {
    window: String,
    start: NaiveDate,
    end: NaiveDate,
    nodes: usize,
    edges: usize,
    leader: String,
    skipped: String,
}

/// Per-window subdirectories plus `windows.csv`, `leaders.csv` and a manifest.
pub fn write_rolling_bundle(report: &RollingReport, config: &Config, out: impl AsRef<Path>) -> Result<Manifest> {
    let mut w = BundleWriter::new(out.as_ref())?;
    w.file("config", CONFIG_FILE, write_json(config))?;
    let name = |k: usize| format!("window{:02}", k + 1);
    for (k, win) in report.windows.iter().enumerate() {
        if let Some(a) = &win.analysis {
            write_analysis(&mut w, a, &name(k))?;
        }
    }
    w.file("summary", "windows.csv", |p| {
        let mut csv = csv::Writer::from_writer(create(p)?);
        for (k, win) in report.windows.iter().enumerate() {
            let a = win.analysis.as_ref();
            csv.serialize(WindowRow {
                window: name(k),
                start: win.start,
                end: win.end,
                nodes: a.map_or(0, |a| a.network.node_count()),
                edges: a.map_or(0, |a| a.network.edge_count()),
                leader: a.and_then(|a| a.top.first().cloned()).unwrap_or_default(),
                skipped: win.skipped.clone().unwrap_or_default(),
            })?;
        }
        csv.flush()?;
        Ok(())
    })?;
    w.file("summary", "leaders.csv", |p| {
        let mut csv = csv::Writer::from_writer(create(p)?);
        for (k, win) in report.windows.iter().enumerate() {
            if let Some(a) = &win.analysis {
                let scope = name(k);
                for (i, label) in a.top.iter().enumerate() {
                    csv.serialize(LeaderRow {
                        scope: &scope,
                        rank: i + 1,
                        label,
                        cheirank: a.cheirank.scores[label],
                    })?;
                }
            }
        }
        csv.flush()?;
        Ok(())
    })?;
    w.finish(config)
}
