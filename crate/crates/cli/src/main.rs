//! `causalnet` command-line front end.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causalnet::error::StageExt;
use causalnet::gcfreq::{conditional_spectral_gc, conditional_spectral_profiles, write_peaks_csv, write_profiles_csv};
use causalnet::gctime::conditional_gc;
use causalnet::graph::write_network;
use causalnet::panel::{load_csv, load_meta};
use causalnet::pipeline::{
    choose_order, preprocess, run_full, run_group_analysis, run_rolling, screen, write_group_bundle, write_rolling_bundle,
};
use causalnet::rank::{cheirank, pagerank, write_scores_csv};
use causalnet::synth::{default_hub_groups, make_chain, make_hub_model, make_switching_hub_panel, HubGroup, TruthFile, DEFAULT_COUPLING};
use causalnet::var::{simulate_var, DEFAULT_BURN_IN};
use causalnet::{BandEdges, CausalNetwork, Config, Correction, ExportFormat, Panel, SpectralProfile};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Causal networks of multivariate time series via conditional Granger
/// causality and CheiRank.
#[derive(Debug, Parser)]
#[command(name = "causalnet", version, arg_required_else_help = true)]
struct Cli {
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean, detrend and screen a panel for stationarity
    Preprocess {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Conditional Granger causality for a single pair
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Full network analysis with a manifest-checked output bundle
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Spectral causality profiles for one pair or every edge of a network
    Spectral {
        #[command(flatten)]
        input: InputArgs,
        /// Network whose edges are profiled; each is conditioned on all other series
        #[arg(long, conflicts_with_all = ["source", "target"])]
        network: Option<PathBuf>,
        #[command(flatten)]
        pair: OptionalPairArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// PageRank and CheiRank scores of a network, as CSV on stdout
    Rank {
        /// Network JSON written by `analyze`
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Separate analyses per maturity group
    Groups {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Rolling-window analyses tracking the leading series
    Evolve {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simulate a synthetic panel with known causal truth
    Synth(SynthArgs),
    /// Convert a network JSON to another format
    Export {
        /// Network JSON written by `analyze`
        #[arg(long)]
        network: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Destination file [default: stdout]
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Panel CSV: a date column followed by one numeric column per series
    #[arg(long)]
    input: PathBuf,
    /// JSON metadata mapping each label to its category and term
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory
    #[arg(long, env = "CAUSALNET_OUT", default_value = "causalnet-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PairArgs {
    /// Driving series
    #[arg(long)]
    source: String,
    /// Driven series
    #[arg(long)]
    target: String,
    /// Conditioning series, comma separated
    #[arg(long, value_delimiter = ',')]
    cond: Vec<String>,
}

#[derive(Debug, Args)]
struct OptionalPairArgs {
    /// Driving series
    #[arg(long, requires = "target")]
    source: Option<String>,
    /// Driven series
    #[arg(long, requires = "source")]
    target: Option<String>,
    /// Conditioning series, comma separated
    #[arg(long, value_delimiter = ',', requires = "source")]
    cond: Vec<String>,
}

/// Overrides applied on top of the defaults or a `--config` file.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of the date column [default: date]
    #[arg(long)]
    date_column: Option<String>,
    /// Moving-average detrending window [default: 100]
    #[arg(long)]
    window: Option<usize>,
    /// Skip moving-average detrending
    #[arg(long, conflicts_with = "window")]
    no_detrend: bool,
    /// Minimum series length in years of 252 trading days [default: 3]
    #[arg(long)]
    min_years: Option<f64>,
    /// Largest tolerated fraction of missing values per series [default: 0.1]
    #[arg(long)]
    max_missing: Option<f64>,
    /// Significance level [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// Drop series that fail the stationarity screen
    #[arg(long)]
    drop_nonstationary: bool,
    /// Fixed VAR order
    #[arg(long, conflicts_with = "auto_order")]
    order: Option<usize>,
    /// Choose the VAR order by BIC (the default)
    #[arg(long)]
    auto_order: bool,
    /// Largest order searched by BIC [default: 10]
    #[arg(long)]
    max_order: Option<usize>,
    /// Multiple-testing correction: none, bonferroni or bh [default: none]
    #[arg(long)]
    correction: Option<Correction>,
    /// Damping factor for PageRank and CheiRank [default: 0.85]
    #[arg(long)]
    damping: Option<f64>,
    /// Power-iteration tolerance on the L1 change [default: 1e-9]
    #[arg(long)]
    tol: Option<f64>,
    /// Power-iteration limit [default: 10000]
    #[arg(long)]
    max_iter: Option<usize>,
    /// Skip spectral profiling of edges
    #[arg(long)]
    no_spectral: bool,
    /// Frequency grid points on [0, pi] [default: 512]
    #[arg(long)]
    grid_points: Option<usize>,
    /// Low/medium band boundary in radians [default: pi/3]
    #[arg(long)]
    band_low: Option<f64>,
    /// Medium/high band boundary in radians [default: 2pi/3]
    #[arg(long)]
    band_high: Option<f64>,
    /// Number of leading CheiRank series reported [default: 5]
    #[arg(long)]
    top_k: Option<usize>,
    /// Rolling window width in months [default: 36]
    #[arg(long)]
    width_months: Option<u32>,
    /// Rolling window step in months [default: 24]
    #[arg(long)]
    step_months: Option<u32>,
    /// Category to leave out; repeatable
    #[arg(long = "exclude-category")]
    exclude_categories: Vec<String>,
    /// Random seed recorded with the run [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn build(&self) -> Result<Config, CliError> {
        let mut c = match &self.config {
            Some(p) => Config::load(p).map_err(CliError::Usage)?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            date_column => c.date_column,
            max_missing => c.max_missing_frac,
            alpha => c.alpha,
            max_order => c.max_order,
            correction => c.correction,
            damping => c.damping,
            tol => c.tol,
            max_iter => c.max_iter,
            grid_points => c.grid_points,
            band_low => c.band_edges.low_medium,
            band_high => c.band_edges.medium_high,
            top_k => c.top_k,
            width_months => c.window.width_months,
            step_months => c.window.step_months,
            seed => c.seed,
        }
        if let Some(w) = self.window {
            c.detrend_window = Some(w);
        }
        if self.no_detrend {
            c.detrend_window = None;
        }
        if let Some(y) = self.min_years {
            if y.is_nan() || y < 0.0 {
                return Err(CliError::usage(format!("--min-years must be non-negative, got {y}")));
            }
            c.min_length = (y * causalnet::panel::TRADING_DAYS_PER_YEAR as f64).round() as usize;
        }
        if self.drop_nonstationary {
            c.drop_nonstationary = true;
        }
        if self.order.is_some() {
            c.order = self.order;
        }
        if self.auto_order {
            c.order = None;
        }
        if self.no_spectral {
            c.spectral = false;
        }
        if !self.exclude_categories.is_empty() {
            c.exclude_categories = self.exclude_categories.clone();
        }
        c.validate().map_err(CliError::Usage)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Graphml,
    Json,
    Csv,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Dot => ExportFormat::Dot,
            FormatArg::Graphml => ExportFormat::Graphml,
            FormatArg::Json => ExportFormat::Json,
            FormatArg::Csv => ExportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    /// VAR(1) chain A -> B -> C -> ...
    Chain,
    /// Three maturity groups, each driven by one hub series
    Hub,
    /// One group whose hub changes on a given date
    Switch,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    /// Chain length
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Cross-series coupling
    #[arg(long, default_value_t = DEFAULT_COUPLING)]
    coupling: f64,
    /// Observations to simulate (chain and hub)
    #[arg(long, default_value_t = 5000)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hub before the switch date
    #[arg(long, default_value = "R1d")]
    hub_before: String,
    /// Hub from the switch date on
    #[arg(long, default_value = "SHIBOR3m")]
    hub_after: String,
    #[arg(long, default_value = "2008-01-01")]
    start: NaiveDate,
    #[arg(long, default_value = "2011-01-01")]
    switch: NaiveDate,
    #[arg(long, default_value = "2014-12-31")]
    end: NaiveDate,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(causalnet::Error),
    Analysis(causalnet::Error),
}

impl CliError {
    fn usage(msg: String) -> Self {
        CliError::Usage(causalnet::Error::InvalidArgument(msg))
    }
}

impl From<causalnet::Error> for CliError {
    fn from(e: causalnet::Error) -> Self {
        CliError::Analysis(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Analysis(e.into())
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    code: u8,
    stage: Option<&'a str>,
    kind: &'a str,
    message: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            clap::Error::raw(clap::error::ErrorKind::ValueValidation, "--jobs must be at least 1\n").exit();
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("cannot size thread pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, e) = match &err {
                CliError::Usage(e) => (2, e),
                CliError::Analysis(e) => (1, e),
            };
            let line = ErrorLine {
                code,
                stage: e.stage(),
                kind: e.kind(),
                message: e.to_string(),
            };
            eprintln!("error: {}", serde_json::to_string(&line).expect("error line serializes"));
            ExitCode::from(code)
        }
    }
}

fn load_panel(input: &InputArgs, config: &Config) -> Result<Panel, CliError> {
    let panel = load_csv(&input.input, &config.date_column)?;
    Ok(match &input.meta {
        Some(m) => panel.with_meta(load_meta(m)?),
        None => panel,
    })
}

/// Writes to stdout; a closed pipe (as with `| head`) ends output quietly.
fn emit(write: impl FnOnce(&mut dyn Write) -> causalnet::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(io::stdout().lock());
    let res = write(&mut w).and_then(|()| Ok(w.flush()?));
    match res {
        Err(causalnet::Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        Err(causalnet::Error::Csv(e)) if matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe) => Ok(()),
        other => Ok(other?),
    }
}

fn emit_line(line: impl std::fmt::Display) -> Result<(), CliError> {
    emit(|w| Ok(writeln!(w, "{line}")?))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Preprocess { input, config, out } => cmd_preprocess(&input, &config.build()?, &out.out),
        Command::Test { input, pair, config } => cmd_test(&input, &pair, &config.build()?),
        Command::Analyze { input, config, out } => cmd_analyze(&input, &config.build()?, &out.out),
        Command::Spectral {
            input,
            network,
            pair,
            config,
            out,
        } => cmd_spectral(&input, network.as_deref(), &pair, &config.build()?, &out.out),
        Command::Rank { network, config } => cmd_rank(&network, &config.build()?),
        Command::Groups { input, config, out } => cmd_groups(&input, &config.build()?, &out.out),
        Command::Evolve { input, config, out } => cmd_evolve(&input, &config.build()?, &out.out),
        Command::Synth(args) => cmd_synth(&args),
        Command::Export { network, format, output } => cmd_export(&network, format.into(), output.as_deref()),
    }
}

fn cmd_preprocess(input: &InputArgs, config: &Config, out: &Path) -> Result<(), CliError> {
    let raw = load_panel(input, config)?;
    let pre = preprocess(&raw, config).stage("preprocess")?;
    let (report, screened) = screen(&pre, config).stage("screen")?;
    fs::create_dir_all(out)?;
    screened.save_csv(out.join("preprocessed.csv"))?;
    report.write_csv(BufWriter::new(fs::File::create(out.join("stationarity.csv"))?))?;
    if !screened.meta().is_empty() {
        screened.save_meta(out.join("meta.json"))?;
    }
    emit_line(format!(
        "{} series x {} observations; non-stationary: {}",
        screened.width(),
        screened.len(),
        report.excluded().join(",")
    ))?;
    Ok(())
}

fn cmd_test(input: &InputArgs, pair: &PairArgs, config: &Config) -> Result<(), CliError> {
    let raw = load_panel(input, config)?;
    let mut labels = vec![pair.target.as_str(), pair.source.as_str()];
    labels.extend(pair.cond.iter().map(String::as_str));
    let sub = raw.select(&labels)?;
    let panel = preprocess(&sub, config).stage("preprocess")?;
    let (order, _) = choose_order(&panel, config).stage("order")?;
    let stat = conditional_gc(&panel, &pair.target, &pair.source, &pair.cond, order).stage("causality")?;
    emit_line(serde_json::to_string_pretty(&stat).map_err(causalnet::Error::from)?)?;
    Ok(())
}

fn cmd_analyze(input: &InputArgs, config: &Config, out: &Path) -> Result<(), CliError> {
    let raw = load_panel(input, config)?;
    let (a, _) = run_full(&raw, config, out)?;
    emit_line(format!(
        "order {}; {} nodes, {} edges; top: {}",
        a.order,
        a.network.node_count(),
        a.network.edge_count(),
        a.top.join(",")
    ))?;
    Ok(())
}

#[derive(Serialize)]
struct ProfileSummary<'a> {
    source: &'a str,
    target: &'a str,
    peak_lambda: f64,
    band: causalnet::Band,
    zero_power: bool,
    mean: f64,
}

fn cmd_spectral(
    input: &InputArgs,
    network: Option<&Path>,
    pair: &OptionalPairArgs,
    config: &Config,
    out: &Path,
) -> Result<(), CliError> {
    let raw = load_panel(input, config)?;
    let grid = config.grid()?;
    let edges = BandEdges::new(config.band_edges.low_medium, config.band_edges.medium_high)?;
    let profiles: Vec<SpectralProfile> = match (network, &pair.source, &pair.target) {
        (Some(path), _, _) => {
            let net = CausalNetwork::load_json(path)?;
            let panel = preprocess(&raw, config).stage("preprocess")?;
            let labels: Vec<&str> = net.labels().collect();
            let panel = panel.select(&labels)?;
            let (order, _) = choose_order(&panel, config).stage("order")?;
            conditional_spectral_profiles(&panel, &net.edge_pairs(), order, &grid, &edges).stage("spectral")?
        }
        (None, Some(source), Some(target)) => {
            let mut labels = vec![target.as_str(), source.as_str()];
            labels.extend(pair.cond.iter().map(String::as_str));
            let panel = preprocess(&raw.select(&labels)?, config).stage("preprocess")?;
            let (order, _) = choose_order(&panel, config).stage("order")?;
            vec![conditional_spectral_gc(&panel, target, source, &pair.cond, order, &grid, &edges).stage("spectral")?]
        }
        _ => return Err(CliError::usage("give either --network or --source with --target".into())),
    };
    fs::create_dir_all(out)?;
    write_profiles_csv(&profiles, BufWriter::new(fs::File::create(out.join("spectral.csv"))?))?;
    write_peaks_csv(&profiles, BufWriter::new(fs::File::create(out.join("peaks.csv"))?))?;
    let summary: Vec<ProfileSummary> = profiles
        .iter()
        .map(|p| ProfileSummary {
            source: &p.source,
            target: &p.target,
            peak_lambda: p.peak_lambda,
            band: p.band,
            zero_power: p.zero_power,
            mean: p.mean(),
        })
        .collect();
    emit_line(serde_json::to_string_pretty(&summary).map_err(causalnet::Error::from)?)?;
    Ok(())
}

fn cmd_rank(network: &Path, config: &Config) -> Result<(), CliError> {
    let net = CausalNetwork::load_json(network)?;
    let opts = config.rank_options();
    let pr = pagerank(&net, &opts).stage("rank")?;
    let ch = cheirank(&net, &opts).stage("rank")?;
    emit(|w| write_scores_csv(&pr, &ch, w))
}

fn cmd_groups(input: &InputArgs, config: &Config, out: &Path) -> Result<(), CliError> {
    let raw = load_panel(input, config)?;
    let report = run_group_analysis(&raw, config)?;
    write_group_bundle(&report, config, out)?;
    for g in &report.groups {
        emit_line(format!("{}: {}", g.name, g.analysis.top.join(",")))?;
    }
    Ok(())
}

fn cmd_evolve(input: &InputArgs, config: &Config, out: &Path) -> Result<(), CliError> {
    let raw = load_panel(input, config)?;
    let report = run_rolling(&raw, config)?;
    write_rolling_bundle(&report, config, out)?;
    for (w, leader) in report.windows.iter().zip(report.leaders()) {
        emit_line(format!("{}..{}: {}", w.start, w.end, leader.unwrap_or("-")))?;
    }
    Ok(())
}

fn write_truth<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(causalnet::Error::from)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let out = &args.out.out;
    fs::create_dir_all(out)?;
    match args.kind {
        SynthKind::Chain => {
            let (model, truth) = make_chain(args.n, args.coupling)?;
            let panel = simulate_var(&model, args.len, args.seed, DEFAULT_BURN_IN)?;
            panel.save_csv(out.join("panel.csv"))?;
            write_truth(&out.join("truth.json"), &TruthFile { truth, model })?;
        }
        SynthKind::Hub => {
            let (model, truth, meta) = make_hub_model(&default_hub_groups(), args.coupling)?;
            let panel = simulate_var(&model, args.len, args.seed, DEFAULT_BURN_IN)?.with_meta(meta);
            panel.save_csv(out.join("panel.csv"))?;
            panel.save_meta(out.join("meta.json"))?;
            write_truth(&out.join("truth.json"), &TruthFile { truth, model })?;
        }
        SynthKind::Switch => {
            let members = default_hub_groups().swap_remove(0).members;
            let panel = make_switching_hub_panel(
                &members,
                &args.hub_before,
                &args.hub_after,
                args.start,
                args.switch,
                args.end,
                args.seed,
            )?;
            let regime = |hub: &str| -> Result<TruthFile, CliError> {
                let group = HubGroup {
                    name: "regime".into(),
                    hub: hub.into(),
                    members: members.clone(),
                };
                let (model, truth, _) = make_hub_model(&[group], DEFAULT_COUPLING)?;
                Ok(TruthFile { truth, model })
            };
            #[derive(Serialize)]
            struct SwitchTruth {
                switch: NaiveDate,
                before: TruthFile,
                after: TruthFile,
            }
            panel.save_csv(out.join("panel.csv"))?;
            panel.save_meta(out.join("meta.json"))?;
            let truth = SwitchTruth {
                switch: args.switch,
                before: regime(&args.hub_before)?,
                after: regime(&args.hub_after)?,
            };
            write_truth(&out.join("truth.json"), &truth)?;
        }
    }
    emit_line(out.display())?;
    Ok(())
}

fn cmd_export(network: &Path, format: ExportFormat, output: Option<&Path>) -> Result<(), CliError> {
    let net = CausalNetwork::load_json(network)?;
    match output {
        Some(p) => causalnet::graph::export(&net, format, p)?,
        None => emit(|w| write_network(&net, format, w))?,
    }
    Ok(())
}
