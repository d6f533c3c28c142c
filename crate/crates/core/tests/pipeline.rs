use std::collections::BTreeSet;

use causalnet::gctime::all_pairs_conditional;
use causalnet::graph::CausalNetwork;
use causalnet::pipeline::{analyze, preprocess, run_full, run_group_analysis, run_rolling, screen, Config, GroupSpec, WindowSpec, MANIFEST_FILE};
use causalnet::synth::{default_hub_groups, make_chain, make_hub_panel, make_switching_hub_panel};
use causalnet::var::simulate_var;
use causalnet::{Error, Manifest, Panel};
use chrono::NaiveDate;

fn chain_panel(seed: u64) -> (Panel, Vec<(String, String)>) {
    let (m, truth) = make_chain(3, 0.4).unwrap();
    (simulate_var(&m, 5000, seed, 1000).unwrap(), truth.edges)
}

fn d(y: i32, m: u32, dd: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, dd).unwrap()
}

#[test]
fn full_run_writes_every_stage() {
    let (panel, truth) = chain_panel(21);
    let dir = tempfile::tempdir().unwrap();
    let (analysis, manifest) = run_full(&panel, &Config::default(), dir.path()).unwrap();

    let stages: BTreeSet<&str> = manifest.stages.iter().map(|s| s.stage.as_str()).collect();
    for s in ["preprocess", "screen", "causality", "network", "spectral", "rank"] {
        assert!(stages.contains(s), "missing stage {s}");
    }
    for f in manifest.files() {
        assert!(dir.path().join(&f.path).exists(), "{}", f.path);
        assert_eq!(f.sha256.len(), 64);
    }
    let on_disk: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(manifest.config, Config::default());

    assert_eq!(analysis.network.edge_pairs(), truth);
    let net = CausalNetwork::load_json(dir.path().join("network.json")).unwrap();
    assert_eq!(net, analysis.network);
    assert!(net.edges().iter().all(|e| e.band.is_some()));
    assert_eq!(analysis.top[0], "A");
}

#[test]
fn full_run_is_deterministic() {
    let (panel, _) = chain_panel(22);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, ma) = run_full(&panel, &Config::default(), a.path()).unwrap();
    let (_, mb) = run_full(&panel, &Config::default(), b.path()).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(
        std::fs::read(a.path().join(MANIFEST_FILE)).unwrap(),
        std::fs::read(b.path().join(MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn network_matches_direct_causality_run() {
    let (panel, _) = chain_panel(23);
    let config = Config::default();
    let a = analyze(&panel, &config).unwrap();
    let (_, screened) = screen(&preprocess(&panel, &config).unwrap(), &config).unwrap();
    let direct = all_pairs_conditional(&screened, a.order, config.alpha, config.correction).unwrap();
    let want: Vec<(String, String)> = direct.significant().map(|t| (t.stat.source.clone(), t.stat.target.clone())).collect();
    assert_eq!(a.network.edge_pairs(), want);
}

#[test]
fn undetrended_chain_recovers_truth() {
    let (panel, truth) = chain_panel(24);
    let config = Config {
        detrend_window: None,
        ..Config::default()
    };
    let a = analyze(&panel, &config).unwrap();
    assert_eq!(a.order, 1);
    assert_eq!(a.network.edge_pairs(), truth);
}

#[test]
fn single_group_equals_direct_run() {
    let (panel, truth) = make_hub_panel(&default_hub_groups()[..1], 3000, 5).unwrap();
    let config = Config {
        groups: vec![GroupSpec::new("all", None, None)],
        ..Config::default()
    };
    let report = run_group_analysis(&panel, &config).unwrap();
    assert_eq!(report.groups.len(), 1);
    let direct = analyze(&panel, &config).unwrap();
    assert_eq!(report.groups[0].analysis.network, direct.network);
    assert_eq!(report.groups[0].analysis.cheirank, direct.cheirank);
    assert_eq!(direct.top[0], "R1d");
    assert_eq!(direct.network.edge_count(), truth.edges.len());
}

#[test]
fn groups_only_read_their_members() {
    let (panel, _) = make_hub_panel(&default_hub_groups(), 2000, 6).unwrap();
    let report = run_group_analysis(&panel, &Config::default()).unwrap();
    let names: Vec<&str> = report.groups.iter().map(|g| g.name.as_str()).collect();
    assert_eq!(names, ["short", "mid", "long"]);
    for g in &report.groups {
        let labels: BTreeSet<&str> = g.analysis.network.labels().collect();
        let members: BTreeSet<&str> = g.labels.iter().map(String::as_str).collect();
        assert_eq!(labels, members);
        assert_eq!(g.analysis.panel.labels().len(), 5);
    }
}

#[test]
fn one_series_group_is_trivial() {
    let (panel, _) = make_hub_panel(&default_hub_groups(), 2000, 7).unwrap();
    let only = panel.select(&["R1d", "CBB2y", "TB3y", "PFB2y", "HRCB3y", "RD5y"]).unwrap();
    let report = run_group_analysis(&only, &Config::default()).unwrap();
    let short = report.groups.iter().find(|g| g.name == "short").unwrap();
    assert_eq!(short.analysis.network.edge_count(), 0);
    assert_eq!(short.analysis.cheirank.scores["R1d"], 1.0);
    assert!(report.warnings.iter().any(|w| w.contains("long")));
}

#[test]
fn oversized_group_error_names_group() {
    let (panel, _) = make_hub_panel(&default_hub_groups(), 400, 8).unwrap();
    let config = Config {
        min_length: 100,
        order: Some(80),
        ..Config::default()
    };
    let err = run_group_analysis(&panel, &config).unwrap_err();
    assert_eq!(err.kind(), "degrees_of_freedom");
    assert!(err.to_string().contains("group `"), "{err}");
    assert!(matches!(err, Error::Scoped { .. }));
}

#[test]
fn unlabelled_series_excluded_with_warning() {
    let (m, _) = make_chain(3, 0.4).unwrap();
    let panel = simulate_var(&m, 2000, 9, 500).unwrap();
    let report = run_group_analysis(&panel, &Config::default()).unwrap();
    assert!(report.groups.is_empty());
    assert_eq!(report.warnings.iter().filter(|w| w.contains("no maturity")).count(), 3);
}

#[test]
fn window_then_pipeline_equals_presliced() {
    let members = &default_hub_groups()[0].members;
    let panel = make_switching_hub_panel(members, "R1d", "SHIBOR3m", d(2008, 1, 1), d(2011, 1, 1), d(2014, 12, 31), 3).unwrap();
    let config = Config::default();
    let report = run_rolling(&panel, &config).unwrap();
    assert_eq!(report.windows.len(), 3);
    for w in &report.windows {
        let direct = analyze(&panel.slice_dates(w.start, w.end), &config).unwrap();
        let got = w.analysis.as_ref().unwrap();
        assert_eq!(got.network, direct.network);
        assert_eq!(got.top, direct.top);
    }
    assert_eq!(report.leaders()[0], Some("R1d"));
    assert_eq!(report.leaders()[2], Some("SHIBOR3m"));
}

#[test]
fn whole_span_window_and_short_windows() {
    let members = &default_hub_groups()[0].members;
    let panel = make_switching_hub_panel(members, "R1d", "R1d", d(2008, 1, 1), d(2011, 1, 1), d(2014, 12, 31), 4).unwrap();
    let whole = Config {
        window: WindowSpec {
            width_months: 84,
            step_months: 24,
        },
        ..Config::default()
    };
    assert_eq!(run_rolling(&panel, &whole).unwrap().windows.len(), 1);

    // six-month windows hold fewer observations than the cleaning minimum
    let short = Config {
        window: WindowSpec {
            width_months: 6,
            step_months: 24,
        },
        ..Config::default()
    };
    let report = run_rolling(&panel, &short).unwrap();
    assert!(!report.windows.is_empty());
    assert!(report.windows.iter().all(|w| w.analysis.is_none() && w.skipped.is_some()));
}

#[test]
fn excluded_categories_are_dropped() {
    let (panel, _) = make_hub_panel(&default_hub_groups()[..1], 1500, 10).unwrap();
    let config = Config {
        exclude_categories: vec!["R".into()],
        ..Config::default()
    };
    let a = analyze(&panel, &config).unwrap();
    let labels: Vec<&str> = a.network.labels().collect();
    assert_eq!(labels, ["IBO1d", "SHIBOR3m", "CBB1y"]);
}
