//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use causalnet::gcfreq::{cpsd, remove_instantaneous, spectral_gc, BandEdges, FrequencyGrid};
use causalnet::gctime::{all_pairs_conditional, conditional_gc, pairwise_gc, Correction};
use causalnet::graph::{CausalEdge, CausalNetwork, NodeInfo};
use causalnet::panel::{adf_test, kpss_test, schwert_max_lag, KpssBandwidth};
use causalnet::pipeline::{analyze_panel, run_group_analysis, run_rolling, Config};
use causalnet::rank::{cheirank, pagerank, RankOptions};
use causalnet::synth::{default_hub_groups, make_chain, make_hub_panel, make_switching_hub_panel, oracle_gc, ORACLE_LEN};
use causalnet::var::{fit_var, is_stable, select_order_bic, simulate_var, VarModel};
use causalnet::Panel;
use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn frac(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn spurious_pattern() -> Outcome {
    let start = Instant::now();
    let (model, _) = make_chain(3, 0.4).unwrap();
    let results: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let p = simulate_var(&model, 5000, 1000 + seed, 1000).unwrap();
            let pair = pairwise_gc(&p, "C", "A", 1).unwrap().pvalue < 0.01;
            let cond = conditional_gc(&p, "C", "A", &["B"], 1).unwrap().pvalue < 0.01;
            (pair, cond)
        })
        .collect();
    let pair = frac(results.iter().filter(|r| r.0).count(), 100);
    let cond = frac(results.iter().filter(|r| r.1).count(), 100);
    let t = start.elapsed();
    outcome(
        pair >= 0.5 && cond <= 0.05 && t < Duration::from_secs(120),
        format!("A->C significant: pairwise {:.0}%, conditional on B {:.0}% ({:.2?})", pair * 100.0, cond * 100.0, t),
    )
}

fn network_recovery() -> Outcome {
    let start = Instant::now();
    let (model, truth) = make_chain(3, 0.4).unwrap();
    let exact = (0..100u64)
        .into_par_iter()
        .filter(|seed| {
            let p = simulate_var(&model, 5000, 2000 + seed, 1000).unwrap();
            let edges = all_pairs_conditional(&p, 1, 0.01, Correction::None).unwrap();
            let mut found: Vec<(String, String)> = edges.significant().map(|t| (t.stat.source.clone(), t.stat.target.clone())).collect();
            found.sort();
            found == truth.edges
        })
        .count();
    let t = start.elapsed();
    outcome(
        frac(exact, 100) >= 0.9 && t < Duration::from_secs(120),
        format!("exact adjacency in {exact}/100 seeds ({t:.2?})"),
    )
}

fn null_calibration() -> Outcome {
    let model = VarModel::new(vec![DMatrix::zeros(5, 5)], DMatrix::identity(5, 5), labels(5)).unwrap();
    let per_seed: Vec<Vec<bool>> = (0..1000u64)
        .into_par_iter()
        .map(|seed| {
            let p = simulate_var(&model, 2000, 3000 + seed, 0).unwrap();
            let edges = all_pairs_conditional(&p, 1, 0.05, Correction::None).unwrap();
            edges.tests.iter().map(|t| t.significant).collect()
        })
        .collect();
    let edges = per_seed[0].len();
    let rates: Vec<f64> = (0..edges)
        .map(|k| frac(per_seed.iter().filter(|s| s[k]).count(), per_seed.len()))
        .collect();
    let pooled = rates.iter().sum::<f64>() / edges as f64;
    let (lo, hi) = rates.iter().fold((1.0f64, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    outcome(
        (pooled - 0.05).abs() <= 0.015,
        format!(
            "per-edge rejection rate {:.2}% over {edges} edges x 1000 seeds (individual edges {:.1}%..{:.1}%)",
            pooled * 100.0,
            lo * 100.0,
            hi * 100.0
        ),
    )
}

fn random_covariance(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let mut s: DMatrix<f64> = &b * b.transpose();
    s /= n as f64;
    s + DMatrix::<f64>::identity(n, n) * 0.2
}

/// Stable bivariate VAR(`order`) with a cross coefficient of at least 0.2
/// from series 1 into series 0 at lag one.
fn random_bivariate(rng: &mut ChaCha8Rng, order: usize) -> VarModel {
    loop {
        let coeffs: Vec<DMatrix<f64>> = (0..order)
            .map(|k| {
                let scale = 0.5 / (k + 1) as f64;
                let mut a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-scale..scale));
                if k == 0 {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    a[(0, 1)] = sign * rng.random_range(0.2..0.5);
                }
                a
            })
            .collect();
        let sigma = random_covariance(rng, 2);
        let m = VarModel::new(coeffs, sigma, labels(2)).unwrap();
        if m.spectral_radius() < 0.9 {
            return m;
        }
    }
}

fn spectral_time_consistency() -> Outcome {
    let grid = FrequencyGrid::default();
    let edges = BandEdges::default();
    let errors: Vec<(f64, f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(4000 + k);
            let m = random_bivariate(&mut rng, 1 + (k as usize % 2));
            let p = simulate_var(&m, 100_000, 4100 + k, 1000).unwrap();
            let order = 10;
            let fit = fit_var(&p, order).unwrap();
            let spec = spectral_gc(&fit, 0, 1, &grid, &edges).unwrap().mean();
            let td = pairwise_gc(&p, "x0", "x1", order).unwrap().statistic;
            ((spec - td).abs() / td, spec, td)
        })
        .collect();
    let worst = errors.iter().cloned().fold((0.0, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    outcome(
        worst.0 <= 0.05,
        format!(
            "max relative gap {:.3}% over 20 models (worst: spectral mean {:.5} vs time domain {:.5})",
            worst.0 * 100.0,
            worst.1,
            worst.2
        ),
    )
}

fn normalisation_invariance() -> Outcome {
    let grid = FrequencyGrid::default();
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + k);
        let n = 2 + (k as usize % 3);
        let m = loop {
            let coeffs = (0..2)
                .map(|_| DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.3..0.3)))
                .collect();
            let m = VarModel::new(coeffs, random_covariance(&mut rng, n), labels(n)).unwrap();
            if is_stable(&m) {
                break m;
            }
        };
        let x = rng.random_range(0..n);
        let y = (x + 1 + rng.random_range(0..n - 1)) % n;
        let t = remove_instantaneous(&m, x, y).unwrap();
        assert!(m.sigma()[(x, y)].abs() > 1e-3 && t.sigma()[(x, y)] == 0.0);
        let before = cpsd(&m, &grid).unwrap();
        let after = cpsd(&t, &grid).unwrap();
        for (b, a) in before.spectrum.iter().zip(&after.spectrum) {
            worst = worst.max((b[(x, x)].norm() - a[(x, x)].norm()).abs());
        }
    }
    outcome(worst <= 1e-8, format!("max |S_xx| change {worst:.2e} over 20 models x 512 frequencies"))
}

fn net(nodes: &[&str], edges: &[(&str, &str)]) -> CausalNetwork {
    CausalNetwork::new(
        nodes.iter().map(|l| NodeInfo::new(*l)).collect(),
        edges.iter().map(|(s, t)| CausalEdge::new(*s, *t)).collect(),
    )
    .unwrap()
}

/// Stationary distribution of the damped walk by direct linear solve.
fn exact_pagerank(g: &CausalNetwork, d: f64) -> Vec<f64> {
    let n = g.node_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let s = g.successors(j);
        for i in 0..n {
            m[(i, j)] = if s.is_empty() {
                1.0 / n as f64
            } else if s.contains(&i) {
                1.0 / s.len() as f64
            } else {
                0.0
            };
        }
    }
    let a = DMatrix::identity(n, n) - m * d;
    let x = a.lu().solve(&DVector::from_element(n, (1.0 - d) / n as f64)).unwrap();
    let total = x.sum();
    x.iter().map(|v| v / total).collect()
}

fn rank_correctness() -> Outcome {
    let opts = RankOptions::default();
    let mut notes = Vec::new();
    let mut pass = opts.damping == 0.85 && Config::default().damping == 0.85;

    let cycle = net(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("C", "A")]);
    let pr = pagerank(&cycle, &opts).unwrap();
    let cycle_err = pr.scores.values().map(|v| (v - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    pass &= cycle_err <= 1e-8;
    notes.push(format!("cycle err {cycle_err:.1e}"));

    let star = net(&["H", "a", "b", "c"], &[("a", "H"), ("b", "H"), ("c", "H")]);
    let pr = pagerank(&star, &opts).unwrap();
    let want = exact_pagerank(&star, 0.85);
    let star_err = ["H", "a", "b", "c"].iter().zip(&want).map(|(l, w)| (pr.scores[*l] - w).abs()).fold(0.0, f64::max);
    pass &= star_err <= 1e-8;
    notes.push(format!("star err {star_err:.1e} (hub {:.6})", pr.scores["H"]));

    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let mut sum_err = 0.0f64;
    let mut dual = true;
    for _ in 0..50 {
        let n = rng.random_range(2..12);
        let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let mut edges = Vec::new();
        for s in 0..n {
            for t in 0..n {
                if s != t && rng.random_bool(0.25) {
                    edges.push(CausalEdge::new(names[s].clone(), names[t].clone()));
                }
            }
        }
        let g = CausalNetwork::new(names.iter().map(NodeInfo::new).collect(), edges).unwrap();
        let p = pagerank(&g, &opts).unwrap();
        let c = cheirank(&g, &opts).unwrap();
        let r = pagerank(&g.reversed(), &opts).unwrap();
        dual &= c.scores.iter().zip(&r.scores).all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits());
        sum_err = sum_err.max((p.total() - 1.0).abs()).max((c.total() - 1.0).abs());
    }
    pass &= dual && sum_err <= 1e-8;
    notes.push(format!("cheirank==pagerank(reverse) bitwise: {dual}; max |sum-1| {sum_err:.1e}; damping {}", opts.damping));
    outcome(pass, notes.join("; "))
}

fn hub_detection() -> Outcome {
    let start = Instant::now();
    let groups = default_hub_groups();
    let config = Config::default();
    let results: Vec<(Vec<bool>, usize, usize)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let (panel, truth) = make_hub_panel(&groups, 5000, 7000 + seed).unwrap();
            let report = run_group_analysis(&panel, &config).unwrap();
            let hits = groups
                .iter()
                .map(|g| {
                    let r = report.groups.iter().find(|r| r.labels.contains(&g.hub)).unwrap();
                    r.analysis.top.first() == Some(&g.hub)
                })
                .collect();
            // one pooled network over all 15 series
            let all = all_pairs_conditional(&panel, 1, 0.05, Correction::Bonferroni).unwrap();
            let block = |l: &str| groups.iter().position(|g| g.members.iter().any(|m| m.label == l)).unwrap();
            let (mut within, mut cross) = (0, 0);
            for t in all.significant() {
                if block(&t.stat.source) == block(&t.stat.target) {
                    within += 1;
                } else {
                    cross += 1;
                }
            }
            debug_assert_eq!(truth.edges.len(), 12);
            (hits, within, cross)
        })
        .collect();
    let per_group: Vec<f64> = (0..groups.len())
        .map(|g| frac(results.iter().filter(|r| r.0[g]).count(), results.len()))
        .collect();
    let within: usize = results.iter().map(|r| r.1).sum();
    let cross: usize = results.iter().map(|r| r.2).sum();
    let ratio = cross as f64 / within as f64;
    outcome(
        per_group.iter().all(|&f| f >= 0.9) && ratio <= 0.05,
        format!(
            "top-1 CheiRank = planted hub: {}; cross/within edges {cross}/{within} = {:.2}% ({:.2?})",
            groups
                .iter()
                .zip(&per_group)
                .map(|(g, f)| format!("{} {:.0}%", g.name, f * 100.0))
                .collect::<Vec<_>>()
                .join(", "),
            ratio * 100.0,
            start.elapsed()
        ),
    )
}

fn rolling_evolution() -> Outcome {
    let start = Instant::now();
    let d = |y, m, dd| NaiveDate::from_ymd_opt(y, m, dd).unwrap();
    let members = &default_hub_groups()[0].members;
    let (before, after) = ("R1d", "SHIBOR3m");
    let config = Config::default();
    let expected = [
        (d(2008, 1, 1), d(2010, 12, 31)),
        (d(2010, 1, 1), d(2012, 12, 31)),
        (d(2012, 1, 1), d(2014, 12, 31)),
    ];
    let results: Vec<(bool, bool)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let panel = make_switching_hub_panel(members, before, after, d(2008, 1, 1), d(2011, 1, 1), d(2014, 12, 31), 8000 + seed).unwrap();
            let report = run_rolling(&panel, &config).unwrap();
            let spans: Vec<(NaiveDate, NaiveDate)> = report.windows.iter().map(|w| (w.start, w.end)).collect();
            let leaders = report.leaders();
            let flip = leaders.len() == 3 && leaders[0] == Some(before) && leaders[2] == Some(after);
            (spans == expected, flip)
        })
        .collect();
    let bounds = results.iter().all(|r| r.0);
    let flips = results.iter().filter(|r| r.1).count();
    outcome(
        bounds && frac(flips, 50) >= 0.8,
        format!(
            "windows 2008-01-01..2010-12-31, 2010-01-01..2012-12-31, 2012-01-01..2014-12-31: {bounds}; leader {before} -> {after} in {flips}/50 seeds ({:.2?})",
            start.elapsed()
        ),
    )
}

fn white_noise(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn stationarity_calibration() -> Outcome {
    let len = 1000;
    let max_lag = schwert_max_lag(len);
    let rows: Vec<[bool; 4]> = (0..1000u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
            let wn = white_noise(&mut rng, len);
            let rw: Vec<f64> = white_noise(&mut rng, len)
                .iter()
                .scan(0.0, |s, e| {
                    *s += e;
                    Some(*s)
                })
                .collect();
            [
                adf_test(&wn, max_lag).unwrap().pvalue < 0.05,
                adf_test(&rw, max_lag).unwrap().pvalue >= 0.05,
                kpss_test(&wn, KpssBandwidth::Auto).unwrap().statistic < 0.463,
                kpss_test(&rw, KpssBandwidth::Auto).unwrap().statistic > 0.463,
            ]
        })
        .collect();
    let rate = |k: usize| frac(rows.iter().filter(|r| r[k]).count(), rows.len());
    let r = [rate(0), rate(1), rate(2), rate(3)];
    outcome(
        r[0] >= 0.95 && r[1] >= 0.9 && r[2] >= 0.9 && r[3] >= 0.9,
        format!(
            "ADF rejects on white noise {:.1}%, keeps unit root on random walk {:.1}%; KPSS below 0.463 on white noise {:.1}%, above on random walk {:.1}%",
            r[0] * 100.0,
            r[1] * 100.0,
            r[2] * 100.0,
            r[3] * 100.0
        ),
    )
}

fn order3_model() -> VarModel {
    let a1 = DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, 0.0, 0.3, 0.1, 0.1, 0.0, 0.3]);
    let a2 = DMatrix::from_diagonal_element(3, 3, 0.1);
    let a3 = DMatrix::from_diagonal_element(3, 3, -0.3);
    VarModel::new(vec![a1, a2, a3], DMatrix::identity(3, 3), labels(3)).unwrap()
}

fn bic_recovery() -> Outcome {
    let m = order3_model();
    assert!(is_stable(&m));
    let chosen: Vec<usize> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let p = simulate_var(&m, 2000, 10_000 + seed, 1000).unwrap();
            select_order_bic(&p, 10).unwrap().chosen
        })
        .collect();
    let hits = chosen.iter().filter(|&&c| c == 3).count();
    outcome(frac(hits, 100) >= 0.9, format!("order 3 chosen in {hits}/100 seeds"))
}

fn sparse_var20(rng: &mut ChaCha8Rng) -> VarModel {
    loop {
        let mut a = DMatrix::from_diagonal_element(20, 20, 0.4);
        for i in 0..20 {
            for j in 0..20 {
                if i != j && rng.random_bool(0.1) {
                    a[(i, j)] = rng.random_range(-0.3..0.3);
                }
            }
        }
        let m = VarModel::new(vec![a], DMatrix::identity(20, 20), labels(20)).unwrap();
        if m.spectral_radius() < 0.95 {
            return m;
        }
    }
}

fn performance_and_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11_000);
    let model = sparse_var20(&mut rng);
    let panel: Panel = simulate_var(&model, 1500, 11_001, 1000).unwrap();
    let config = Config {
        max_order: 5,
        ..Config::default()
    };
    let start = Instant::now();
    let a = analyze_panel(&panel, &config).unwrap();
    let elapsed = start.elapsed();
    let perf_ok = elapsed < Duration::from_secs(60) && a.order <= 5;

    let (chain, _) = make_chain(3, 0.4).unwrap();
    let (chain4, _) = make_chain(4, 0.3).unwrap();
    let tri = VarModel::new(
        vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 0.0, 0.5])],
        DMatrix::identity(2, 2),
        vec!["X".into(), "Y".into()],
    )
    .unwrap();
    let fixtures: Vec<(&VarModel, &str, &str, Vec<&str>)> = vec![
        (&tri, "X", "Y", vec![]),
        (&chain, "B", "A", vec![]),
        (&chain, "B", "A", vec!["C"]),
        (&chain, "C", "B", vec![]),
        (&chain, "C", "B", vec!["A"]),
        (&chain4, "B", "A", vec!["C", "D"]),
        (&chain4, "C", "B", vec!["A", "D"]),
        (&chain4, "D", "C", vec!["A", "B"]),
        (&chain4, "D", "C", vec![]),
        (&chain4, "C", "A", vec![]),
    ];
    let gaps: Vec<f64> = fixtures
        .par_iter()
        .enumerate()
        .map(|(k, (m, x, y, cond))| {
            let seed = 12_000 + k as u64;
            let oracle = oracle_gc(m, x, y, cond, seed).unwrap();
            let sample = simulate_var(m, ORACLE_LEN, seed, 1000).unwrap();
            let est = conditional_gc(&sample, x, y, cond, m.order()).unwrap().statistic;
            (oracle - est).abs() / oracle
        })
        .collect();
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    outcome(
        perf_ok && worst <= 0.02,
        format!(
            "n=20 T=1500 pipeline {elapsed:.2?} (order {}, {} edges, {} spectra); oracle vs estimator max gap {:.2e} over {} fixtures",
            a.order,
            a.network.edge_count(),
            a.profiles.len(),
            worst,
            gaps.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("spurious-pattern elimination", spurious_pattern),
        ("network recovery", network_recovery),
        ("null calibration", null_calibration),
        ("spectral/time consistency", spectral_time_consistency),
        ("instantaneous-normalization invariance", normalisation_invariance),
        ("rank correctness", rank_correctness),
        ("hub benchmark detection", hub_detection),
        ("rolling evolution", rolling_evolution),
        ("stationarity-test calibration", stationarity_calibration),
        ("BIC order recovery", bic_recovery),
        ("performance envelope and oracle cross-check", performance_and_oracle),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
