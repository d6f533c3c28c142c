//! Time-domain Granger causality.
//!
//! For a target `x` and source `y` (optionally conditioned on `z`), a full
//! regression of `x` on lags of `x`, `y`, `z` is compared with a reduced one
//! omitting the lags of `y`, both over the same sample:
//! `F = ln(rss_reduced / rss_full)`. Under the null `nobs * F ~ chi2(p)`.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::var::{check_degrees_of_freedom, LagDesign};

/// Statistics this far below zero are rounding noise and clamp to zero.
const NEGATIVE_TOL: f64 = 1e-12;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcStat {
    pub source: String,
    pub target: String,
    pub conditioning: Vec<String>,
    pub statistic: f64,
    pub pvalue: f64,
    pub order: usize,
    pub nobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    #[default]
    None,
    Bonferroni,
    /// Benjamini-Hochberg false discovery rate.
    Bh,
}

impl FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "bonferroni" => Ok(Self::Bonferroni),
            "bh" | "fdr" => Ok(Self::Bh),
            other => Err(Error::InvalidArgument(format!("unknown correction `{other}`"))),
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Bonferroni => "bonferroni",
            Self::Bh => "bh",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTest {
    #[serde(flatten)]
    pub stat: GcStat,
    pub adjusted_pvalue: f64,
    pub significant: bool,
}

/// Every tested ordered pair with its significance flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeList {
    pub alpha: f64,
    pub correction: Correction,
    pub order: usize,
    /// Ordered by source label, then target label.
    pub tests: Vec<EdgeTest>,
}

impl EdgeList {
    pub fn significant(&self) -> impl Iterator<Item = &EdgeTest> {
        self.tests.iter().filter(|t| t.significant)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["source", "target", "statistic", "pvalue", "significant", "adjusted_pvalue"])?;
        for t in &self.tests {
            w.write_record([
                t.stat.source.clone(),
                t.stat.target.clone(),
                format!("{:?}", t.stat.statistic),
                format!("{:?}", t.stat.pvalue),
                t.significant.to_string(),
                format!("{:?}", t.adjusted_pvalue),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Upper tail of `chi2(order)` at `nobs * statistic`.
pub fn significance(statistic: f64, nobs: usize, order: usize) -> f64 {
    if !(statistic > 0.0) {
        return 1.0;
    }
    let chi2 = ChiSquared::new(order as f64).expect("order >= 1");
    chi2.sf(nobs as f64 * statistic).clamp(0.0, 1.0)
}

fn log_ratio(rss_reduced: f64, rss_full: f64) -> Result<f64> {
    if !(rss_full > 0.0) {
        return Err(Error::Degenerate("full model fits the target exactly".into()));
    }
    let f = (rss_reduced / rss_full).ln();
    if f >= 0.0 {
        Ok(f)
    } else if f >= -NEGATIVE_TOL {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "reduced model fits better than the full model (F = {f:.3e})"
        )))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")))
    }
}

/// Unconditional causality `y -> x`.
pub fn pairwise_gc(panel: &Panel, x: &str, y: &str, order: usize) -> Result<GcStat> {
    conditional_gc::<&str>(panel, x, y, &[], order)
}

/// Causality `y -> x` given the series in `cond`.
pub fn conditional_gc<S: AsRef<str>>(panel: &Panel, x: &str, y: &str, cond: &[S], order: usize) -> Result<GcStat> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be >= 1".into()));
    }
    if x == y {
        return Err(Error::InvalidArgument(format!("source and target are both `{x}`")));
    }
    let mut seen: HashSet<&str> = [x, y].into_iter().collect();
    for c in cond {
        let c = c.as_ref();
        if !seen.insert(c) {
            return Err(Error::InvalidArgument(format!(
                "conditioning set overlaps source/target or repeats `{c}`"
            )));
        }
    }
    let mut labels: Vec<&str> = vec![x, y];
    labels.extend(cond.iter().map(|c| c.as_ref()));
    let sub = panel.select(&labels)?;
    sub.require_complete()?;
    check_degrees_of_freedom(sub.len(), sub.width(), order)?;

    let design = LagDesign::from_panel(&sub, order, order);
    let all: Vec<usize> = (0..sub.width()).collect();
    let without_y: Vec<usize> = all.iter().copied().filter(|&i| i != 1).collect();
    let resp = design.resp_col(0);
    let rss_full = design.subset(design.lag_cols(&all, order), sub.labels())?.rss(resp);
    let rss_reduced = design.subset(design.lag_cols(&without_y, order), sub.labels())?.rss(resp);
    let statistic = log_ratio(rss_reduced, rss_full)?;
    let nobs = design.nobs();
    Ok(GcStat {
        source: y.to_string(),
        target: x.to_string(),
        conditioning: cond.iter().map(|c| c.as_ref().to_string()).collect(),
        statistic,
        pvalue: significance(statistic, nobs, order),
        order,
        nobs,
    })
}

/// Adjusted p-values in input order.
pub fn adjust_pvalues(pvalues: &[f64], correction: Correction) -> Vec<f64> {
    let m = pvalues.len();
    match correction {
        Correction::None => pvalues.to_vec(),
        Correction::Bonferroni => pvalues.iter().map(|p| (p * m as f64).min(1.0)).collect(),
        Correction::Bh => {
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
            let mut out = vec![0.0; m];
            let mut running = 1.0_f64;
            for (rank, &i) in idx.iter().enumerate().rev() {
                running = running.min(pvalues[i] * m as f64 / (rank + 1) as f64);
                out[i] = running.min(1.0);
            }
            out
        }
    }
}

/// Conditional causality for every ordered pair, conditioning on all other
/// series of the panel.
pub fn all_pairs_conditional(panel: &Panel, order: usize, alpha: f64, correction: Correction) -> Result<EdgeList> {
    check_alpha(alpha)?;
    if order == 0 {
        return Err(Error::InvalidArgument("order must be >= 1".into()));
    }
    let n = panel.width();
    if n < 2 {
        return Ok(EdgeList {
            alpha,
            correction,
            order,
            tests: Vec::new(),
        });
    }
    panel.require_complete()?;
    check_degrees_of_freedom(panel.len(), n, order)?;

    let labels = panel.labels();
    let design = LagDesign::from_panel(panel, order, order);
    let all: Vec<usize> = (0..n).collect();
    let full = design.subset(design.lag_cols(&all, order), labels)?;
    let rss_full: Vec<f64> = all.iter().map(|&x| full.rss(design.resp_col(x))).collect();
    let nobs = design.nobs();

    // the reduced regressor set depends only on the source
    let per_source: Vec<Vec<GcStat>> = all
        .par_iter()
        .map(|&y| {
            let others: Vec<usize> = all.iter().copied().filter(|&i| i != y).collect();
            let reduced = design.subset(design.lag_cols(&others, order), labels)?;
            others
                .iter()
                .map(|&x| {
                    let statistic = log_ratio(reduced.rss(design.resp_col(x)), rss_full[x])?;
                    Ok(GcStat {
                        source: labels[y].clone(),
                        target: labels[x].clone(),
                        conditioning: others.iter().filter(|&&i| i != x).map(|&i| labels[i].clone()).collect(),
                        statistic,
                        pvalue: significance(statistic, nobs, order),
                        order,
                        nobs,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut stats: Vec<GcStat> = per_source.into_iter().flatten().collect();
    stats.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
    let pvalues: Vec<f64> = stats.iter().map(|s| s.pvalue).collect();
    let adjusted = adjust_pvalues(&pvalues, correction);
    let tests = stats
        .into_iter()
        .zip(adjusted)
        .map(|(stat, adjusted_pvalue)| EdgeTest {
            stat,
            adjusted_pvalue,
            significant: adjusted_pvalue < alpha,
        })
        .collect();
    Ok(EdgeList {
        alpha,
        correction,
        order,
        tests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use crate::var::simulate_var;
    use proptest::prelude::*;

    fn chain_panel(t: usize, seed: u64) -> Panel {
        let (m, _) = synth::make_chain(3, 0.4).unwrap();
        simulate_var(&m, t, seed, 1000).unwrap()
    }

    #[test]
    fn significance_examples() {
        assert_eq!(significance(0.0, 1000, 1), 1.0);
        assert!((significance(3.841 / 1000.0, 1000, 1) - 0.05).abs() < 1e-3);
        // chi2(3) 99th percentile is 11.345
        assert!((significance(11.345 / 500.0, 500, 3) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn empty_conditioning_matches_pairwise_bitwise() {
        let p = chain_panel(2000, 1);
        let a = pairwise_gc(&p, "B", "A", 2).unwrap();
        let b = conditional_gc::<String>(&p, "B", "A", &[], 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
    }

    #[test]
    fn spurious_chain_link_vanishes_when_conditioned() {
        let p = chain_panel(5000, 3);
        let pair = pairwise_gc(&p, "C", "A", 1).unwrap();
        let cond = conditional_gc(&p, "C", "A", &["B"], 1).unwrap();
        assert!(pair.pvalue < 0.01, "{pair:?}");
        assert!(cond.statistic < pair.statistic / 10.0);
    }

    #[test]
    fn overlap_is_rejected() {
        let p = chain_panel(500, 1);
        assert!(matches!(conditional_gc(&p, "C", "A", &["A"], 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(conditional_gc(&p, "C", "A", &["C"], 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(pairwise_gc(&p, "C", "C", 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(pairwise_gc(&p, "C", "Q", 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn insufficient_sample() {
        let p = chain_panel(10, 1);
        assert!(matches!(
            conditional_gc(&p, "C", "A", &["B"], 3),
            Err(Error::DegreesOfFreedom { .. })
        ));
    }

    #[test]
    fn triangular_null_direction_vanishes() {
        let (m, _) = synth::make_chain(2, 0.4).unwrap();
        let p = simulate_var(&m, 100_000, 9, 1000).unwrap();
        // A drives B; nothing flows back
        assert!(pairwise_gc(&p, "A", "B", 1).unwrap().statistic < 1e-4);
        assert!(pairwise_gc(&p, "B", "A", 1).unwrap().statistic > 0.05);
    }

    #[test]
    fn single_series_has_no_pairs() {
        let p = chain_panel(200, 1).select(&["A"]).unwrap();
        assert!(all_pairs_conditional(&p, 1, 0.05, Correction::None).unwrap().tests.is_empty());
    }

    #[test]
    fn all_pairs_matches_individual_tests() {
        let p = chain_panel(1500, 4);
        let edges = all_pairs_conditional(&p, 2, 0.01, Correction::None).unwrap();
        assert_eq!(edges.tests.len(), 6);
        for t in &edges.tests {
            let direct = conditional_gc(&p, &t.stat.target, &t.stat.source, &t.stat.conditioning, 2).unwrap();
            assert!((direct.statistic - t.stat.statistic).abs() < 1e-12);
        }
        let sig: Vec<(&str, &str)> = edges
            .significant()
            .map(|t| (t.stat.source.as_str(), t.stat.target.as_str()))
            .collect();
        assert_eq!(sig, [("A", "B"), ("B", "C")]);
        let order: Vec<_> = edges.tests.iter().map(|t| (t.stat.source.clone(), t.stat.target.clone())).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
    }

    #[test]
    fn corrections() {
        let p = [0.01, 0.04, 0.03, 0.5];
        assert_eq!(adjust_pvalues(&p, Correction::None), p);
        assert_eq!(adjust_pvalues(&p, Correction::Bonferroni), [0.04, 0.16, 0.12, 1.0]);
        let bh = adjust_pvalues(&p, Correction::Bh);
        let expected = [0.04, 0.04 * 4.0 / 3.0, 0.04 * 4.0 / 3.0, 0.5];
        for (a, b) in bh.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{bh:?}");
        }
    }

    #[test]
    fn parse_correction() {
        assert_eq!("BH".parse::<Correction>().unwrap(), Correction::Bh);
        assert!("holm".parse::<Correction>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn affine_rescaling_invariance(scale in prop_oneof![-50.0..-0.02f64, 0.02..50.0f64], shift in -1e3..1e3f64, seed in 0u64..1000) {
            let p = chain_panel(800, seed);
            let base = conditional_gc(&p, "C", "A", &["B"], 2).unwrap();
            let cols: Vec<Vec<f64>> = p
                .columns()
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { c.iter().map(|v| scale * v + shift).collect() } else { c.clone() })
                .collect();
            let q = Panel::new(p.labels().to_vec(), p.dates().to_vec(), cols).unwrap();
            let moved = conditional_gc(&q, "C", "A", &["B"], 2).unwrap();
            prop_assert!((base.statistic - moved.statistic).abs() < 1e-8);
            prop_assert!(moved.statistic >= 0.0);
        }

        #[test]
        fn label_permutation_invariance(seed in 0u64..1000, perm in Just([2usize, 0, 1]).prop_shuffle()) {
            let p = chain_panel(600, seed);
            let labels: Vec<&str> = perm.iter().map(|&i| p.labels()[i].as_str()).collect();
            let q = p.select(&labels).unwrap();
            let a = all_pairs_conditional(&p, 1, 0.05, Correction::None).unwrap();
            let b = all_pairs_conditional(&q, 1, 0.05, Correction::None).unwrap();
            for (x, y) in a.tests.iter().zip(&b.tests) {
                prop_assert_eq!(&x.stat.source, &y.stat.source);
                prop_assert_eq!(&x.stat.target, &y.stat.target);
                prop_assert!((x.stat.statistic - y.stat.statistic).abs() < 1e-10);
                prop_assert_eq!(x.significant, y.significant);
            }
        }
    }
}
