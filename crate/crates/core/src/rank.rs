//! PageRank and CheiRank by power iteration.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CausalNetwork;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Nodes per sweep above which the update is split across threads.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self {
            damping: DEFAULT_DAMPING,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankScores {
    pub scores: BTreeMap<String, f64>,
    pub damping: f64,
    pub iterations: usize,
    /// L1 change of the final sweep.
    pub residual: f64,
}

impl RankScores {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.scores.get(label).copied()
    }

    pub fn total(&self) -> f64 {
        self.scores.values().sum()
    }
}

/// PageRank with uniform redistribution of dangling-node mass.
///
/// Each sweep computes the whole new vector from the previous one, so the
/// result does not depend on how the sweep is split across threads.
pub fn pagerank(network: &CausalNetwork, opts: &RankOptions) -> Result<RankScores> {
    let n = network.node_count();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot rank an empty network".into()));
    }
    if !(opts.damping > 0.0 && opts.damping < 1.0) {
        return Err(Error::InvalidArgument(format!("damping must be in (0, 1), got {}", opts.damping)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let d = opts.damping;
    let nf = n as f64;
    let out_deg: Vec<usize> = (0..n).map(|i| network.successors(i).len()).collect();
    let mut pr = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let dangling: f64 = (0..n).filter(|&i| out_deg[i] == 0).map(|i| pr[i]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        let update = |(i, v): (usize, &mut f64)| {
            let inflow: f64 = network.predecessors(i).iter().map(|&j| pr[j] / out_deg[j] as f64).sum();
            *v = base + d * inflow;
        };
        if n >= PAR_THRESHOLD {
            next.par_iter_mut().enumerate().for_each(update);
        } else {
            next.iter_mut().enumerate().for_each(update);
        }
        let total: f64 = next.iter().sum();
        for v in next.iter_mut() {
            *v /= total;
        }
        residual = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pr, &mut next);
        if residual < opts.tol {
            let scores = network.labels().map(String::from).zip(pr).collect();
            return Ok(RankScores {
                scores,
                damping: d,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// PageRank of the network with every edge reversed.
pub fn cheirank(network: &CausalNetwork, opts: &RankOptions) -> Result<RankScores> {
    pagerank(&network.reversed(), opts)
}

/// The `k` highest-scoring labels, ties broken alphabetically.
pub fn top_k(scores: &RankScores, k: usize) -> Vec<String> {
    let mut v: Vec<(&String, f64)> = scores.scores.iter().map(|(l, s)| (l, *s)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().take(k).map(|(l, _)| l.clone()).collect()
}

/// `label,pagerank,cheirank` sorted by CheiRank descending then label.
pub fn write_scores_csv<W: Write>(pagerank: &RankScores, cheirank: &RankScores, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["label", "pagerank", "cheirank"])?;
    for label in top_k(cheirank, cheirank.scores.len()) {
        let pr = pagerank.get(&label).ok_or_else(|| Error::UnknownNode(label.clone()))?;
        w.write_record([label.clone(), pr.to_string(), cheirank.scores[&label].to_string()])?;
    }
    w.flush()?;
    Ok(())
}
