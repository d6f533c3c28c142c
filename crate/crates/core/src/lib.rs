//! Causal networks of interest-rate panels.
//!
//! Conditional Granger causality (time and frequency domain) over a
//! multivariate panel, assembled into a directed network and ranked with
//! PageRank / CheiRank to find benchmark series.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod gcfreq;
pub mod gctime;
pub mod graph;
mod linalg;
pub mod panel;
pub mod pipeline;
pub mod rank;
pub mod synth;
pub mod var;

pub use error::{Error, Result};
pub use gcfreq::{Band, BandEdges, FrequencyGrid, SpectralProfile};
pub use gctime::{Correction, EdgeList, EdgeTest, GcStat};
pub use graph::{CausalEdge, CausalNetwork, ExportFormat, NodeInfo};
pub use panel::{Panel, SeriesMeta, StationarityReport};
pub use pipeline::{Analysis, Config, GroupSpec, Manifest, WindowSpec};
pub use rank::{RankOptions, RankScores};
pub use var::{OrderSelection, VarModel};
