//! Directed causal networks assembled from significant edges, and their export.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcfreq::{Band, SpectralProfile};
use crate::gctime::EdgeList;
use crate::panel::SeriesMeta;

/// DOT node width (inches) for a node without a score.
pub const NODE_BASE_WIDTH: f64 = 0.3;
/// Added DOT node width per unit of attached score.
pub const NODE_SCORE_SCALE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    /// Ranking score used for node sizing, usually CheiRank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl NodeInfo {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            category: None,
            term: None,
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEdge {
    pub source: String,
    pub target: String,
    pub statistic: f64,
    pub pvalue: f64,
    pub adjusted_pvalue: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<Band>,
}

impl CausalEdge {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            statistic: 0.0,
            pvalue: 0.0,
            adjusted_pvalue: 0.0,
            peak_lambda: None,
            band: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    nodes: Vec<NodeInfo>,
    edges: Vec<CausalEdge>,
}

/// Directed network; nodes keep insertion order, edges are sorted by
/// `(source, target)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct CausalNetwork {
    nodes: Vec<NodeInfo>,
    edges: Vec<CausalEdge>,
    index: HashMap<String, usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl TryFrom<NetworkRepr> for CausalNetwork {
    type Error = Error;

    fn try_from(r: NetworkRepr) -> Result<Self> {
        CausalNetwork::new(r.nodes, r.edges)
    }
}

impl From<CausalNetwork> for NetworkRepr {
    fn from(n: CausalNetwork) -> Self {
        NetworkRepr {
            nodes: n.nodes,
            edges: n.edges,
        }
    }
}

impl CausalNetwork {
    pub fn new(nodes: Vec<NodeInfo>, mut edges: Vec<CausalEdge>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.label.clone(), i).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate node `{}`", n.label)));
            }
        }
        edges.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        for (k, e) in edges.iter().enumerate() {
            if e.source == e.target {
                return Err(Error::InvalidNetwork(format!("self-loop on `{}`", e.source)));
            }
            if k > 0 && edges[k - 1].source == e.source && edges[k - 1].target == e.target {
                return Err(Error::InvalidNetwork(format!("duplicate edge `{}` -> `{}`", e.source, e.target)));
            }
            let s = *index.get(&e.source).ok_or_else(|| Error::UnknownNode(e.source.clone()))?;
            let t = *index.get(&e.target).ok_or_else(|| Error::UnknownNode(e.target.clone()))?;
            out_adj[s].push(t);
            in_adj[t].push(s);
        }
        Ok(Self {
            nodes,
            edges,
            index,
            out_adj,
            in_adj,
        })
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn edges(&self) -> &[CausalEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    /// Node indices reached by out-edges of node `i`.
    pub fn successors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    /// Node indices with an edge into node `i`.
    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    pub fn has_edge(&self, source: &str, target: &str) -> bool {
        self.edge(source, target).is_some()
    }

    pub fn edge(&self, source: &str, target: &str) -> Option<&CausalEdge> {
        self.edges
            .binary_search_by(|e| (e.source.as_str(), e.target.as_str()).cmp(&(source, target)))
            .ok()
            .map(|k| &self.edges[k])
    }

    /// Sorted `(source, target)` pairs.
    pub fn edge_pairs(&self) -> Vec<(String, String)> {
        self.edges.iter().map(|e| (e.source.clone(), e.target.clone())).collect()
    }

    /// Same nodes with every edge direction swapped.
    pub fn reversed(&self) -> CausalNetwork {
        let edges = self
            .edges
            .iter()
            .map(|e| CausalEdge {
                source: e.target.clone(),
                target: e.source.clone(),
                ..e.clone()
            })
            .collect();
        CausalNetwork::new(self.nodes.clone(), edges).expect("reversal preserves validity")
    }

    pub fn with_meta(mut self, meta: &BTreeMap<String, SeriesMeta>) -> Self {
        for n in &mut self.nodes {
            if let Some(m) = meta.get(&n.label) {
                n.category = m.category.clone();
                n.term = m.term.clone();
            }
        }
        self
    }

    /// Attaches per-node scores (e.g. CheiRank) for sizing in exports.
    pub fn with_scores(mut self, scores: &BTreeMap<String, f64>) -> Self {
        for n in &mut self.nodes {
            n.score = scores.get(&n.label).copied();
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Network of the significant tests in `edges` over `nodes`.
pub fn build_network<S: AsRef<str>>(edges: &EdgeList, nodes: &[S]) -> Result<CausalNetwork> {
    let nodes: Vec<NodeInfo> = nodes.iter().map(|l| NodeInfo::new(l.as_ref())).collect();
    let kept = edges
        .significant()
        .map(|t| CausalEdge {
            source: t.stat.source.clone(),
            target: t.stat.target.clone(),
            statistic: t.stat.statistic,
            pvalue: t.stat.pvalue,
            adjusted_pvalue: t.adjusted_pvalue,
            peak_lambda: None,
            band: None,
        })
        .collect();
    CausalNetwork::new(nodes, kept)
}

/// Tags each edge covered by a profile with its peak frequency and band.
pub fn annotate_frequency(network: &CausalNetwork, profiles: &[SpectralProfile]) -> Result<CausalNetwork> {
    let mut out = network.clone();
    for p in profiles {
        let k = out
            .edges
            .binary_search_by(|e| (e.source.as_str(), e.target.as_str()).cmp(&(p.source.as_str(), p.target.as_str())))
            .map_err(|_| Error::InvalidArgument(format!("profile for non-edge `{}` -> `{}`", p.source, p.target)))?;
        out.edges[k].peak_lambda = Some(p.peak_lambda);
        out.edges[k].band = Some(p.band);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub label: String,
    pub out_degree: usize,
    pub in_degree: usize,
}

/// Out/in degree per node, by out-degree descending then label.
pub fn degree_table(network: &CausalNetwork) -> Vec<DegreeRow> {
    let mut rows: Vec<DegreeRow> = network
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| DegreeRow {
            label: n.label.clone(),
            out_degree: network.out_adj[i].len(),
            in_degree: network.in_adj[i].len(),
        })
        .collect();
    rows.sort_by(|a, b| b.out_degree.cmp(&a.out_degree).then_with(|| a.label.cmp(&b.label)));
    rows
}

pub fn write_degree_csv<W: Write>(rows: &[DegreeRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Dot,
    Graphml,
    Json,
    Csv,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Dot => "dot",
            ExportFormat::Graphml => "graphml",
            ExportFormat::Json => "json",
            ExportFormat::Csv => "csv",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(ExportFormat::Dot),
            "graphml" => Ok(ExportFormat::Graphml),
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            _ => Err(Error::InvalidArgument(format!("unknown export format `{s}`"))),
        }
    }
}

/// Edge colour in DOT output.
pub fn band_color(band: Option<Band>) -> &'static str {
    match band {
        Some(Band::High) => "blue",
        Some(Band::Medium) => "orange",
        Some(Band::Low) => "red",
        None => "gray",
    }
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn to_dot(network: &CausalNetwork) -> String {
    let mut s = String::from("digraph causal {\n  node [shape=circle, fixedsize=true];\n");
    for n in &network.nodes {
        let width = NODE_BASE_WIDTH + NODE_SCORE_SCALE * n.score.unwrap_or(0.0);
        let _ = write!(s, "  {} [width={width:.4}", dot_quote(&n.label));
        if let Some(c) = &n.category {
            let _ = write!(s, ", category={}", dot_quote(c));
        }
        if let Some(t) = &n.term {
            let _ = write!(s, ", term={}", dot_quote(t));
        }
        if let Some(v) = n.score {
            let _ = write!(s, ", score={v}");
        }
        s.push_str("];\n");
    }
    for e in &network.edges {
        let _ = write!(
            s,
            "  {} -> {} [color={}, statistic={}",
            dot_quote(&e.source),
            dot_quote(&e.target),
            band_color(e.band),
            e.statistic
        );
        if let Some(b) = e.band {
            let _ = write!(s, ", band={b}");
        }
        if let Some(l) = e.peak_lambda {
            let _ = write!(s, ", peak_lambda={l}");
        }
        s.push_str("];\n");
    }
    s.push_str("}\n");
    s
}

pub fn to_graphml(network: &CausalNetwork) -> String {
    let mut s = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n\
         \x20 <key id=\"category\" for=\"node\" attr.name=\"category\" attr.type=\"string\"/>\n\
         \x20 <key id=\"term\" for=\"node\" attr.name=\"term\" attr.type=\"string\"/>\n\
         \x20 <key id=\"score\" for=\"node\" attr.name=\"score\" attr.type=\"double\"/>\n\
         \x20 <key id=\"statistic\" for=\"edge\" attr.name=\"statistic\" attr.type=\"double\"/>\n\
         \x20 <key id=\"pvalue\" for=\"edge\" attr.name=\"pvalue\" attr.type=\"double\"/>\n\
         \x20 <key id=\"peak_lambda\" for=\"edge\" attr.name=\"peak_lambda\" attr.type=\"double\"/>\n\
         \x20 <key id=\"band\" for=\"edge\" attr.name=\"band\" attr.type=\"string\"/>\n\
         \x20 <graph id=\"causal\" edgedefault=\"directed\">\n",
    );
    for n in &network.nodes {
        let _ = writeln!(s, "    <node id=\"{}\">", xml_escape(&n.label));
        if let Some(c) = &n.category {
            let _ = writeln!(s, "      <data key=\"category\">{}</data>", xml_escape(c));
        }
        if let Some(t) = &n.term {
            let _ = writeln!(s, "      <data key=\"term\">{}</data>", xml_escape(t));
        }
        if let Some(v) = n.score {
            let _ = writeln!(s, "      <data key=\"score\">{v}</data>");
        }
        s.push_str("    </node>\n");
    }
    for e in &network.edges {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\">",
            xml_escape(&e.source),
            xml_escape(&e.target)
        );
        let _ = writeln!(s, "      <data key=\"statistic\">{}</data>", e.statistic);
        let _ = writeln!(s, "      <data key=\"pvalue\">{}</data>", e.pvalue);
        if let Some(l) = e.peak_lambda {
            let _ = writeln!(s, "      <data key=\"peak_lambda\">{l}</data>");
        }
        if let Some(b) = e.band {
            let _ = writeln!(s, "      <data key=\"band\">{b}</data>");
        }
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

/// Edge list with the columns of [`EdgeList::write_csv`] plus
/// `peak_lambda` and `band`.
pub fn write_edges_csv<W: Write>(network: &CausalNetwork, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "source",
        "target",
        "statistic",
        "pvalue",
        "significant",
        "adjusted_pvalue",
        "peak_lambda",
        "band",
    ])?;
    for e in &network.edges {
        w.write_record([
            e.source.clone(),
            e.target.clone(),
            format!("{:?}", e.statistic),
            format!("{:?}", e.pvalue),
            "true".to_string(),
            format!("{:?}", e.adjusted_pvalue),
            e.peak_lambda.map(|l| format!("{l:?}")).unwrap_or_default(),
            e.band.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_network<W: Write>(network: &CausalNetwork, format: ExportFormat, mut writer: W) -> Result<()> {
    match format {
        ExportFormat::Dot => writer.write_all(to_dot(network).as_bytes())?,
        ExportFormat::Graphml => writer.write_all(to_graphml(network).as_bytes())?,
        ExportFormat::Json => {
            writer.write_all(network.to_json()?.as_bytes())?;
            writer.write_all(b"\n")?;
        }
        ExportFormat::Csv => write_edges_csv(network, &mut writer)?,
    }
    writer.flush()?;
    Ok(())
}

pub fn export(network: &CausalNetwork, format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_network(network, format, BufWriter::new(file))
}
