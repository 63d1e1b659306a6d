//! Multi-relation graph over bids and its symmetric-normalized adjacencies.
//!
//! Every bid is a node. Four relation kinds connect bids:
//!
//! * `Tender`, `Location`, `Site`: all bids sharing the identifier form a clique.
//! * `Competitor`: each bid links only to the previous and next bid of the same
//!   company, ordered by date and then row index (row index alone when the
//!   dataset has no dates).
//!
//! For each relation `r` the model consumes
//! `Ã⁽ʳ⁾ = D⁽ʳ⁾^(-1/2) (Â⁽ʳ⁾ + I) D⁽ʳ⁾^(-1/2)` where `D⁽ʳ⁾` holds the row sums of
//! `Â⁽ʳ⁾ + I`. In [`SelfLoopMode::Shared`] the identity is left out of every
//! relation and added once as a separate self relation instead.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataio::BidTable;
use crate::error::{Error, Result};
use crate::tensor::{CsrMatrix, Matrix};

mod stats;

pub use stats::{graph_stats, GraphStats, RelationStats};

/// Edge relation between bids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationKind {
    Tender,
    Competitor,
    Location,
    Site,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] = [
        RelationKind::Tender,
        RelationKind::Competitor,
        RelationKind::Location,
        RelationKind::Site,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::Tender => "tender",
            RelationKind::Competitor => "competitor",
            RelationKind::Location => "location",
            RelationKind::Site => "site",
        }
    }

    /// Relations whose identifiers are present in `table`.
    pub fn available_in(table: &BidTable) -> Vec<RelationKind> {
        RelationKind::ALL
            .into_iter()
            .filter(|k| match k {
                RelationKind::Tender | RelationKind::Competitor => true,
                RelationKind::Location => table.has_locations(),
                RelationKind::Site => table.has_sites(),
            })
            .collect()
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tender" => Ok(RelationKind::Tender),
            "competitor" | "company" => Ok(RelationKind::Competitor),
            "location" => Ok(RelationKind::Location),
            "site" => Ok(RelationKind::Site),
            other => Err(Error::Config(format!("unknown relation '{other}'"))),
        }
    }
}

/// Parses a comma-separated relation list such as `tender,competitor`.
pub fn parse_relations(list: &str) -> Result<Vec<RelationKind>> {
    let mut out: Vec<RelationKind> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// Where node self-connections enter the aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfLoopMode {
    /// `Ā⁽ʳ⁾ = Â⁽ʳ⁾ + I` for every relation.
    #[default]
    PerRelation,
    /// No identity inside relations; one extra identity relation.
    Shared,
}

impl SelfLoopMode {
    pub fn name(self) -> &'static str {
        match self {
            SelfLoopMode::PerRelation => "per-relation",
            SelfLoopMode::Shared => "shared",
        }
    }
}

impl FromStr for SelfLoopMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-relation" => Ok(SelfLoopMode::PerRelation),
            "shared" => Ok(SelfLoopMode::Shared),
            other => Err(Error::Config(format!("unknown self-loop mode '{other}'"))),
        }
    }
}

/// One relation: its undirected edges and normalized adjacency.
#[derive(Debug, Clone)]
pub struct Relation {
    pub kind: RelationKind,
    /// Undirected pairs `(i, j)` with `i < j`, sorted, without duplicates.
    pub edges: Vec<(usize, usize)>,
    /// Diagonal of the degree matrix of the (possibly self-looped) adjacency.
    pub degrees: Vec<f64>,
    pub normalized: Arc<CsrMatrix>,
}

impl Relation {
    /// Neighbor lists built from the edge list (no self entries).
    pub fn neighbors(&self, node_count: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); node_count];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// `Â + I` as a sparse matrix.
    pub fn self_looped(&self, node_count: usize) -> CsrMatrix {
        let mut t: Vec<(usize, usize, f64)> = (0..node_count).map(|i| (i, i, 1.0)).collect();
        for &(i, j) in &self.edges {
            t.push((i, j, 1.0));
            t.push((j, i, 1.0));
        }
        CsrMatrix::from_triplets(node_count, node_count, t)
    }
}

/// Graph over `node_count` bids with one entry per active relation.
#[derive(Debug, Clone)]
pub struct RelationalGraph {
    node_count: usize,
    self_loops: SelfLoopMode,
    relations: BTreeMap<RelationKind, Relation>,
    identity: Arc<CsrMatrix>,
}

impl RelationalGraph {
    /// Assembles a graph from raw edge lists. Pairs are canonicalized to
    /// `i < j`; self pairs and duplicates are dropped.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (RelationKind, Vec<(usize, usize)>)>,
        self_loops: SelfLoopMode,
    ) -> Result<Self> {
        let mut relations = BTreeMap::new();
        for (kind, raw) in edges {
            let mut e: Vec<(usize, usize)> = raw
                .into_iter()
                .filter(|(i, j)| i != j)
                .map(|(i, j)| (i.min(j), i.max(j)))
                .collect();
            if let Some(&(_, j)) = e.iter().find(|(_, j)| *j >= node_count) {
                return Err(Error::Contract(format!("edge endpoint {j} outside {node_count} nodes")));
            }
            e.sort_unstable();
            e.dedup();
            let (normalized, degrees) = normalize_relation(node_count, &e, self_loops == SelfLoopMode::PerRelation);
            relations.insert(
                kind,
                Relation {
                    kind,
                    edges: e,
                    degrees,
                    normalized: Arc::new(normalized),
                },
            );
        }
        Ok(RelationalGraph {
            node_count,
            self_loops,
            relations,
            identity: Arc::new(CsrMatrix::identity(node_count)),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn self_loop_mode(&self) -> SelfLoopMode {
        self.self_loops
    }

    pub fn kinds(&self) -> Vec<RelationKind> {
        self.relations.keys().copied().collect()
    }

    pub fn relation(&self, kind: RelationKind) -> Option<&Relation> {
        self.relations.get(&kind)
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    /// The identity adjacency used for the shared self relation.
    pub fn identity(&self) -> &Arc<CsrMatrix> {
        &self.identity
    }

    /// Keeps only edges whose endpoints are both in `keep`; dropped nodes stay
    /// as isolated nodes so row indices are preserved.
    pub fn restricted(&self, keep: &[bool]) -> Result<RelationalGraph> {
        assert_eq!(keep.len(), self.node_count);
        let edges = self.relations.values().map(|r| {
            let e = r.edges.iter().copied().filter(|&(i, j)| keep[i] && keep[j]).collect();
            (r.kind, e)
        });
        RelationalGraph::from_edges(self.node_count, edges.collect::<Vec<_>>(), self.self_loops)
    }

    /// Same graph restricted to `kinds` (missing kinds are ignored).
    pub fn with_relations(&self, kinds: &[RelationKind]) -> RelationalGraph {
        let mut g = self.clone();
        g.relations.retain(|k, _| kinds.contains(k));
        g
    }
}

/// Symmetric normalization of one undirected edge list. With `self_loops`,
/// `ā = â + I` and every node has degree ≥ 1. Without, isolated nodes get an
/// all-zero row. Returns the normalized matrix and the degree diagonal.
pub fn normalize_relation(node_count: usize, edges: &[(usize, usize)], self_loops: bool) -> (CsrMatrix, Vec<f64>) {
    let base: f64 = if self_loops { 1.0 } else { 0.0 };
    let mut deg = vec![base; node_count];
    for &(i, j) in edges {
        deg[i] += 1.0;
        deg[j] += 1.0;
    }
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut t = Vec::with_capacity(2 * edges.len() + node_count);
    if self_loops {
        t.extend(inv_sqrt.iter().enumerate().map(|(i, s)| (i, i, s * s)));
    }
    for &(i, j) in edges {
        let v = inv_sqrt[i] * inv_sqrt[j];
        t.push((i, j, v));
        t.push((j, i, v));
    }
    (CsrMatrix::from_triplets(node_count, node_count, t), deg)
}

fn clique_edges(groups: impl Iterator<Item = Vec<usize>>) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for g in groups {
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                e.push((g[a], g[b]));
            }
        }
    }
    e
}

fn group_by<'a>(keys: impl Iterator<Item = &'a str>) -> Vec<Vec<usize>> {
    let mut map: indexmap::IndexMap<&str, Vec<usize>> = indexmap::IndexMap::new();
    for (i, k) in keys.enumerate() {
        map.entry(k).or_default().push(i);
    }
    map.into_values().collect()
}

/// Edges of one relation kind derived from the table.
pub fn relation_edges(table: &BidTable, kind: RelationKind) -> Result<Vec<(usize, usize)>> {
    let recs = table.records();
    match kind {
        RelationKind::Tender => Ok(clique_edges(
            group_by(recs.iter().map(|r| r.tender_id.as_str())).into_iter(),
        )),
        RelationKind::Location => {
            if !table.has_locations() {
                return Err(Error::Config(
                    "relation 'location' needs a location identifier on every bid".into(),
                ));
            }
            Ok(clique_edges(
                group_by(recs.iter().map(|r| r.location_id.as_deref().unwrap_or_default())).into_iter(),
            ))
        }
        RelationKind::Site => {
            if !table.has_sites() {
                return Err(Error::Config(
                    "relation 'site' needs a site identifier on every bid".into(),
                ));
            }
            Ok(clique_edges(
                group_by(recs.iter().map(|r| r.site_id.as_deref().unwrap_or_default())).into_iter(),
            ))
        }
        RelationKind::Competitor => {
            let dated = table.has_dates();
            let mut e = Vec::new();
            for (_, mut rows) in table.companies() {
                if dated {
                    rows.sort_by(|&a, &b| {
                        let (da, db) = (recs[a].date.unwrap_or(0.0), recs[b].date.unwrap_or(0.0));
                        da.total_cmp(&db).then(a.cmp(&b))
                    });
                }
                e.extend(rows.windows(2).map(|w| (w[0], w[1])));
            }
            Ok(e)
        }
    }
}

/// Builds the graph for the `active` relations.
pub fn build_graph(table: &BidTable, active: &[RelationKind], self_loops: SelfLoopMode) -> Result<RelationalGraph> {
    if active.is_empty() {
        return Err(Error::Config("at least one relation must be active".into()));
    }
    let edges = active
        .iter()
        .map(|&k| Ok((k, relation_edges(table, k)?)))
        .collect::<Result<Vec<_>>>()?;
    RelationalGraph::from_edges(table.len(), edges, self_loops)
}

/// Loop form of one unweighted aggregation step: `h_μ + Σ_{v ∈ η(μ)} h_v`.
/// Serves as an oracle for the matrix product `(Â + I) H`.
pub fn message_pass_reference(h: &Matrix, graph: &RelationalGraph, relation: RelationKind) -> Result<Matrix> {
    if h.rows() != graph.node_count() {
        return Err(Error::Dimension {
            op: "message_pass_reference",
            left: h.shape(),
            right: (graph.node_count(), h.cols()),
        });
    }
    let rel = graph
        .relation(relation)
        .ok_or_else(|| Error::Config(format!("relation '{relation}' is not in the graph")))?;
    let nbrs = rel.neighbors(graph.node_count());
    let mut out = h.clone();
    for (mu, list) in nbrs.iter().enumerate() {
        for &v in list {
            for c in 0..h.cols() {
                let x = out.get(mu, c) + h.get(v, c);
                out.set(mu, c, x);
            }
        }
    }
    Ok(out)
}
