use std::collections::BTreeMap;
use std::fmt;

use super::{RelationKind, RelationalGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct RelationStats {
    pub kind: RelationKind,
    pub nodes: usize,
    /// Undirected edges, self-loops excluded.
    pub edges: usize,
    /// Neighbor count (self excluded) → number of nodes.
    pub degree_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub node_count: usize,
    pub relations: Vec<RelationStats>,
}

pub fn graph_stats(graph: &RelationalGraph) -> GraphStats {
    let n = graph.node_count();
    let relations = graph
        .relations()
        .map(|r| {
            let mut deg = vec![0usize; n];
            for &(i, j) in &r.edges {
                deg[i] += 1;
                deg[j] += 1;
            }
            let mut degree_histogram = BTreeMap::new();
            for d in deg {
                *degree_histogram.entry(d).or_insert(0) += 1;
            }
            RelationStats {
                kind: r.kind,
                nodes: n,
                edges: r.edges.len(),
                degree_histogram,
            }
        })
        .collect();
    GraphStats {
        node_count: n,
        relations,
    }
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes: {}", self.node_count)?;
        for r in &self.relations {
            writeln!(f, "relation {}: nodes={} edges={}", r.kind, r.nodes, r.edges)?;
            writeln!(f, "  degree  count")?;
            for (d, c) in &r.degree_histogram {
                writeln!(f, "  {d:>6}  {c}")?;
            }
        }
        Ok(())
    }
}
