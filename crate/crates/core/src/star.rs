//! Star expansion: the bipartite graph with one vertex per node and one per
//! hyperedge, and an edge for every membership.
//!
//! Vertex ids: nodes occupy `0..|V|`, hyperedge `e` is vertex `|V| + e`.

use std::ops::Deref;

use crate::graph::CsrGraph;
use crate::hypergraph::Hypergraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Node,
    Hyperedge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Node(u32),
    Hyperedge(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarGraph {
    num_nodes: usize,
    num_hyperedges: usize,
    graph: CsrGraph,
}

impl StarGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_hyperedges(&self) -> usize {
        self.num_hyperedges
    }

    pub fn kind(&self, vertex: usize) -> VertexKind {
        if vertex < self.num_nodes {
            VertexKind::Node
        } else {
            VertexKind::Hyperedge
        }
    }

    pub fn origin(&self, vertex: usize) -> Origin {
        if vertex < self.num_nodes {
            Origin::Node(vertex as u32)
        } else {
            Origin::Hyperedge((vertex - self.num_nodes) as u32)
        }
    }

    pub fn vertex_of(&self, origin: Origin) -> usize {
        match origin {
            Origin::Node(v) => v as usize,
            Origin::Hyperedge(e) => self.num_nodes + e as usize,
        }
    }

    pub fn graph(&self) -> &CsrGraph {
        &self.graph
    }
}

impl Deref for StarGraph {
    type Target = CsrGraph;

    fn deref(&self) -> &CsrGraph {
        &self.graph
    }
}

pub fn build_star_expansion(h: &Hypergraph) -> StarGraph {
    let n = h.num_nodes();
    let m = h.num_hyperedges();
    let mut offsets = Vec::with_capacity(n + m + 1);
    let mut neighbors = Vec::with_capacity(2 * h.num_pins());
    let mut weights = Vec::with_capacity(2 * h.num_pins());
    offsets.push(0);
    for v in 0..n {
        for &e in h.memberships(v) {
            neighbors.push(n as u32 + e);
            weights.push(h.weight(e as usize));
        }
        offsets.push(neighbors.len());
    }
    for e in 0..m {
        let w = h.weight(e);
        let start = neighbors.len();
        neighbors.extend_from_slice(h.pins(e));
        neighbors[start..].sort_unstable();
        weights.extend(std::iter::repeat_n(w, h.pins(e).len()));
        offsets.push(neighbors.len());
    }
    StarGraph {
        num_nodes: n,
        num_hyperedges: m,
        graph: CsrGraph::from_raw_parts(offsets, neighbors, weights),
    }
}

impl From<&Hypergraph> for StarGraph {
    fn from(h: &Hypergraph) -> Self {
        build_star_expansion(h)
    }
}
