//! Undirected weighted graph in compressed sparse row form.

use crate::error::{Error, Result};

/// Symmetric adjacency: every undirected edge is stored in both endpoint
/// lists. Neighbour lists are sorted by id.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
}

impl CsrGraph {
    /// Builds a graph from undirected edges `(u, v, w)`. Self loops and
    /// negative or non-finite weights are rejected.
    pub fn from_edges(num_vertices: usize, edges: &[(u32, u32, f64)]) -> Result<Self> {
        let mut degree = vec![0usize; num_vertices];
        for &(u, v, w) in edges {
            if u as usize >= num_vertices || v as usize >= num_vertices {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) outside 0..{num_vertices}"
                )));
            }
            if u == v {
                return Err(Error::invalid(format!("self loop at vertex {u}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!("edge ({u}, {v}) has weight {w}")));
            }
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut adj: Vec<Vec<(u32, f64)>> = degree.iter().map(|&d| Vec::with_capacity(d)).collect();
        for &(u, v, w) in edges {
            adj[u as usize].push((v, w));
            adj[v as usize].push((u, w));
        }
        let mut offsets = Vec::with_capacity(num_vertices + 1);
        offsets.push(0);
        let mut neighbors = Vec::with_capacity(2 * edges.len());
        let mut weights = Vec::with_capacity(2 * edges.len());
        for mut list in adj {
            list.sort_by_key(|&(v, _)| v);
            for (v, w) in list {
                neighbors.push(v);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        Ok(CsrGraph {
            offsets,
            neighbors,
            weights,
        })
    }

    /// Assembles a graph from CSR arrays that are already symmetric and sorted.
    pub(crate) fn from_raw_parts(
        offsets: Vec<usize>,
        neighbors: Vec<u32>,
        weights: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(neighbors.len(), weights.len());
        debug_assert_eq!(*offsets.last().unwrap(), neighbors.len());
        CsrGraph {
            offsets,
            neighbors,
            weights,
        }
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn edge_weights(&self, u: usize) -> &[f64] {
        &self.weights[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn weighted_degree(&self, u: usize) -> f64 {
        self.edge_weights(u).iter().sum()
    }

    pub fn has_edge(&self, u: usize, v: u32) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// All undirected edges with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.num_vertices()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .zip(self.edge_weights(u))
                .filter(move |(&v, _)| (u as u32) < v)
                .map(move |(&v, &w)| (u as u32, v, w))
        })
    }
}
