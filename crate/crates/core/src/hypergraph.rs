//! Immutable hypergraph with both incidence directions in compressed form.
//!
//! `pins` lists the members of every hyperedge and `memberships` the
//! hyperedges of every node; each is an offset array plus a flat value array
//! and the two are exact transposes of each other.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Hypergraph {
    num_nodes: usize,
    pin_offsets: Vec<usize>,
    pins: Vec<u32>,
    mem_offsets: Vec<usize>,
    memberships: Vec<u32>,
    weights: Vec<f64>,
    features: Option<Matrix>,
}

impl Hypergraph {
    /// Builds a hypergraph over nodes `0..num_nodes` without any cleanup.
    ///
    /// Every hyperedge needs at least two distinct, in-range pins. Nodes that
    /// belong to no hyperedge are allowed here: derived hypergraphs (coarse
    /// levels, training graphs with hidden hyperedges) keep their id space
    /// fixed. Use [`build_hypergraph`] for raw input.
    pub fn new(
        num_nodes: usize,
        pins: &[Vec<u32>],
        weights: Option<Vec<f64>>,
        features: Option<Matrix>,
    ) -> Result<Self> {
        let mut offsets = Vec::with_capacity(pins.len() + 1);
        offsets.push(0);
        let mut flat = Vec::with_capacity(pins.iter().map(Vec::len).sum());
        for p in pins {
            flat.extend_from_slice(p);
            offsets.push(flat.len());
        }
        Self::from_csr(num_nodes, offsets, flat, weights, features)
    }

    pub(crate) fn from_csr(
        num_nodes: usize,
        pin_offsets: Vec<usize>,
        pins: Vec<u32>,
        weights: Option<Vec<f64>>,
        features: Option<Matrix>,
    ) -> Result<Self> {
        let num_hyperedges = pin_offsets.len() - 1;
        if num_nodes > u32::MAX as usize || num_hyperedges > u32::MAX as usize {
            return Err(Error::invalid("hypergraph exceeds u32 id range"));
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != num_hyperedges {
                    return Err(Error::invalid(format!(
                        "{} weights for {num_hyperedges} hyperedges",
                        w.len()
                    )));
                }
                if let Some(bad) = w.iter().position(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::invalid(format!(
                        "hyperedge {bad} has weight {}, weights must be finite and nonnegative",
                        w[bad]
                    )));
                }
                w
            }
            None => vec![1.0; num_hyperedges],
        };
        if let Some(f) = &features {
            if f.rows() != num_nodes {
                return Err(Error::FeatureShape {
                    expected: num_nodes,
                    found: f.rows(),
                });
            }
        }

        let mut degree = vec![0usize; num_nodes];
        let mut seen = vec![u32::MAX; num_nodes];
        for e in 0..num_hyperedges {
            let p = &pins[pin_offsets[e]..pin_offsets[e + 1]];
            if p.len() < 2 {
                return Err(Error::invalid(format!(
                    "hyperedge {e} has {} pin(s), need at least 2",
                    p.len()
                )));
            }
            for &v in p {
                let v = v as usize;
                if v >= num_nodes {
                    return Err(Error::invalid(format!(
                        "hyperedge {e} references node {v} outside 0..{num_nodes}"
                    )));
                }
                if seen[v] == e as u32 {
                    return Err(Error::invalid(format!(
                        "hyperedge {e} lists node {v} twice"
                    )));
                }
                seen[v] = e as u32;
                degree[v] += 1;
            }
        }

        let mut mem_offsets = Vec::with_capacity(num_nodes + 1);
        mem_offsets.push(0);
        for d in &degree {
            mem_offsets.push(mem_offsets.last().unwrap() + d);
        }
        let mut cursor = mem_offsets[..num_nodes].to_vec();
        let mut memberships = vec![0u32; pins.len()];
        // Hyperedges are visited in id order, so each node's list is sorted.
        for e in 0..num_hyperedges {
            for &v in &pins[pin_offsets[e]..pin_offsets[e + 1]] {
                memberships[cursor[v as usize]] = e as u32;
                cursor[v as usize] += 1;
            }
        }

        Ok(Hypergraph {
            num_nodes,
            pin_offsets,
            pins,
            mem_offsets,
            memberships,
            weights,
            features,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn num_hyperedges(&self) -> usize {
        self.pin_offsets.len() - 1
    }

    /// Total number of (hyperedge, node) incidences.
    #[inline]
    pub fn num_pins(&self) -> usize {
        self.pins.len()
    }

    #[inline]
    pub fn pins(&self, e: usize) -> &[u32] {
        &self.pins[self.pin_offsets[e]..self.pin_offsets[e + 1]]
    }

    #[inline]
    pub fn memberships(&self, v: usize) -> &[u32] {
        &self.memberships[self.mem_offsets[v]..self.mem_offsets[v + 1]]
    }

    #[inline]
    pub fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn hyperedges(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        (0..self.num_hyperedges()).map(move |e| self.pins(e))
    }

    pub fn isolated_nodes(&self) -> usize {
        (0..self.num_nodes)
            .filter(|&v| self.memberships(v).is_empty())
            .count()
    }

    pub fn with_features(mut self, features: Option<Matrix>) -> Result<Self> {
        if let Some(f) = &features {
            if f.rows() != self.num_nodes {
                return Err(Error::FeatureShape {
                    expected: self.num_nodes,
                    found: f.rows(),
                });
            }
        }
        self.features = features;
        Ok(self)
    }

    /// Keeps only the listed hyperedges (in the given order), leaving the node
    /// id space untouched.
    pub fn retain_hyperedges(&self, keep: &[usize]) -> Hypergraph {
        let pins: Vec<Vec<u32>> = keep.iter().map(|&e| self.pins(e).to_vec()).collect();
        let weights = keep.iter().map(|&e| self.weights[e]).collect();
        Hypergraph::new(self.num_nodes, &pins, Some(weights), self.features.clone())
            .expect("subset of a valid hypergraph is valid")
    }
}

/// Hypergraph as read from a file, before cleanup.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawHypergraph {
    /// Declared node count; `None` means one past the largest id seen.
    pub num_nodes: Option<usize>,
    pub pins: Vec<Vec<usize>>,
    pub weights: Option<Vec<f64>>,
}

impl RawHypergraph {
    pub fn from_pins(pins: Vec<Vec<usize>>) -> Self {
        RawHypergraph {
            num_nodes: None,
            pins,
            weights: None,
        }
    }

    pub fn node_universe(&self) -> usize {
        let seen = self.pins.iter().flatten().max().map_or(0, |&m| m + 1);
        self.num_nodes.map_or(seen, |n| n.max(seen))
    }
}

/// Map from compacted ids back to the ids of the raw input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdMap {
    /// `node_origin[compact] = original node id`.
    pub node_origin: Vec<usize>,
    /// `hedge_origin[compact] = index of the hyperedge in the raw input`.
    pub hedge_origin: Vec<usize>,
    /// Size of the raw node id space.
    pub original_num_nodes: usize,
}

impl IdMap {
    pub fn identity(num_nodes: usize, num_hyperedges: usize) -> Self {
        IdMap {
            node_origin: (0..num_nodes).collect(),
            hedge_origin: (0..num_hyperedges).collect(),
            original_num_nodes: num_nodes,
        }
    }

    /// External id for each star-graph vertex: nodes keep their original id,
    /// hyperedges are numbered after the raw node id space.
    pub fn star_ids(&self) -> Vec<usize> {
        self.node_origin
            .iter()
            .copied()
            .chain(
                self.hedge_origin
                    .iter()
                    .map(|&e| self.original_num_nodes + e),
            )
            .collect()
    }

    /// Compacted id of an original node, if it survived cleanup.
    pub fn compact_node(&self, original: usize) -> Option<usize> {
        self.node_origin.binary_search(&original).ok()
    }
}

#[derive(Clone, Debug)]
pub struct Cleaned {
    pub hypergraph: Hypergraph,
    pub ids: IdMap,
}

/// Builds a hypergraph from raw input, applying the load-time cleanup rule.
///
/// Duplicate pins are collapsed, hyperedges left with fewer than two pins are
/// dropped, and nodes that then belong to no hyperedge are removed. Surviving
/// ids are compacted in increasing order. `features`, when given, must have
/// one row per node of the raw id space.
pub fn build_hypergraph(raw: &RawHypergraph, features: Option<&Matrix>) -> Result<Cleaned> {
    let universe = raw.node_universe();
    if let Some(f) = features {
        if f.rows() != universe {
            return Err(Error::FeatureShape {
                expected: universe,
                found: f.rows(),
            });
        }
    }
    if let Some(w) = &raw.weights {
        if w.len() != raw.pins.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} hyperedges",
                w.len(),
                raw.pins.len()
            )));
        }
    }

    let mut kept_edges = Vec::new();
    let mut kept_pins: Vec<Vec<usize>> = Vec::new();
    let mut used = vec![false; universe];
    for (e, p) in raw.pins.iter().enumerate() {
        let mut seen = HashSet::with_capacity(p.len());
        let dedup: Vec<usize> = p.iter().copied().filter(|v| seen.insert(*v)).collect();
        if dedup.len() < 2 {
            continue;
        }
        for &v in &dedup {
            used[v] = true;
        }
        kept_edges.push(e);
        kept_pins.push(dedup);
    }
    if kept_edges.is_empty() {
        return Err(Error::EmptyAfterCleanup);
    }

    let mut compact = vec![u32::MAX; universe];
    let mut node_origin = Vec::new();
    for v in 0..universe {
        if used[v] {
            compact[v] = node_origin.len() as u32;
            node_origin.push(v);
        }
    }
    let pins: Vec<Vec<u32>> = kept_pins
        .iter()
        .map(|p| p.iter().map(|&v| compact[v]).collect())
        .collect();
    let weights = raw
        .weights
        .as_ref()
        .map(|w| kept_edges.iter().map(|&e| w[e]).collect());
    let features = features.map(|f| f.select_rows(&node_origin));

    let hypergraph = Hypergraph::new(node_origin.len(), &pins, weights, features)?;
    Ok(Cleaned {
        hypergraph,
        ids: IdMap {
            node_origin,
            hedge_origin: kept_edges,
            original_num_nodes: universe,
        },
    })
}
