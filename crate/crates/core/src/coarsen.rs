//! Hypergraph coarsening by hyperedge assignment.
//!
//! Each node picks one of its hyperedges (the most similar one under the
//! [`AssignPolicy`]); all nodes that picked the same hyperedge become one
//! coarse node. A fine hyperedge survives into the coarse level when its
//! members map to at least two distinct coarse nodes.
//!
//! Each phase is a pure map over hyperedges or nodes, so the result does not
//! depend on the number of threads.
//!
//! Numbering conventions (relied on by callers that compare levels):
//! * coarse node `k` is the `k`-th hyperedge, in id order, chosen by at least
//!   one node; nodes without memberships follow as singletons in node order;
//! * surviving hyperedges keep their relative order and list their coarse pins
//!   in increasing order;
//! * ties are broken by `mix(seed, node) % ties`, where `ties` is the list of
//!   tied candidates in membership order (see [`tie_break`]).

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::matrix::{dot, norm, Matrix};
use crate::rng;

/// Similarity slack under which two cosine scores count as tied.
pub const COSINE_TIE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignKind {
    /// Cosine similarity between the node's features and the mean features of
    /// the hyperedge.
    CosineFeatures,
    MaxWeight,
    /// Largest pin count.
    MaxDegree,
}

impl std::str::FromStr for AssignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" | "cosine-features" => Ok(AssignKind::CosineFeatures),
            "max-weight" => Ok(AssignKind::MaxWeight),
            "max-degree" => Ok(AssignKind::MaxDegree),
            _ => Err(Error::invalid(format!("unknown assignment policy '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AssignPolicy {
    pub kind: AssignKind,
    pub tie_break_seed: u64,
}

impl AssignPolicy {
    pub fn new(kind: AssignKind, tie_break_seed: u64) -> Self {
        AssignPolicy {
            kind,
            tie_break_seed,
        }
    }

    /// Policy used at hierarchy level `level` (1 = first coarsening).
    pub fn for_level(&self, level: usize) -> AssignPolicy {
        AssignPolicy {
            kind: self.kind,
            tie_break_seed: rng::derive(self.tie_break_seed, &[level as u64]),
        }
    }
}

/// Links a fine level to the next coarser one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeMap {
    /// Fine node -> coarse node.
    pub node_rep: Vec<u32>,
    /// Fine hyperedge -> coarse hyperedge, `None` when removed.
    pub hedge_rep: Vec<Option<u32>>,
    /// Fine node -> the hyperedge it was assigned to; `None` for nodes without
    /// memberships.
    pub assignment: Vec<Option<u32>>,
    pub coarse_nodes: usize,
    pub coarse_hyperedges: usize,
}

#[derive(Clone, Debug)]
pub struct CoarseLevel {
    pub hypergraph: Hypergraph,
    pub map: MergeMap,
}

impl CoarseLevel {
    /// True when no two nodes were merged.
    pub fn is_no_progress(&self) -> bool {
        self.map.coarse_nodes == self.map.node_rep.len()
    }
}

/// Mean feature vector of every hyperedge.
pub fn compute_hyperedge_features(h: &Hypergraph) -> Result<Matrix> {
    let x = h.features().ok_or(Error::PolicyRequiresFeatures)?;
    let k = x.cols();
    let mut out = Matrix::zeros(h.num_hyperedges(), k);
    if k == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(e, row)| {
            let pins = h.pins(e);
            for &v in pins {
                for (acc, f) in row.iter_mut().zip(x.row(v as usize)) {
                    *acc += f;
                }
            }
            let n = pins.len() as f64;
            row.iter_mut().for_each(|a| *a /= n);
        });
    Ok(out)
}

/// Deterministic choice among `n` tied candidates for `node`.
#[inline]
pub fn tie_break(seed: u64, node: usize, n: usize) -> usize {
    (rng::derive(seed, &[node as u64]) % n as u64) as usize
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return f64::NEG_INFINITY;
    }
    dot(a, b) / (na * nb)
}

fn argmax_by<F: Fn(u32) -> f64>(
    cands: &[u32],
    score: F,
    slack: f64,
    seed: u64,
    node: usize,
) -> Option<u32> {
    let scores: Vec<f64> = cands.iter().map(|&e| score(e)).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let tied: Vec<u32> = cands
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s >= best - slack)
        .map(|(&e, _)| e)
        .collect();
    Some(tied[tie_break(seed, node, tied.len())])
}

/// Picks the hyperedge `v` is merged through.
///
/// `edge_features` must come from [`compute_hyperedge_features`] when the
/// policy is cosine. Candidates whose feature vector (or the node's) has zero
/// norm score minus infinity; if every candidate does, the choice falls back
/// to the largest pin count.
///
/// Panics if `v` belongs to no hyperedge.
pub fn assign_hyperedge(
    v: usize,
    h: &Hypergraph,
    edge_features: Option<&Matrix>,
    policy: &AssignPolicy,
) -> Result<u32> {
    let cands = h.memberships(v);
    assert!(
        !cands.is_empty(),
        "node {v} has no hyperedge to be assigned to"
    );
    let seed = policy.tie_break_seed;
    let by_degree = |e: u32| h.pins(e as usize).len() as f64;
    let chosen = match policy.kind {
        AssignKind::CosineFeatures => {
            let x = h.features().ok_or(Error::PolicyRequiresFeatures)?;
            let ef = edge_features.ok_or(Error::PolicyRequiresFeatures)?;
            let fv = x.row(v);
            argmax_by(
                cands,
                |e| cosine(ef.row(e as usize), fv),
                COSINE_TIE_EPS,
                seed,
                v,
            )
            .or_else(|| argmax_by(cands, by_degree, 0.0, seed, v))
        }
        AssignKind::MaxWeight => argmax_by(cands, |e| h.weight(e as usize), 0.0, seed, v),
        AssignKind::MaxDegree => argmax_by(cands, by_degree, 0.0, seed, v),
    };
    Ok(chosen.expect("finite scores always yield a candidate"))
}

/// One level of coarsening.
pub fn coarsen_level(h: &Hypergraph, policy: &AssignPolicy) -> Result<CoarseLevel> {
    let n = h.num_nodes();
    let m = h.num_hyperedges();

    let edge_features = match policy.kind {
        AssignKind::CosineFeatures => Some(compute_hyperedge_features(h)?),
        _ => None,
    };

    let assignment: Vec<Option<u32>> = (0..n)
        .into_par_iter()
        .map(|v| {
            if h.memberships(v).is_empty() {
                Ok(None)
            } else {
                assign_hyperedge(v, h, edge_features.as_ref(), policy).map(Some)
            }
        })
        .collect::<Result<_>>()?;

    // Coarse node per chosen hyperedge, in hyperedge order.
    let mut chosen = vec![false; m];
    for e in assignment.iter().flatten() {
        chosen[*e as usize] = true;
    }
    let mut hedge_node = vec![u32::MAX; m];
    let mut coarse_nodes = 0u32;
    for e in 0..m {
        if chosen[e] {
            hedge_node[e] = coarse_nodes;
            coarse_nodes += 1;
        }
    }
    let mut node_rep = vec![0u32; n];
    for v in 0..n {
        node_rep[v] = match assignment[v] {
            Some(e) => hedge_node[e as usize],
            None => {
                let id = coarse_nodes;
                coarse_nodes += 1;
                id
            }
        };
    }
    let coarse_nodes = coarse_nodes as usize;

    let coarse_pins: Vec<Option<Vec<u32>>> = (0..m)
        .into_par_iter()
        .map(|e| {
            let mut p: Vec<u32> = h.pins(e).iter().map(|&v| node_rep[v as usize]).collect();
            p.sort_unstable();
            p.dedup();
            (p.len() >= 2).then_some(p)
        })
        .collect();

    let mut hedge_rep = vec![None; m];
    let mut offsets = vec![0usize];
    let mut pins = Vec::new();
    let mut weights = Vec::new();
    for (e, p) in coarse_pins.into_iter().enumerate() {
        if let Some(p) = p {
            hedge_rep[e] = Some(weights.len() as u32);
            pins.extend(p);
            offsets.push(pins.len());
            weights.push(h.weight(e));
        }
    }
    let coarse_hyperedges = weights.len();

    let features = h
        .features()
        .map(|x| merge_features(x, &node_rep, coarse_nodes));
    let hypergraph = Hypergraph::from_csr(coarse_nodes, offsets, pins, Some(weights), features)?;

    Ok(CoarseLevel {
        hypergraph,
        map: MergeMap {
            node_rep,
            hedge_rep,
            assignment,
            coarse_nodes,
            coarse_hyperedges,
        },
    })
}

/// Mean of the fine rows merged into each coarse row, summed in fine id order.
fn merge_features(x: &Matrix, node_rep: &[u32], coarse: usize) -> Matrix {
    let k = x.cols();
    let mut offsets = vec![0usize; coarse + 1];
    for &r in node_rep {
        offsets[r as usize + 1] += 1;
    }
    for i in 0..coarse {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets[..coarse].to_vec();
    let mut members = vec![0usize; node_rep.len()];
    for (v, &r) in node_rep.iter().enumerate() {
        members[cursor[r as usize]] = v;
        cursor[r as usize] += 1;
    }
    let mut out = Matrix::zeros(coarse, k);
    if k == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(c, row)| {
            let group = &members[offsets[c]..offsets[c + 1]];
            for &v in group {
                for (acc, f) in row.iter_mut().zip(x.row(v)) {
                    *acc += f;
                }
            }
            let n = group.len() as f64;
            row.iter_mut().for_each(|a| *a /= n);
        });
    out
}

/// Finest-to-coarsest sequence of hypergraphs.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    /// `levels[0]` is the input.
    pub levels: Vec<Hypergraph>,
    /// `maps[i]` links `levels[i]` to `levels[i + 1]`.
    pub maps: Vec<MergeMap>,
    /// Wall-clock seconds spent producing each level (0 for the input).
    pub coarsen_secs: Vec<f64>,
}

impl Hierarchy {
    pub fn coarsest(&self) -> &Hypergraph {
        self.levels.last().unwrap()
    }

    pub fn depth(&self) -> usize {
        self.maps.len()
    }
}

/// Coarsens up to `depth` times.
///
/// Stops before a level when the current hypergraph has fewer than `min_size`
/// nodes. A coarse level that merged nothing, or that has no hyperedge left,
/// is discarded and ends the hierarchy.
pub fn coarsen_hierarchy(
    h: &Hypergraph,
    depth: usize,
    min_size: usize,
    policy: &AssignPolicy,
) -> Result<Hierarchy> {
    let mut levels = vec![h.clone()];
    let mut maps = Vec::new();
    let mut coarsen_secs = vec![0.0];
    for level in 1..=depth {
        let current = levels.last().unwrap();
        if current.num_nodes() < min_size {
            break;
        }
        let start = Instant::now();
        let next = coarsen_level(current, &policy.for_level(level))?;
        let secs = start.elapsed().as_secs_f64();
        if next.is_no_progress() || next.hypergraph.num_hyperedges() == 0 {
            break;
        }
        levels.push(next.hypergraph);
        maps.push(next.map);
        coarsen_secs.push(secs);
    }
    Ok(Hierarchy {
        levels,
        maps,
        coarsen_secs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_features(pins: &[Vec<u32>], n: usize, f: &[&[f64]]) -> Hypergraph {
        Hypergraph::new(n, pins, None, Some(Matrix::from_rows(f).unwrap())).unwrap()
    }

    fn cosine_policy(seed: u64) -> AssignPolicy {
        AssignPolicy::new(AssignKind::CosineFeatures, seed)
    }

    #[test]
    fn hyperedge_feature_means() {
        let h = with_features(
            &[vec![0, 1], vec![0, 1, 2]],
            3,
            &[&[1.0, 0.0], &[0.0, 1.0], &[5.0, 2.0]],
        );
        let ef = compute_hyperedge_features(&h).unwrap();
        assert_eq!(ef.row(0), &[0.5, 0.5]);
        assert_eq!(ef.row(1), &[2.0, 1.0]);

        let h = with_features(
            &[vec![0, 1, 2]],
            3,
            &[&[1.0, 1.0], &[2.0, 2.0], &[6.0, 3.0]],
        );
        assert_eq!(compute_hyperedge_features(&h).unwrap().row(0), &[3.0, 2.0]);

        let bare = Hypergraph::new(2, &[vec![0, 1]], None, None).unwrap();
        assert!(matches!(
            compute_hyperedge_features(&bare),
            Err(Error::PolicyRequiresFeatures)
        ));
    }

    #[test]
    fn cosine_picks_aligned_hyperedge() {
        // Node 0 = (1,0); e0 = {0,1} with mean (1,0); e1 = {0,2} with mean (0.5,0.5).
        let h = with_features(
            &[vec![0, 1], vec![0, 2]],
            3,
            &[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]],
        );
        let ef = compute_hyperedge_features(&h).unwrap();
        assert_eq!(
            assign_hyperedge(0, &h, Some(&ef), &cosine_policy(0)).unwrap(),
            0
        );
    }

    #[test]
    fn cosine_ties_are_seeded() {
        // f(v) = (1,1); both hyperedges have means parallel to it.
        let h = with_features(
            &[vec![0, 1], vec![0, 2]],
            3,
            &[&[1.0, 1.0], &[3.0, 3.0], &[5.0, 5.0]],
        );
        let ef = compute_hyperedge_features(&h).unwrap();
        let mut picks = std::collections::HashSet::new();
        for seed in 0..64 {
            let p = cosine_policy(seed);
            let a = assign_hyperedge(0, &h, Some(&ef), &p).unwrap();
            assert_eq!(a, assign_hyperedge(0, &h, Some(&ef), &p).unwrap());
            assert_eq!(a as usize, [0, 1][tie_break(seed, 0, 2)]);
            picks.insert(a);
        }
        assert_eq!(picks.len(), 2, "both tied hyperedges should be reachable");
    }

    #[test]
    fn zero_norm_falls_back_to_degree() {
        let h = with_features(
            &[vec![0, 1], vec![0, 1, 2]],
            3,
            &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]],
        );
        let ef = compute_hyperedge_features(&h).unwrap();
        assert_eq!(
            assign_hyperedge(0, &h, Some(&ef), &cosine_policy(9)).unwrap(),
            1
        );
    }

    #[test]
    fn degree_and_weight_policies() {
        let h = Hypergraph::new(
            6,
            &[vec![0, 1], vec![0, 2, 3, 4, 5]],
            Some(vec![3.0, 1.0]),
            None,
        )
        .unwrap();
        let deg = AssignPolicy::new(AssignKind::MaxDegree, 1);
        let wt = AssignPolicy::new(AssignKind::MaxWeight, 1);
        assert_eq!(assign_hyperedge(0, &h, None, &deg).unwrap(), 1);
        assert_eq!(assign_hyperedge(0, &h, None, &wt).unwrap(), 0);
    }

    #[test]
    fn cosine_without_features_is_an_error() {
        let h = Hypergraph::new(2, &[vec![0, 1]], None, None).unwrap();
        assert!(matches!(
            coarsen_level(&h, &cosine_policy(0)),
            Err(Error::PolicyRequiresFeatures)
        ));
    }

    #[test]
    fn two_hyperedge_example() {
        // e0 = {a,b}, e1 = {b,c}; a and b aligned with e0, c with e1.
        let h = with_features(
            &[vec![0, 1], vec![1, 2]],
            3,
            &[&[1.0, 0.0], &[1.0, 0.1], &[0.0, 1.0]],
        );
        let lvl = coarsen_level(&h, &cosine_policy(4)).unwrap();
        assert_eq!(lvl.map.assignment, vec![Some(0), Some(0), Some(1)]);
        assert_eq!(lvl.map.node_rep, vec![0, 0, 1]);
        assert_eq!(lvl.map.hedge_rep, vec![None, Some(0)]);
        assert_eq!(lvl.hypergraph.num_nodes(), 2);
        assert_eq!(lvl.hypergraph.pins(0), &[0, 1]);
        let f = lvl.hypergraph.features().unwrap();
        assert_eq!(f.row(0), &[1.0, 0.05]);
        assert_eq!(f.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn single_hyperedge_collapses_to_empty_level() {
        let h = Hypergraph::new(3, &[vec![0, 1, 2]], None, None).unwrap();
        let lvl = coarsen_level(&h, &AssignPolicy::new(AssignKind::MaxDegree, 0)).unwrap();
        assert_eq!(lvl.hypergraph.num_nodes(), 1);
        assert_eq!(lvl.hypergraph.num_hyperedges(), 0);
        assert_eq!(lvl.map.hedge_rep, vec![None]);

        let hier =
            coarsen_hierarchy(&h, 3, 0, &AssignPolicy::new(AssignKind::MaxDegree, 0)).unwrap();
        assert_eq!(hier.levels.len(), 1);
    }

    #[test]
    fn external_merges_remove_hyperedges() {
        // e1 = {1,2} is chosen by nobody, but 1 and 2 both merge through e0 or
        // e2; if they share a rep, e1 collapses without being "fully assigned".
        let h = Hypergraph::new(3, &[vec![0, 1, 2], vec![1, 2]], None, None).unwrap();
        let lvl = coarsen_level(&h, &AssignPolicy::new(AssignKind::MaxDegree, 0)).unwrap();
        assert_eq!(lvl.map.assignment, vec![Some(0); 3]);
        assert_eq!(lvl.map.hedge_rep, vec![None, None]);
    }

    #[test]
    fn isolated_nodes_stay_singletons() {
        let h = Hypergraph::new(4, &[vec![0, 1], vec![1, 2]], None, None).unwrap();
        let lvl = coarsen_level(&h, &AssignPolicy::new(AssignKind::MaxDegree, 2)).unwrap();
        assert_eq!(lvl.map.assignment[3], None);
        assert_eq!(lvl.map.node_rep[3] as usize, lvl.map.coarse_nodes - 1);
    }

    #[test]
    fn hierarchy_depth_and_threshold() {
        let h = crate::synth::planted(&crate::synth::PlantedConfig {
            num_nodes: 500,
            num_hyperedges: 300,
            ..Default::default()
        })
        .hypergraph;
        let p = AssignPolicy::new(AssignKind::CosineFeatures, 1);
        let zero = coarsen_hierarchy(&h, 0, 0, &p).unwrap();
        assert_eq!(zero.levels.len(), 1);
        assert_eq!(zero.levels[0], h);

        let stop = coarsen_hierarchy(&h, 4, 1000, &p).unwrap();
        assert_eq!(stop.levels.len(), 1);

        let two = coarsen_hierarchy(&h, 2, 0, &p).unwrap();
        assert_eq!(two.levels.len(), 3);
        assert!(two.levels[1].num_nodes() < two.levels[0].num_nodes());
        assert!(two.levels[2].num_nodes() < two.levels[1].num_nodes());
        assert_eq!(two.coarsen_secs.len(), 3);
    }
}
