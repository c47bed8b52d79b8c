//! Planted-community hypergraphs with known labels and class-dependent
//! bag-of-words features, for desk-scale experiments.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::hypergraph::{build_hypergraph, Hypergraph, IdMap, RawHypergraph};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Clone, Debug)]
pub struct PlantedConfig {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub num_hyperedges: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Probability that a member is drawn from the hyperedge's own class.
    pub intra_prob: f64,
    /// Vocabulary size of the bag-of-words features; 0 disables features.
    pub feature_dim: usize,
    /// Word probability for words in the node's class topic.
    pub topic_prob: f64,
    /// Word probability for all other words.
    pub background_prob: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            num_nodes: 1000,
            num_classes: 4,
            num_hyperedges: 600,
            min_size: 3,
            max_size: 8,
            intra_prob: 0.9,
            feature_dim: 64,
            topic_prob: 0.3,
            background_prob: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Planted {
    pub hypergraph: Hypergraph,
    /// Class of every node (compacted ids).
    pub labels: Vec<u32>,
    pub raw: RawHypergraph,
    pub ids: IdMap,
}

/// Generates a planted-community hypergraph.
///
/// Node `v` belongs to class `v % num_classes`. Each hyperedge picks a class
/// and draws each member from it with probability `intra_prob`, otherwise
/// from a uniformly chosen other class. Nodes left uncovered are added to a random
/// hyperedge of their own class, so every node survives cleanup.
pub fn planted(cfg: &PlantedConfig) -> Planted {
    assert!(cfg.num_classes >= 1 && cfg.min_size >= 2 && cfg.max_size >= cfg.min_size);
    assert!(cfg.num_nodes >= cfg.max_size * cfg.num_classes);
    let mut rng = rng::stream(cfg.seed, &[0x5eed]);
    let classes: Vec<Vec<usize>> = (0..cfg.num_classes)
        .map(|c| (c..cfg.num_nodes).step_by(cfg.num_classes).collect())
        .collect();

    let mut pins: Vec<Vec<usize>> = Vec::with_capacity(cfg.num_hyperedges);
    let mut edge_class = Vec::with_capacity(cfg.num_hyperedges);
    for _ in 0..cfg.num_hyperedges {
        let c = rng.random_range(0..cfg.num_classes);
        let size = rng.random_range(cfg.min_size..=cfg.max_size);
        let mut members = Vec::with_capacity(size);
        while members.len() < size {
            let v = if cfg.num_classes == 1 || rng.random_bool(cfg.intra_prob) {
                *classes[c].choose(&mut rng).unwrap()
            } else {
                let other = (c + rng.random_range(1..cfg.num_classes)) % cfg.num_classes;
                *classes[other].choose(&mut rng).unwrap()
            };
            if !members.contains(&v) {
                members.push(v);
            }
        }
        pins.push(members);
        edge_class.push(c);
    }

    let mut covered = vec![false; cfg.num_nodes];
    for v in pins.iter().flatten() {
        covered[*v] = true;
    }
    let by_class: Vec<Vec<usize>> = (0..cfg.num_classes)
        .map(|c| (0..pins.len()).filter(|&e| edge_class[e] == c).collect())
        .collect();
    for v in 0..cfg.num_nodes {
        if covered[v] {
            continue;
        }
        let c = v % cfg.num_classes;
        let e = match by_class[c].choose(&mut rng) {
            Some(&e) => e,
            None => rng.random_range(0..pins.len()),
        };
        pins[e].push(v);
    }

    let features = (cfg.feature_dim > 0).then(|| {
        let topic = cfg.feature_dim / cfg.num_classes;
        let mut data = Vec::with_capacity(cfg.num_nodes * cfg.feature_dim);
        for v in 0..cfg.num_nodes {
            let c = v % cfg.num_classes;
            for w in 0..cfg.feature_dim {
                let on_topic = topic > 0 && w / topic == c;
                let p = if on_topic {
                    cfg.topic_prob
                } else {
                    cfg.background_prob
                };
                data.push(if rng.random_bool(p) { 1.0 } else { 0.0 });
            }
        }
        Matrix::from_vec(cfg.num_nodes, cfg.feature_dim, data).unwrap()
    });

    let raw = RawHypergraph {
        num_nodes: Some(cfg.num_nodes),
        pins,
        weights: None,
    };
    let cleaned = build_hypergraph(&raw, features.as_ref()).expect("generator output is valid");
    let labels = cleaned
        .ids
        .node_origin
        .iter()
        .map(|&v| (v % cfg.num_classes) as u32)
        .collect();
    Planted {
        hypergraph: cleaned.hypergraph,
        labels,
        raw,
        ids: cleaned.ids,
    }
}
