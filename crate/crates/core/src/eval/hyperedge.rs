use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::classify::{train_classifier, LogisticParams, Scaling, Split};
use super::metrics::auc_rank;
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::matrix::Matrix;
use crate::rng;

/// Attempts per negative tuple before the sampler gives up.
const MAX_ATTEMPTS: usize = 100;

/// Per-dimension population variance of the members' embedding rows.
pub fn hyperedge_feature(tuple: &[u32], emb: &Matrix) -> Result<Vec<f64>> {
    if tuple.is_empty() {
        return Err(Error::invalid("empty tuple"));
    }
    if let Some(&v) = tuple.iter().find(|&&v| v as usize >= emb.rows()) {
        return Err(Error::Dimension(format!(
            "node {v} has no embedding row ({} rows)",
            emb.rows()
        )));
    }
    let d = emb.cols();
    let k = tuple.len() as f64;
    let mut mean = vec![0.0; d];
    for &v in tuple {
        for (m, x) in mean.iter_mut().zip(emb.row(v as usize)) {
            *m += x / k;
        }
    }
    let mut var = vec![0.0; d];
    for &v in tuple {
        for ((s, x), m) in var.iter_mut().zip(emb.row(v as usize)).zip(&mean) {
            *s += (x - m) * (x - m) / k;
        }
    }
    Ok(var)
}

/// Draws `ratio` random node tuples per entry of `sizes`, each of that size,
/// rejecting tuples whose sorted pin set appears in `forbidden`.
pub fn sample_negatives_for<R: Rng>(
    sizes: &[usize],
    forbidden: &HashSet<Vec<u32>>,
    num_nodes: usize,
    ratio: usize,
    rng: &mut R,
) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::with_capacity(sizes.len() * ratio);
    for &size in sizes {
        if size > num_nodes {
            return Err(Error::TooDense { size });
        }
        for _ in 0..ratio {
            let mut found = None;
            for _ in 0..MAX_ATTEMPTS {
                let mut t: Vec<u32> = index::sample(rng, num_nodes, size)
                    .into_iter()
                    .map(|v| v as u32)
                    .collect();
                t.sort_unstable();
                if !forbidden.contains(&t) {
                    found = Some(t);
                    break;
                }
            }
            out.push(found.ok_or(Error::TooDense { size })?);
        }
    }
    Ok(out)
}

fn pin_sets(h: &Hypergraph) -> HashSet<Vec<u32>> {
    h.hyperedges().map(<[u32]>::to_vec).collect()
}

/// `ratio` negatives per hyperedge of `h`, size-matched.
pub fn sample_negatives(h: &Hypergraph, ratio: usize, seed: u64) -> Result<Vec<Vec<u32>>> {
    let sizes: Vec<usize> = h.hyperedges().map(<[u32]>::len).collect();
    let mut rng = rng::stream(seed, &[0x4e67]);
    sample_negatives_for(&sizes, &pin_sets(h), h.num_nodes(), ratio, &mut rng)
}

/// A hypergraph with a random fraction of its hyperedges withheld.
#[derive(Clone, Debug)]
pub struct HiddenSplit {
    /// Remaining hyperedges on the full node id space.
    pub train: Hypergraph,
    /// Pin sets of the withheld hyperedges.
    pub hidden: Vec<Vec<u32>>,
    pub train_ids: Vec<usize>,
    pub hidden_ids: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
}

/// Withholds `round(fraction * m)` uniformly chosen hyperedges.
pub fn hide_hyperedges(h: &Hypergraph, fraction: f64, seed: u64) -> Result<HiddenSplit> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid(format!(
            "hide fraction {fraction} outside [0, 1)"
        )));
    }
    let m = h.num_hyperedges();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng::stream(seed, &[0x41de]));
    let k = (fraction * m as f64).round() as usize;
    let mut hidden_ids = order[..k].to_vec();
    let mut train_ids = order[k..].to_vec();
    hidden_ids.sort_unstable();
    train_ids.sort_unstable();
    Ok(HiddenSplit {
        train: h.retain_hyperedges(&train_ids),
        hidden: hidden_ids.iter().map(|&e| h.pins(e).to_vec()).collect(),
        train_ids,
        hidden_ids,
        fraction,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkParams {
    /// Negatives per withheld hyperedge.
    pub neg_ratio: usize,
    /// Share of the labelled tuples held out for scoring.
    pub test_fraction: f64,
    pub classifier: LogisticParams,
    pub seed: u64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            neg_ratio: 5,
            test_fraction: 0.5,
            // Variance features differ in scale by orders of magnitude
            // between dimensions.
            classifier: LogisticParams {
                scaling: Scaling::PerFeature,
                ..LogisticParams::default()
            },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkReport {
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub test_size: usize,
}

/// Scores how well `node_emb` (rows indexed by node id; extra rows are
/// ignored) separates the withheld hyperedges from random tuples.
///
/// Negatives are sampled against every hyperedge of `full`, so a withheld
/// hyperedge is never drawn as a negative. The labelled tuples are split
/// into a classifier training part and a scored part.
pub fn evaluate_hyperedge_prediction(
    full: &Hypergraph,
    split: &HiddenSplit,
    node_emb: &Matrix,
    params: &LinkParams,
) -> Result<LinkReport> {
    if split.hidden.len() < 10 {
        return Err(Error::TooFewHyperedges(split.hidden.len()));
    }
    if node_emb.rows() < full.num_nodes() {
        return Err(Error::Dimension(format!(
            "{} embedding rows for {} nodes",
            node_emb.rows(),
            full.num_nodes()
        )));
    }
    let sizes: Vec<usize> = split.hidden.iter().map(Vec::len).collect();
    let mut rng = rng::stream(params.seed, &[0x4e67]);
    let negatives = sample_negatives_for(
        &sizes,
        &pin_sets(full),
        full.num_nodes(),
        params.neg_ratio,
        &mut rng,
    )?;

    let tuples: Vec<&[u32]> = split
        .hidden
        .iter()
        .chain(&negatives)
        .map(Vec::as_slice)
        .collect();
    let labels: Vec<u32> = (0..tuples.len())
        .map(|i| u32::from(i < split.hidden.len()))
        .collect();
    let rows = tuples
        .iter()
        .map(|t| hyperedge_feature(t, node_emb))
        .collect::<Result<Vec<_>>>()?;
    let x = Matrix::from_rows(&rows)?;

    let s = Split::new(
        &labels,
        2,
        1.0 - params.test_fraction,
        rng::derive(params.seed, &[1]),
    )?;
    let ytr: Vec<u32> = s.train.iter().map(|&i| labels[i]).collect();
    let model = train_classifier(&x.select_rows(&s.train), &ytr, 2, &params.classifier)?;
    let proba = model.predict_proba(&x.select_rows(&s.test));
    let scores: Vec<f64> = proba.iter_rows().map(|r| r[1]).collect();
    let truth: Vec<bool> = s.test.iter().map(|&i| labels[i] == 1).collect();
    Ok(LinkReport {
        auc: auc_rank(&scores, &truth),
        positives: split.hidden.len(),
        negatives: negatives.len(),
        test_size: s.test.len(),
    })
}
