//! Initial embedding of the coarsest star graph.
//!
//! The built-in embedder generates second-order biased random walks and
//! trains a skip-gram model with negative sampling on them. Alternatively the
//! star graph can be handed to an external program as an edge list.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::process::Command;

use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::CsrGraph;
use crate::io;
use crate::matrix::{dot, Matrix};
use crate::rng;
use crate::star::StarGraph;

#[derive(Clone, Debug, PartialEq)]
pub struct WalkConfig {
    pub walks_per_vertex: usize,
    /// Vertices per walk, start included.
    pub walk_length: usize,
    pub window: usize,
    /// Return parameter: stepping back to the previous vertex is weighted 1/p.
    pub p: f64,
    /// In-out parameter: moving away from the previous vertex is weighted 1/q.
    pub q: f64,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_vertex: 10,
            walk_length: 80,
            window: 10,
            p: 4.0,
            q: 1.0,
            negative_samples: 5,
            epochs: 1,
            learning_rate: 0.025,
            dim: 128,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("walks_per_vertex", self.walks_per_vertex),
            ("walk_length", self.walk_length),
            ("window", self.window),
            ("negative_samples", self.negative_samples),
            ("epochs", self.epochs),
            ("dim", self.dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        if !(self.p > 0.0 && self.p.is_finite() || self.p == f64::INFINITY) {
            return Err(Error::invalid("p must be positive"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::invalid("q must be positive and finite"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Walks stored back to back.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Walks {
    offsets: Vec<usize>,
    steps: Vec<u32>,
}

impl Walks {
    pub fn from_walks<I: IntoIterator<Item = Vec<u32>>>(walks: I) -> Self {
        let mut w = Walks {
            offsets: vec![0],
            steps: Vec::new(),
        };
        for walk in walks {
            w.steps.extend(walk);
            w.offsets.push(w.steps.len());
        }
        w
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.steps[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let mut r = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if r < w {
            return i;
        }
        r -= w;
    }
    // Rounding can leave `r` marginally above the last bucket.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Transition weights out of `cur` given that the walk arrived from `prev`.
pub fn transition_weights(
    g: &CsrGraph,
    prev: Option<usize>,
    cur: usize,
    p: f64,
    q: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    fill_transition_weights(g, prev, cur, p, q, &mut out);
    out
}

fn fill_transition_weights(
    g: &CsrGraph,
    prev: Option<usize>,
    cur: usize,
    p: f64,
    q: f64,
    out: &mut Vec<f64>,
) {
    out.clear();
    let ws = g.edge_weights(cur);
    let Some(prev) = prev else {
        out.extend_from_slice(ws);
        return;
    };
    for (&x, &w) in g.neighbors(cur).iter().zip(ws) {
        let bias = if x as usize == prev {
            1.0 / p
        } else if g.has_edge(prev, x) {
            1.0
        } else {
            1.0 / q
        };
        out.push(w * bias);
    }
}

fn walk_from(g: &CsrGraph, start: usize, cfg: &WalkConfig, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start as u32);
    let mut prev = None;
    let mut cur = start;
    let mut buf = Vec::new();
    while walk.len() < cfg.walk_length {
        fill_transition_weights(g, prev, cur, cfg.p, cfg.q, &mut buf);
        let total: f64 = buf.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let next = g.neighbors(cur)[weighted_pick(rng, &buf, total)] as usize;
        walk.push(next as u32);
        prev = Some(cur);
        cur = next;
    }
    walk
}

/// `walks_per_vertex` rounds; each round starts one walk at every vertex, in
/// a seeded shuffled order. Each walk draws from its own generator, so the
/// output does not depend on the thread count.
pub fn generate_walks(g: &CsrGraph, cfg: &WalkConfig) -> Walks {
    let n = g.num_vertices();
    let mut all = Vec::with_capacity(n * cfg.walks_per_vertex);
    let mut order: Vec<usize> = (0..n).collect();
    for round in 0..cfg.walks_per_vertex {
        order.shuffle(&mut rng::stream(cfg.seed, &[0xa11, round as u64]));
        let batch: Vec<Vec<u32>> = order
            .par_iter()
            .map(|&s| {
                let mut rng = rng::stream(cfg.seed, &[0x3a1c, round as u64, s as u64]);
                walk_from(g, s, cfg, &mut rng)
            })
            .collect();
        all.extend(batch);
    }
    Walks::from_walks(all)
}

/// Dot product with four independent accumulators, which lets the compiler
/// vectorise it. The summation order is fixed, so results stay reproducible.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One logistic update of the output vector of `target`; the input-side
/// gradient is accumulated into `grad` and applied by the caller.
#[inline]
fn sgns_step(
    input: &Matrix,
    output: &mut Matrix,
    center: usize,
    target: usize,
    label: f64,
    alpha: f64,
    grad: &mut [f64],
) {
    let cin = input.row(center);
    let tout = output.row_mut(target);
    let g = (label - sigmoid(dot4(cin, tout))) * alpha;
    for ((acc, t), c) in grad.iter_mut().zip(tout.iter_mut()).zip(cin) {
        *acc += g * *t;
        *t += g * c;
    }
}

/// Skip-gram with negative sampling.
pub struct SkipGram {
    input: Matrix,
    output: Matrix,
    noise: Option<WeightedAliasIndex<f64>>,
    cfg: WalkConfig,
    rng: ChaCha8Rng,
}

impl SkipGram {
    /// Input vectors start uniform in `[-0.5/d, 0.5/d]`, output vectors at 0.
    /// Negatives are drawn with probability proportional to weighted
    /// degree^(3/4).
    pub fn new(g: &CsrGraph, cfg: &WalkConfig) -> Self {
        let n = g.num_vertices();
        let d = cfg.dim;
        let mut init = rng::stream(cfg.seed, &[0x1417]);
        let half = 0.5 / d as f64;
        let data = (0..n * d).map(|_| init.random_range(-half..half)).collect();
        let noise_w: Vec<f64> = (0..n).map(|u| g.weighted_degree(u).powf(0.75)).collect();
        SkipGram {
            input: Matrix::from_vec(n, d, data).unwrap(),
            output: Matrix::zeros(n, d),
            noise: WeightedAliasIndex::new(noise_w).ok(),
            cfg: cfg.clone(),
            rng: rng::stream(cfg.seed, &[0x5697]),
        }
    }

    fn train_pair(&mut self, center: usize, context: usize, alpha: f64, grad: &mut [f64]) {
        grad.fill(0.0);
        let SkipGram {
            input,
            output,
            noise,
            cfg,
            rng,
        } = self;
        sgns_step(input, output, center, context, 1.0, alpha, grad);
        if let Some(noise) = noise {
            for _ in 0..cfg.negative_samples {
                let neg = noise.sample(rng);
                if neg == context {
                    continue;
                }
                sgns_step(input, output, center, neg, 0.0, alpha, grad);
            }
        }
        for (x, g) in input.row_mut(center).iter_mut().zip(grad.iter()) {
            *x += g;
        }
    }

    /// One pass of SGD over the walks. The learning rate decays linearly with
    /// progress through `epochs` passes, floored at 1e-4 of the initial rate.
    pub fn train_epoch(&mut self, walks: &Walks, epoch: usize) {
        let total = (walks.num_steps() * self.cfg.epochs).max(1) as f64;
        let lr0 = self.cfg.learning_rate;
        let mut done = (walks.num_steps() * epoch) as f64;
        let mut grad = vec![0.0; self.cfg.dim];
        for walk in walks.iter() {
            for i in 0..walk.len() {
                let alpha = (lr0 * (1.0 - done / total)).max(lr0 * 1e-4);
                done += 1.0;
                let shrink = self.rng.random_range(0..self.cfg.window);
                let span = self.cfg.window - shrink;
                let lo = i.saturating_sub(span);
                let hi = (i + span).min(walk.len() - 1);
                for j in lo..=hi {
                    if j != i {
                        self.train_pair(walk[i] as usize, walk[j] as usize, alpha, &mut grad);
                    }
                }
            }
        }
    }

    /// Mean negative-sampling loss over `(center, context)` pairs, with the
    /// given negatives shared by every pair.
    pub fn loss(&self, pairs: &[(u32, u32)], negatives: &[u32]) -> f64 {
        let mut total = 0.0;
        for &(c, t) in pairs {
            let cin = self.input.row(c as usize);
            total -= sigmoid(dot(cin, self.output.row(t as usize))).ln();
            for &n in negatives {
                total -= (1.0 - sigmoid(dot(cin, self.output.row(n as usize)))).ln();
            }
        }
        total / pairs.len().max(1) as f64
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.input
    }

    pub fn into_embeddings(self) -> Matrix {
        self.input
    }
}

/// Trains skip-gram on `walks` over the vertices of `g`. Single-threaded, so
/// identical seeds give bit-identical output.
pub fn train_skipgram(g: &CsrGraph, walks: &Walks, cfg: &WalkConfig) -> Matrix {
    let mut model = SkipGram::new(g, cfg);
    for epoch in 0..cfg.epochs {
        model.train_epoch(walks, epoch);
    }
    model.into_embeddings()
}

/// Walks followed by skip-gram training.
pub fn embed_graph(g: &CsrGraph, cfg: &WalkConfig) -> Result<Matrix> {
    cfg.validate()?;
    let walks = generate_walks(g, cfg);
    Ok(train_skipgram(g, &walks, cfg))
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Writes the star graph as an edge list, runs `template` through `sh -c`
/// with `{input}` and `{output}` replaced by the edge-list and embedding file
/// paths, and reads back one row per star vertex.
pub fn external_embed(g: &StarGraph, template: &str) -> Result<Matrix> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("star.edgelist");
    let output = dir.path().join("embedding.txt");
    {
        let mut w = BufWriter::new(File::create(&input)?);
        io::write_edgelist(&mut w, g)?;
        w.flush()?;
    }
    let cmd = template
        .replace("{input}", &shell_quote(&input.to_string_lossy()))
        .replace("{output}", &shell_quote(&output.to_string_lossy()));
    let out = Command::new("sh").arg("-c").arg(&cmd).output()?;
    if !out.status.success() {
        return Err(Error::ExternalCommand {
            status: out.status.to_string(),
            stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    let file = File::open(&output).map_err(|e| Error::ExternalCommand {
        status: "no output file".into(),
        stderr: e.to_string(),
    })?;
    let emb = io::read_embeddings(BufReader::new(file))?;
    let m = emb.dense(g.num_vertices())?;
    if !m.is_finite() {
        return Err(Error::invalid(
            "external embedding contains non-finite values",
        ));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::Hypergraph;
    use crate::star::build_star_expansion;

    fn cfg() -> WalkConfig {
        WalkConfig {
            walks_per_vertex: 4,
            walk_length: 10,
            window: 3,
            dim: 8,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn forced_walk_on_single_edge() {
        let g = CsrGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let c = WalkConfig {
            walk_length: 3,
            walks_per_vertex: 1,
            ..cfg()
        };
        let w = generate_walks(&g, &c);
        let from_a: Vec<&[u32]> = w.iter().filter(|w| w[0] == 0).collect();
        assert_eq!(from_a, vec![&[0u32, 1, 0][..]]);
    }

    #[test]
    fn no_backtracking_when_p_is_infinite() {
        let h = Hypergraph::new(4, &[vec![0, 1, 2, 3]], None, None).unwrap();
        let s = build_star_expansion(&h);
        let c = WalkConfig {
            p: f64::INFINITY,
            q: 1.0,
            walk_length: 9,
            ..cfg()
        };
        for walk in generate_walks(&s, &c).iter() {
            for t in 2..walk.len() {
                // From a node the only way on is back to the hyperedge vertex.
                if walk[t - 1] != 4 {
                    continue;
                }
                assert_ne!(walk[t], walk[t - 2], "walk {walk:?} backtracked");
            }
        }
    }

    #[test]
    fn isolated_vertex_keeps_initial_vector() {
        let g = CsrGraph::from_edges(1, &[]).unwrap();
        let walks = generate_walks(&g, &cfg());
        assert!(walks.iter().all(|w| w == [0]));
        let trained = train_skipgram(&g, &walks, &cfg());
        let init = SkipGram::new(&g, &cfg()).into_embeddings();
        assert_eq!(trained, init);
        let half = 0.5 / 8.0;
        assert!(init.as_slice().iter().all(|x| x.abs() <= half));
    }

    #[test]
    fn walks_and_training_are_reproducible() {
        let h =
            Hypergraph::new(6, &[vec![0, 1, 2], vec![2, 3], vec![3, 4, 5]], None, None).unwrap();
        let s = build_star_expansion(&h);
        let a = embed_graph(&s, &cfg()).unwrap();
        let b = embed_graph(&s, &cfg()).unwrap();
        assert_eq!(a, b);
        let c = embed_graph(&s, &WalkConfig { seed: 12, ..cfg() }).unwrap();
        assert_ne!(a, c);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        assert_eq!(
            pool.install(|| generate_walks(&s, &cfg())),
            generate_walks(&s, &cfg())
        );
    }

    #[test]
    fn loss_decreases_over_epochs() {
        let h = Hypergraph::new(
            8,
            &[vec![0, 1, 2, 3], vec![3, 4], vec![4, 5, 6, 7]],
            None,
            None,
        )
        .unwrap();
        let s = build_star_expansion(&h);
        let c = WalkConfig {
            epochs: 1,
            learning_rate: 0.05,
            ..cfg()
        };
        let walks = generate_walks(&s, &c);
        let pairs: Vec<(u32, u32)> = walks
            .iter()
            .take(20)
            .flat_map(|w| w.windows(2).map(|p| (p[0], p[1])).collect::<Vec<_>>())
            .collect();
        let negatives = [0u32, 5, 9];
        let mut model = SkipGram::new(&s, &c);
        let mut last = model.loss(&pairs, &negatives);
        for epoch in 0..5 {
            model.train_epoch(&walks, 0);
            let now = model.loss(&pairs, &negatives);
            assert!(now < last, "epoch {epoch}: {now} >= {last}");
            last = now;
        }
    }

    #[test]
    fn validate_rejects_degenerate_configs() {
        assert!(WalkConfig { window: 0, ..cfg() }.validate().is_err());
        assert!(WalkConfig { q: 0.0, ..cfg() }.validate().is_err());
        assert!(WalkConfig { p: -1.0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn external_identity_command() {
        let h = Hypergraph::new(3, &[vec![0, 1, 2]], None, None).unwrap();
        let s = build_star_expansion(&h);
        let dir = tempfile::tempdir().unwrap();
        let prepared = dir.path().join("prepared.txt");
        std::fs::write(&prepared, "4 2\n3 1 1\n0 0 0\n1 0.5 0\n2 0 0.5\n").unwrap();
        let m = external_embed(&s, &format!("cat {} > {{output}}", prepared.display())).unwrap();
        assert_eq!(m.rows(), 4);
        assert_eq!(m.row(3), &[1.0, 1.0]);
        assert_eq!(m.row(1), &[0.5, 0.0]);
    }

    #[test]
    fn external_edgelist_matches_star_graph() {
        let h = Hypergraph::new(3, &[vec![0, 1], vec![1, 2]], Some(vec![2.0, 1.0]), None).unwrap();
        let s = build_star_expansion(&h);
        let dir = tempfile::tempdir().unwrap();
        let copy = dir.path().join("copy.txt");
        let r = external_embed(&s, &format!("cp {{input}} {}; exit 3", copy.display()));
        assert!(matches!(r, Err(Error::ExternalCommand { .. })));
        let text = std::fs::read_to_string(copy).unwrap();
        assert_eq!(text, "0 3 2\n1 3 2\n1 4 1\n2 4 1\n");
    }

    #[test]
    fn external_missing_vertex() {
        let h = Hypergraph::new(4, &[vec![0, 1, 2, 3]], None, None).unwrap();
        let s = build_star_expansion(&h);
        let r = external_embed(&s, "printf '4 1\\n0 1\\n1 1\\n2 1\\n4 1\\n' > {output}");
        match r {
            Err(e @ Error::MissingEmbeddings { .. }) => {
                assert_eq!(e.to_string(), "missing embeddings for 1 vertex: 3")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn external_failure_carries_stderr() {
        let h = Hypergraph::new(2, &[vec![0, 1]], None, None).unwrap();
        let s = build_star_expansion(&h);
        match external_embed(&s, "echo boom >&2; exit 1") {
            Err(Error::ExternalCommand { stderr, .. }) => assert_eq!(stderr, "boom"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
