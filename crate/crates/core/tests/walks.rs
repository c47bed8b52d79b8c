use std::collections::HashMap;

use hypervec::{embed_graph, generate_walks, CsrGraph, WalkConfig};

/// Biased second-order weight of stepping `prev -> cur -> next`, straight
/// from the definition.
fn biased(edges: &[(u32, u32, f64)], p: f64, q: f64, prev: u32, cur: u32, next: u32) -> f64 {
    let w = |a: u32, b: u32| {
        edges
            .iter()
            .find(|&&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a))
            .map(|e| e.2)
    };
    let Some(base) = w(cur, next) else { return 0.0 };
    let bias = if next == prev {
        1.0 / p
    } else if w(prev, next).is_some() {
        1.0
    } else {
        1.0 / q
    };
    base * bias
}

#[test]
fn transition_frequencies_match_biased_distribution() {
    // Triangle 0-1-2 with a pendant 3 on vertex 2, mixed weights.
    let edges = [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 1.0), (2, 3, 0.5)];
    let g = CsrGraph::from_edges(4, &edges).unwrap();
    let (p, q) = (2.0, 0.5);
    let cfg = WalkConfig {
        walks_per_vertex: 250,
        walk_length: 102,
        p,
        q,
        seed: 17,
        ..Default::default()
    };
    let walks = generate_walks(&g, &cfg);

    let mut counts: HashMap<(u32, u32), HashMap<u32, usize>> = HashMap::new();
    let mut steps = 0;
    for w in walks.iter() {
        for t in w.windows(3) {
            *counts
                .entry((t[0], t[1]))
                .or_default()
                .entry(t[2])
                .or_default() += 1;
            steps += 1;
        }
    }
    assert!(steps >= 100_000, "only {steps} second-order steps");

    for (&(prev, cur), nexts) in &counts {
        let total: usize = nexts.values().sum();
        let weights: Vec<(u32, f64)> = (0..4)
            .map(|x| (x, biased(&edges, p, q, prev, cur, x)))
            .collect();
        let z: f64 = weights.iter().map(|w| w.1).sum();
        for (x, w) in weights {
            let pr = w / z;
            let seen = *nexts.get(&x).unwrap_or(&0) as f64;
            let expect = pr * total as f64;
            let sigma = (total as f64 * pr * (1.0 - pr)).sqrt();
            assert!(
                (seen - expect).abs() <= 3.0 * sigma + 1e-9,
                "({prev},{cur})->{x}: saw {seen}, expected {expect:.1} +- {sigma:.1}"
            );
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

#[test]
fn disconnected_cliques_separate() {
    let mut edges = Vec::new();
    for base in [0u32, 5] {
        for u in 0..5 {
            for v in u + 1..5 {
                edges.push((base + u, base + v, 1.0));
            }
        }
    }
    let g = CsrGraph::from_edges(10, &edges).unwrap();
    let cfg = WalkConfig {
        walks_per_vertex: 20,
        walk_length: 20,
        window: 4,
        dim: 2,
        epochs: 5,
        seed: 3,
        ..Default::default()
    };
    let z = embed_graph(&g, &cfg).unwrap();
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for u in 0..10 {
        for v in u + 1..10 {
            let c = cosine(z.row(u), z.row(v));
            if (u < 5) == (v < 5) {
                intra.push(c);
            } else {
                inter.push(c);
            }
        }
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    assert!(
        mean(&intra) > mean(&inter),
        "intra {} vs inter {}",
        mean(&intra),
        mean(&inter)
    );
}

#[test]
fn visits_follow_weighted_degree() {
    // With p = q = 1 the walk is a plain weighted random walk, whose
    // stationary distribution is proportional to weighted degree.
    let edges = [
        (0, 1, 1.0),
        (1, 2, 3.0),
        (2, 3, 1.0),
        (3, 0, 2.0),
        (0, 2, 1.0),
    ];
    let g = CsrGraph::from_edges(4, &edges).unwrap();
    let cfg = WalkConfig {
        walks_per_vertex: 200,
        walk_length: 200,
        p: 1.0,
        q: 1.0,
        seed: 5,
        ..Default::default()
    };
    let walks = generate_walks(&g, &cfg);
    let mut visits = [0usize; 4];
    let mut total = 0;
    for w in walks.iter() {
        // Skip the start, which is not drawn from the stationary distribution.
        for &v in &w[20..] {
            visits[v as usize] += 1;
            total += 1;
        }
    }
    let deg: Vec<f64> = (0..4).map(|u| g.weighted_degree(u)).collect();
    let sum: f64 = deg.iter().sum();
    let chi2: f64 = (0..4)
        .map(|u| {
            let e = deg[u] / sum * total as f64;
            (visits[u] as f64 - e).powi(2) / e
        })
        .sum();
    // Consecutive visits are correlated, so the bound is loose: 3 degrees of
    // freedom would give 16.3 at the 0.1% level for independent draws.
    assert!(chi2 < 60.0, "chi2 {chi2}, visits {visits:?}");
}
