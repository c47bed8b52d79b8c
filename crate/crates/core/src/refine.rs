//! Projection of coarse embeddings onto a finer level, and refinement by
//! damped neighbour averaging on the star graph.
//!
//! One refinement iteration computes, for every vertex `u`,
//!
//! ```text
//! mean_u = sum_v w_uv z_v / sum_v w_uv
//! z'_u   = (1 - omega) z_u + omega mean_u
//! ```
//!
//! reading only the previous iterate (Jacobi form), which makes the result
//! independent of the order and thread count in which vertices are updated.

use rayon::prelude::*;

use crate::coarsen::MergeMap;
use crate::error::{Error, Result};
use crate::graph::CsrGraph;
use crate::hypergraph::Hypergraph;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    /// Weight of the neighbourhood mean, in `[0, 1]`.
    pub omega: f64,
    pub max_iterations: usize,
    /// Stop early once the largest per-vertex update (L2) falls below this.
    pub epsilon: Option<f64>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            omega: 0.5,
            max_iterations: 80,
            epsilon: None,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::invalid(format!(
                "omega must lie in [0, 1], got {}",
                self.omega
            )));
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0) {
                return Err(Error::invalid("epsilon must be nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Refined {
    pub embedding: Matrix,
    /// Iterations actually performed.
    pub iterations: usize,
}

/// Smooths `z0` over `g`. Vertices without neighbours (or whose edges all
/// have zero weight) pass through unchanged.
pub fn refine(g: &CsrGraph, z0: &Matrix, cfg: &RefineConfig) -> Result<Refined> {
    cfg.validate()?;
    if z0.rows() != g.num_vertices() {
        return Err(Error::Dimension(format!(
            "{} embedding rows for {} vertices",
            z0.rows(),
            g.num_vertices()
        )));
    }
    let d = z0.cols();
    if cfg.omega == 0.0 || cfg.max_iterations == 0 || d == 0 {
        return Ok(Refined {
            embedding: z0.clone(),
            iterations: if cfg.omega == 0.0 {
                cfg.max_iterations
            } else {
                0
            },
        });
    }
    let omega = cfg.omega;
    let mut cur = z0.clone();
    let mut next = z0.clone();
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let src = &cur;
        let max_step = next
            .as_mut_slice()
            .par_chunks_mut(d)
            .enumerate()
            .map(|(u, out)| {
                let zu = src.row(u);
                let total: f64 = g.edge_weights(u).iter().sum();
                if !(total > 0.0) {
                    out.copy_from_slice(zu);
                    return 0.0;
                }
                // Differences against z_u keep constant signals exactly fixed.
                out.fill(0.0);
                for (&v, &w) in g.neighbors(u).iter().zip(g.edge_weights(u)) {
                    for ((o, zv), zu) in out.iter_mut().zip(src.row(v as usize)).zip(zu) {
                        *o += w * (zv - zu);
                    }
                }
                let mut step2 = 0.0;
                for (o, zu) in out.iter_mut().zip(zu) {
                    let delta = omega * (*o / total);
                    step2 += delta * delta;
                    *o = zu + delta;
                }
                step2.sqrt()
            })
            .reduce(|| 0.0, f64::max);
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        if cfg.epsilon.is_some_and(|eps| max_step < eps) {
            break;
        }
    }
    Ok(Refined {
        embedding: cur,
        iterations,
    })
}

/// Lifts an embedding of the coarse star graph onto the fine one.
///
/// Fine nodes copy their representative's row and surviving hyperedges copy
/// their coarse hyperedge's row. A removed hyperedge has no coarse
/// counterpart and starts at the mean of its pins' projected rows.
pub fn project(coarse: &Matrix, map: &MergeMap, fine: &Hypergraph) -> Result<Matrix> {
    let expected = map.coarse_nodes + map.coarse_hyperedges;
    if coarse.rows() != expected {
        return Err(Error::Dimension(format!(
            "coarse embedding has {} rows, coarse star graph has {expected} vertices",
            coarse.rows()
        )));
    }
    if map.node_rep.len() != fine.num_nodes() || map.hedge_rep.len() != fine.num_hyperedges() {
        return Err(Error::Dimension(
            "merge map does not match the fine hypergraph".into(),
        ));
    }
    let n = fine.num_nodes();
    let d = coarse.cols();
    let mut out = Matrix::zeros(n + fine.num_hyperedges(), d);
    if d == 0 {
        return Ok(out);
    }
    let (nodes, hedges) = out.as_mut_slice().split_at_mut(n * d);
    nodes
        .par_chunks_mut(d)
        .zip(&map.node_rep)
        .for_each(|(row, &r)| row.copy_from_slice(coarse.row(r as usize)));
    let nodes: &[f64] = nodes;
    hedges
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(e, row)| match map.hedge_rep[e] {
            Some(r) => row.copy_from_slice(coarse.row(map.coarse_nodes + r as usize)),
            None => {
                let pins = fine.pins(e);
                for &v in pins {
                    let src = &nodes[v as usize * d..(v as usize + 1) * d];
                    for (acc, x) in row.iter_mut().zip(src) {
                        *acc += x;
                    }
                }
                let k = pins.len() as f64;
                row.iter_mut().for_each(|a| *a /= k);
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::star::build_star_expansion;

    fn cfg(omega: f64, k: usize) -> RefineConfig {
        RefineConfig {
            omega,
            max_iterations: k,
            epsilon: None,
        }
    }

    #[test]
    fn one_hyperedge_one_iteration() {
        let h = Hypergraph::new(2, &[vec![0, 1]], None, None).unwrap();
        let s = build_star_expansion(&h);
        let z0 = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 0.0]]).unwrap();
        let r = refine(&s, &z0, &cfg(0.5, 1)).unwrap();
        assert_eq!(r.embedding.row(0), &[0.0, 0.0]);
        assert_eq!(r.embedding.row(1), &[1.0, 0.0]);
        assert_eq!(r.embedding.row(2), &[0.5, 0.0]);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn omega_zero_is_identity() {
        let h = Hypergraph::new(3, &[vec![0, 1, 2]], None, None).unwrap();
        let s = build_star_expansion(&h);
        let z0 = Matrix::from_rows(&[[-0.0, 1.5], [2.0, -3.0], [1e-300, 7.0], [4.0, 4.0]]).unwrap();
        let r = refine(&s, &z0, &cfg(0.0, 25)).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r.embedding), bits(&z0));
    }

    #[test]
    fn constant_is_fixed() {
        let h =
            Hypergraph::new(4, &[vec![0, 1, 2], vec![2, 3]], Some(vec![0.1, 0.7]), None).unwrap();
        let s = build_star_expansion(&h);
        let z0 = Matrix::from_vec(6, 3, [0.3, -1.7, 2.2].repeat(6)).unwrap();
        let r = refine(&s, &z0, &cfg(0.7, 40)).unwrap();
        assert_eq!(r.embedding, z0);
    }

    #[test]
    fn isolated_vertex_passes_through() {
        let g = CsrGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        let z0 = Matrix::from_rows(&[[0.0], [4.0], [9.0]]).unwrap();
        let r = refine(&g, &z0, &cfg(1.0, 1)).unwrap();
        assert_eq!(r.embedding.as_slice(), &[4.0, 0.0, 9.0]);
    }

    #[test]
    fn epsilon_stops_early() {
        let g = CsrGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let z0 = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        // omega 0.25: the gap shrinks by half each iteration; steps are gap/4.
        let r = refine(
            &g,
            &z0,
            &RefineConfig {
                omega: 0.25,
                max_iterations: 100,
                epsilon: Some(1e-3),
            },
        )
        .unwrap();
        // Step at iteration i is 0.25 * 0.5^(i-1); first below 1e-3 at i = 9.
        assert_eq!(r.iterations, 9);
    }

    #[test]
    fn invalid_config_and_shapes() {
        let g = CsrGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        let z0 = Matrix::zeros(2, 1);
        assert!(refine(&g, &z0, &cfg(1.5, 1)).is_err());
        assert!(refine(&g, &Matrix::zeros(3, 1), &cfg(0.5, 1)).is_err());
    }

    #[test]
    fn projection_rules() {
        // Fine: nodes a,b,c; e0 = {a,b} removed, e1 = {b,c} survives as coarse e0.
        let fine = Hypergraph::new(3, &[vec![0, 1], vec![1, 2]], None, None).unwrap();
        let map = MergeMap {
            node_rep: vec![0, 0, 1],
            hedge_rep: vec![None, Some(0)],
            assignment: vec![Some(0), Some(0), Some(1)],
            coarse_nodes: 2,
            coarse_hyperedges: 1,
        };
        let coarse = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [9.0, 9.0]]).unwrap();
        let p = project(&coarse, &map, &fine).unwrap();
        assert_eq!(p.row(0), &[1.0, 2.0]);
        assert_eq!(p.row(1), &[1.0, 2.0]);
        assert_eq!(p.row(2), &[3.0, 4.0]);
        assert_eq!(p.row(3), &[1.0, 2.0]);
        assert_eq!(p.row(4), &[9.0, 9.0]);
    }

    #[test]
    fn removed_hyperedge_gets_pin_mean() {
        let fine = Hypergraph::new(2, &[vec![0, 1]], None, None).unwrap();
        let map = MergeMap {
            node_rep: vec![0, 1],
            hedge_rep: vec![None],
            assignment: vec![Some(0), Some(0)],
            coarse_nodes: 2,
            coarse_hyperedges: 0,
        };
        let coarse = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        let p = project(&coarse, &map, &fine).unwrap();
        assert_eq!(p.row(2), &[1.0, 1.0]);
        assert!(project(&Matrix::zeros(3, 2), &map, &fine).is_err());
    }
}
