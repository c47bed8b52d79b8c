//! Coarsen, embed the coarsest star graph, then project and refine back down
//! to the input level, timing each phase.

use std::fmt;
use std::io::{BufRead, Write};
use std::time::Instant;

use crate::coarsen::{coarsen_hierarchy, AssignKind, AssignPolicy};
use crate::embed::{embed_graph, external_embed, WalkConfig};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::matrix::Matrix;
use crate::refine::{project, refine, RefineConfig};
use crate::star::build_star_expansion;

#[derive(Clone, Debug, PartialEq)]
pub enum InitEmbedder {
    /// Built-in random-walk skip-gram. Its `dim` must equal the pipeline's
    /// and its `seed` is replaced by the pipeline seed.
    Walks(WalkConfig),
    /// Shell command template with `{input}` and `{output}` placeholders.
    External(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Number of coarsening steps to attempt.
    pub levels: usize,
    /// Stop coarsening once a level has fewer nodes than this.
    pub min_size: usize,
    pub policy: AssignKind,
    pub embedder: InitEmbedder,
    /// Refinement used at every level without an override.
    pub refine: RefineConfig,
    /// `refine_per_level[i]`, when present, replaces `refine` at level `i`
    /// (0 is the input hypergraph).
    pub refine_per_level: Vec<Option<RefineConfig>>,
    pub dim: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            levels: 2,
            min_size: 100,
            policy: AssignKind::CosineFeatures,
            embedder: InitEmbedder::Walks(WalkConfig::default()),
            refine: RefineConfig::default(),
            refine_per_level: Vec::new(),
            dim: 128,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        if let InitEmbedder::Walks(w) = &self.embedder {
            if w.dim != self.dim {
                return Err(Error::invalid(format!(
                    "walk embedder dim {} differs from pipeline dim {}",
                    w.dim, self.dim
                )));
            }
            w.validate()?;
        }
        self.refine.validate()?;
        for r in self.refine_per_level.iter().flatten() {
            r.validate()?;
        }
        Ok(())
    }

    pub fn refine_at(&self, level: usize) -> &RefineConfig {
        self.refine_per_level
            .get(level)
            .and_then(Option::as_ref)
            .unwrap_or(&self.refine)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub nodes: usize,
    pub hyperedges: usize,
    pub coarsen_secs: f64,
    /// Nonzero only at the coarsest level.
    pub init_secs: f64,
    pub refine_secs: f64,
    pub refine_iterations: usize,
}

/// Per-level sizes and timings; `levels[0]` is the input hypergraph.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineReport {
    pub levels: Vec<LevelStats>,
}

const CSV_HEADER: &str =
    "level,nodes,hyperedges,coarsen_secs,init_secs,refine_secs,refine_iterations";

impl PipelineReport {
    pub fn coarsen_secs(&self) -> f64 {
        self.levels.iter().map(|l| l.coarsen_secs).sum()
    }

    pub fn init_secs(&self) -> f64 {
        self.levels.iter().map(|l| l.init_secs).sum()
    }

    pub fn refine_secs(&self) -> f64 {
        self.levels.iter().map(|l| l.refine_secs).sum()
    }

    pub fn total_secs(&self) -> f64 {
        self.coarsen_secs() + self.init_secs() + self.refine_secs()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for l in &self.levels {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                l.level,
                l.nodes,
                l.hyperedges,
                l.coarsen_secs,
                l.init_secs,
                l.refine_secs,
                l.refine_iterations
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<PipelineReport> {
        let mut levels = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let lineno = i + 1;
            if i == 0 {
                if line != CSV_HEADER {
                    return Err(Error::parse(lineno, "unexpected report header"));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 7 fields, found {}", f.len()),
                ));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(lineno, format!("bad integer {s:?}")))
            };
            let real = |s: &str| match s.parse::<f64>() {
                Ok(x) if x >= 0.0 => Ok(x),
                _ => Err(Error::parse(lineno, format!("bad time {s:?}"))),
            };
            levels.push(LevelStats {
                level: int(f[0])?,
                nodes: int(f[1])?,
                hyperedges: int(f[2])?,
                coarsen_secs: real(f[3])?,
                init_secs: real(f[4])?,
                refine_secs: real(f[5])?,
                refine_iterations: int(f[6])?,
            });
        }
        if levels.is_empty() {
            return Err(Error::invalid("report has no levels"));
        }
        Ok(PipelineReport { levels })
    }
}

impl fmt::Display for PipelineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>5} {:>10} {:>10} {:>11} {:>11} {:>11}",
            "level", "nodes", "hyperedges", "coarsen(s)", "init(s)", "refine(s)"
        )?;
        for l in &self.levels {
            writeln!(
                f,
                "{:>5} {:>10} {:>10} {:>11.3} {:>11.3} {:>11.3}",
                l.level, l.nodes, l.hyperedges, l.coarsen_secs, l.init_secs, l.refine_secs
            )?;
        }
        write!(
            f,
            "{:>5} {:>10} {:>10} {:>11.3} {:>11.3} {:>11.3}\ntotal {:.3} s",
            "sum",
            "",
            "",
            self.coarsen_secs(),
            self.init_secs(),
            self.refine_secs(),
            self.total_secs()
        )
    }
}

/// Runs the full multi-level pipeline on `h`.
///
/// Returns one row per star vertex of `h` (nodes first, then hyperedges).
/// The coarsest level is embedded, then every finer level is projected and
/// refined. With `levels == 0` this is the initial embedder on `h` followed
/// by one refinement pass.
pub fn run_pipeline(h: &Hypergraph, cfg: &PipelineConfig) -> Result<(Matrix, PipelineReport)> {
    cfg.validate()?;
    let policy = AssignPolicy::new(cfg.policy, cfg.seed);
    let hierarchy = coarsen_hierarchy(h, cfg.levels, cfg.min_size, &policy)?;
    let mut report = PipelineReport {
        levels: hierarchy
            .levels
            .iter()
            .zip(&hierarchy.coarsen_secs)
            .enumerate()
            .map(|(level, (g, &secs))| LevelStats {
                level,
                nodes: g.num_nodes(),
                hyperedges: g.num_hyperedges(),
                coarsen_secs: secs,
                ..Default::default()
            })
            .collect(),
    };

    let top = hierarchy.depth();
    let start = Instant::now();
    let star = build_star_expansion(hierarchy.coarsest());
    let mut emb = match &cfg.embedder {
        InitEmbedder::Walks(w) => embed_graph(
            &star,
            &WalkConfig {
                seed: cfg.seed,
                ..*w
            },
        )?,
        InitEmbedder::External(cmd) => external_embed(&star, cmd)?,
    };
    if emb.cols() != cfg.dim {
        return Err(Error::Dimension(format!(
            "initial embedding has dim {}, pipeline expects {}",
            emb.cols(),
            cfg.dim
        )));
    }
    report.levels[top].init_secs = start.elapsed().as_secs_f64();

    // Only a flat run refines the level it embedded; otherwise refinement
    // starts one level below the coarsest.
    if top == 0 {
        let start = Instant::now();
        let refined = refine(&star, &emb, cfg.refine_at(0))?;
        emb = refined.embedding;
        report.levels[0].refine_secs = start.elapsed().as_secs_f64();
        report.levels[0].refine_iterations = refined.iterations;
    }

    for level in (0..top).rev() {
        let start = Instant::now();
        let fine = &hierarchy.levels[level];
        let projected = project(&emb, &hierarchy.maps[level], fine)?;
        let star = build_star_expansion(fine);
        let refined = refine(&star, &projected, cfg.refine_at(level))?;
        emb = refined.embedding;
        report.levels[level].refine_secs = start.elapsed().as_secs_f64();
        report.levels[level].refine_iterations = refined.iterations;
    }
    Ok((emb, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{planted, PlantedConfig};

    fn small() -> PipelineConfig {
        PipelineConfig {
            levels: 2,
            min_size: 10,
            embedder: InitEmbedder::Walks(WalkConfig {
                walks_per_vertex: 2,
                walk_length: 20,
                window: 3,
                dim: 16,
                ..Default::default()
            }),
            dim: 16,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn levels_shrink_and_rows_cover_star_graph() {
        let p = planted(&PlantedConfig::default());
        let (emb, report) = run_pipeline(&p.hypergraph, &small()).unwrap();
        assert_eq!(emb.rows(), 1600);
        assert_eq!(emb.cols(), 16);
        assert!(emb.is_finite());
        assert_eq!(report.levels.len(), 3);
        assert!(report.levels.windows(2).all(|w| w[1].nodes < w[0].nodes));
        assert!(report.levels[2].init_secs > 0.0);
        assert_eq!(report.levels[0].init_secs, 0.0);
    }

    #[test]
    fn zero_levels_zero_iterations_is_initial_embedding() {
        let p = planted(&PlantedConfig::default());
        let mut cfg = small();
        cfg.levels = 0;
        cfg.refine.max_iterations = 0;
        let (emb, report) = run_pipeline(&p.hypergraph, &cfg).unwrap();
        let InitEmbedder::Walks(w) = &cfg.embedder else {
            unreachable!()
        };
        let star = build_star_expansion(&p.hypergraph);
        let direct = embed_graph(
            &star,
            &WalkConfig {
                seed: cfg.seed,
                ..*w
            },
        )
        .unwrap();
        assert_eq!(emb, direct);
        assert_eq!(report.levels.len(), 1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = planted(&PlantedConfig::default());
        let mut cfg = small();
        cfg.dim = 32;
        assert!(run_pipeline(&p.hypergraph, &cfg).is_err());
    }

    #[test]
    fn per_level_override() {
        let mut cfg = small();
        cfg.refine_per_level = vec![
            None,
            Some(RefineConfig {
                omega: 0.0,
                ..Default::default()
            }),
        ];
        assert_eq!(cfg.refine_at(0), &cfg.refine);
        assert_eq!(cfg.refine_at(1).omega, 0.0);
        assert_eq!(cfg.refine_at(7), &cfg.refine);
    }

    #[test]
    fn csv_round_trip() {
        let r = PipelineReport {
            levels: vec![
                LevelStats {
                    level: 0,
                    nodes: 10,
                    hyperedges: 4,
                    refine_secs: 0.25,
                    refine_iterations: 80,
                    ..Default::default()
                },
                LevelStats {
                    level: 1,
                    nodes: 3,
                    hyperedges: 2,
                    coarsen_secs: 0.125,
                    init_secs: 1.5,
                    refine_secs: 0.0625,
                    refine_iterations: 80,
                },
            ],
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(PipelineReport::read_csv(&buf[..]).unwrap(), r);
        assert_eq!(r.total_secs(), 1.9375);
        assert!(r.to_string().contains("total 1.938 s"));
        assert!(PipelineReport::read_csv(&b"level,nodes\n"[..]).is_err());
    }
}
