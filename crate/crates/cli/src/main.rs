//! `hypervec` command-line frontend.
//!
//! Exit status: 0 on success, 1 on usage errors (bad flags or option values),
//! 2 when the input data cannot be processed.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypervec::eval::{
    evaluate_classification, evaluate_hyperedge_prediction, hide_hyperedges, mean_std, LinkParams,
    LogisticParams, Scaling,
};
use hypervec::io::{self as hio, Format};
use hypervec::{
    build_hypergraph, build_star_expansion, coarsen_hierarchy, embed_graph, external_embed, refine,
    run_pipeline, AssignKind, AssignPolicy, Cleaned, InitEmbedder, PipelineConfig, PipelineReport,
    RefineConfig, WalkConfig,
};

#[derive(Parser)]
#[command(name = "hypervec", version, about = "Multi-level hypergraph embedding")]
struct Cli {
    /// Worker threads for the parallel phases (default: all cores).
    #[arg(long, global = true, env = "HYPERVEC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coarsen a hypergraph and write the coarsest level.
    Coarsen(CoarsenArgs),
    /// Write the star expansion as a weighted edge list.
    Star(StarArgs),
    /// Embed the star graph of a hypergraph without coarsening or refinement.
    EmbedInit(EmbedInitArgs),
    /// Refine an existing embedding on a hypergraph's star graph.
    Refine(RefineArgs),
    /// Coarsen, embed, then project and refine back to the input.
    Pipeline(PipelineArgs),
    /// Node classification accuracy over random train/test splits.
    EvalNodes(EvalNodesArgs),
    /// Hide hyperedges, embed the rest, and score hyperedge prediction.
    EvalHyperedges(EvalHyperedgesArgs),
    /// Print a per-level breakdown from a saved pipeline report.
    Stats(StatsArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Hypergraph file.
    #[arg(long)]
    input: PathBuf,
    /// `hmetis` or `edgelist`.
    #[arg(long, default_value = "hmetis")]
    format: Format,
    /// Node features, one `id v1 ... vk` line per node.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args)]
struct CoarsenOpts {
    /// Coarsening steps.
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Stop coarsening below this many nodes.
    #[arg(long, default_value_t = 100)]
    min_size: usize,
    /// `cosine` (needs features), `max-weight` or `max-degree`.
    #[arg(long)]
    policy: Option<AssignKind>,
}

#[derive(Args)]
struct WalkOpts {
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    walks_per_vertex: usize,
    #[arg(long, default_value_t = 80)]
    walk_length: usize,
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Return parameter.
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    /// In-out parameter.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 5)]
    negative: usize,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    /// Use an external embedder instead: a shell command with `{input}`
    /// (star edge list) and `{output}` (embedding file) placeholders.
    #[arg(long)]
    external: Option<String>,
}

impl WalkOpts {
    fn walk_config(&self, seed: u64) -> WalkConfig {
        WalkConfig {
            walks_per_vertex: self.walks_per_vertex,
            walk_length: self.walk_length,
            window: self.window,
            p: self.p,
            q: self.q,
            negative_samples: self.negative,
            epochs: self.epochs,
            learning_rate: self.lr,
            dim: self.dim,
            seed,
        }
    }

    fn embedder(&self, seed: u64) -> InitEmbedder {
        match &self.external {
            Some(cmd) => InitEmbedder::External(cmd.clone()),
            None => InitEmbedder::Walks(self.walk_config(seed)),
        }
    }
}

#[derive(Args)]
struct RefineOpts {
    /// Weight of the neighbourhood mean, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    omega: f64,
    #[arg(long, default_value_t = 80)]
    refine_iters: usize,
    /// Stop refining once the largest per-vertex update is below this.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl RefineOpts {
    fn config(&self) -> RefineConfig {
        RefineConfig {
            omega: self.omega,
            max_iterations: self.refine_iters,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Args)]
struct ClassifierOpts {
    #[arg(long, default_value_t = 1.0)]
    clf_lr: f64,
    #[arg(long, default_value_t = 1000)]
    clf_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    clf_l2: f64,
    /// Input standardization; defaults to global for node classification
    /// and per-feature for hyperedge prediction.
    #[arg(long, value_enum)]
    clf_scaling: Option<ScalingArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Global,
    PerFeature,
}

impl ClassifierOpts {
    fn params(&self, default: Scaling) -> Result<LogisticParams, CliError> {
        if !(self.clf_lr > 0.0) || !(self.clf_l2 >= 0.0) {
            return Err(CliError::Usage(
                "classifier rate must be positive and l2 nonnegative".into(),
            ));
        }
        Ok(LogisticParams {
            learning_rate: self.clf_lr,
            epochs: self.clf_epochs,
            l2: self.clf_l2,
            scaling: match self.clf_scaling {
                None => default,
                Some(ScalingArg::Global) => Scaling::Global,
                Some(ScalingArg::PerFeature) => Scaling::PerFeature,
            },
        })
    }
}

#[derive(Args)]
struct CoarsenArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    coarsen: CoarsenOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coarsest hypergraph, hMETIS format.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StarArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedInitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    walk: WalkOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    /// Hypergraph whose star graph is used for smoothing.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "hmetis")]
    format: Format,
    /// Embedding with one row per star vertex.
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    refine: RefineOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    coarsen: CoarsenOpts,
    #[command(flatten)]
    walk: WalkOpts,
    #[command(flatten)]
    refine: RefineOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-level statistics as CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalNodesArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// `id label` per line.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 20)]
    splits: usize,
    #[arg(long, default_value_t = 0.04)]
    train_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    classifier: ClassifierOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalHyperedgesArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.2)]
    hide_frac: f64,
    #[arg(long, default_value_t = 5)]
    neg_ratio: usize,
    /// Share of labelled tuples held out for scoring.
    #[arg(long, default_value_t = 0.5)]
    test_frac: f64,
    /// Independent hide/embed/score repetitions.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[command(flatten)]
    coarsen: CoarsenOpts,
    #[command(flatten)]
    walk: WalkOpts,
    #[command(flatten)]
    refine: RefineOpts,
    #[command(flatten)]
    classifier: ClassifierOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// CSV written by `pipeline --report`.
    #[arg(long)]
    report: PathBuf,
}

enum CliError {
    Usage(String),
    Data(hypervec::Error),
}

impl From<hypervec::Error> for CliError {
    fn from(e: hypervec::Error) -> Self {
        CliError::Data(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(e: hypervec::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(hypervec::Error::Invalid(format!("{}: {e}", path.display()))))
}

/// Writes `path` through a temporary file in the same directory, so a failed
/// run never leaves partial output behind. Without a path, writes to stdout.
fn emit<F>(path: Option<&Path>, write: F) -> CliResult
where
    F: FnOnce(&mut dyn Write) -> hypervec::Result<()>,
{
    match path {
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w)?;
            w.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let tmp = tempfile::NamedTempFile::new_in(dir)?;
            let mut w = BufWriter::new(tmp);
            write(&mut w)?;
            let tmp = w.into_inner().map_err(|e| e.into_error())?;
            tmp.persist(path).map_err(|e| e.error)?;
        }
    }
    Ok(())
}

fn load(args: &InputArgs) -> CliResult<Cleaned> {
    let raw = hio::parse_hypergraph(open(&args.input)?, args.format)?;
    let features = match &args.features {
        Some(p) => Some(hio::parse_features(open(p)?, raw.node_universe())?),
        None => None,
    };
    Ok(build_hypergraph(&raw, features.as_ref())?)
}

fn policy_kind(opt: Option<AssignKind>, has_features: bool) -> AssignKind {
    opt.unwrap_or(if has_features {
        AssignKind::CosineFeatures
    } else {
        AssignKind::MaxWeight
    })
}

fn pipeline_config(
    coarsen: &CoarsenOpts,
    walk: &WalkOpts,
    refine: &RefineOpts,
    seed: u64,
    has_features: bool,
) -> PipelineConfig {
    PipelineConfig {
        levels: coarsen.levels,
        min_size: coarsen.min_size,
        policy: policy_kind(coarsen.policy, has_features),
        embedder: walk.embedder(seed),
        refine: refine.config(),
        refine_per_level: Vec::new(),
        dim: walk.dim,
        seed,
    }
}

fn cmd_coarsen(a: CoarsenArgs) -> CliResult {
    let c = load(&a.input)?;
    let h = &c.hypergraph;
    let kind = policy_kind(a.coarsen.policy, h.features().is_some());
    let hierarchy = coarsen_hierarchy(
        h,
        a.coarsen.levels,
        a.coarsen.min_size,
        &AssignPolicy::new(kind, a.seed),
    )?;
    for (i, (g, secs)) in hierarchy
        .levels
        .iter()
        .zip(&hierarchy.coarsen_secs)
        .enumerate()
    {
        eprintln!(
            "level {i}: {} nodes, {} hyperedges, {secs:.3} s",
            g.num_nodes(),
            g.num_hyperedges()
        );
    }
    emit(a.out.as_deref(), |w| {
        hio::write_hypergraph(w, hierarchy.coarsest())
    })
}

fn cmd_star(a: StarArgs) -> CliResult {
    let c = load(&a.input)?;
    let star = build_star_expansion(&c.hypergraph);
    eprintln!(
        "{} vertices, {} edges",
        star.num_vertices(),
        star.num_edges()
    );
    emit(a.out.as_deref(), |w| hio::write_edgelist(w, &star))
}

fn cmd_embed_init(a: EmbedInitArgs) -> CliResult {
    let cfg = a.walk.walk_config(a.seed);
    if a.walk.external.is_none() {
        cfg.validate().map_err(usage)?;
    }
    let c = load(&a.input)?;
    let star = build_star_expansion(&c.hypergraph);
    let emb = match &a.walk.external {
        Some(cmd) => external_embed(&star, cmd)?,
        None => embed_graph(&star, &cfg)?,
    };
    let ids = c.ids.star_ids();
    emit(a.out.as_deref(), |w| {
        hio::write_embeddings(w, &emb, Some(&ids))
    })
}

fn cmd_refine(a: RefineArgs) -> CliResult {
    let cfg = a.refine.config();
    cfg.validate().map_err(usage)?;
    let raw = hio::parse_hypergraph(open(&a.graph)?, a.format)?;
    let c = build_hypergraph(&raw, None)?;
    let star = build_star_expansion(&c.hypergraph);
    let ids = c.ids.star_ids();
    let z0 = hio::read_embeddings(open(&a.embeddings)?)?.arrange(&ids)?;
    let r = refine(&star, &z0, &cfg)?;
    eprintln!("{} iterations", r.iterations);
    emit(a.out.as_deref(), |w| {
        hio::write_embeddings(w, &r.embedding, Some(&ids))
    })
}

fn cmd_pipeline(a: PipelineArgs) -> CliResult {
    let has_features = a.input.features.is_some();
    let cfg = pipeline_config(&a.coarsen, &a.walk, &a.refine, a.seed, has_features);
    cfg.validate().map_err(usage)?;
    let c = load(&a.input)?;
    let (emb, report) = run_pipeline(&c.hypergraph, &cfg)?;
    let ids = c.ids.star_ids();
    if let Some(path) = &a.report {
        emit(Some(path), |w| Ok(report.write_csv(w)?))?;
    }
    emit(a.out.as_deref(), |w| {
        hio::write_embeddings(w, &emb, Some(&ids))
    })?;
    if a.out.is_some() {
        println!("{report}");
    } else {
        eprintln!("{report}");
    }
    Ok(())
}

fn check_fraction(name: &str, x: f64) -> CliResult {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{name} must lie in [0, 1], got {x}"
        )))
    }
}

fn cmd_eval_nodes(a: EvalNodesArgs) -> CliResult {
    check_fraction("--train-frac", a.train_frac)?;
    let params = a.classifier.params(Scaling::Global)?;
    let labels = hio::parse_labels(open(&a.labels)?)?;
    if labels.is_empty() {
        return Err(hypervec::Error::invalid("label file is empty").into());
    }
    let emb = hio::read_embeddings(open(&a.embeddings)?)?;
    let (ids, y): (Vec<usize>, Vec<u32>) = labels.iter().unzip();
    let x = emb.arrange(&ids)?;
    let r = evaluate_classification(
        &x,
        &y,
        labels.num_classes(),
        a.splits,
        a.train_frac,
        a.seed,
        &params,
    )?;
    emit(a.out.as_deref(), |w| {
        writeln!(w, "split,accuracy,std")?;
        for (i, acc) in r.accuracies.iter().enumerate() {
            writeln!(w, "{i},{acc},")?;
        }
        writeln!(w, "mean,{},{}", r.mean, r.std)?;
        Ok(())
    })
}

fn cmd_eval_hyperedges(a: EvalHyperedgesArgs) -> CliResult {
    check_fraction("--hide-frac", a.hide_frac)?;
    check_fraction("--test-frac", a.test_frac)?;
    let has_features = a.input.features.is_some();
    let cfg = pipeline_config(&a.coarsen, &a.walk, &a.refine, a.seed, has_features);
    cfg.validate().map_err(usage)?;
    let classifier = a.classifier.params(Scaling::PerFeature)?;
    let c = load(&a.input)?;
    let h = &c.hypergraph;
    let mut aucs = Vec::with_capacity(a.runs);
    for run in 0..a.runs {
        let seed = hypervec::rng::derive(a.seed, &[run as u64]);
        let split = hide_hyperedges(h, a.hide_frac, seed)?;
        let (emb, _) = run_pipeline(
            &split.train,
            &PipelineConfig {
                seed,
                ..cfg.clone()
            },
        )?;
        let params = LinkParams {
            neg_ratio: a.neg_ratio,
            test_fraction: a.test_frac,
            classifier,
            seed,
        };
        let r = evaluate_hyperedge_prediction(h, &split, &emb, &params)?;
        eprintln!(
            "run {run}: auc {:.4} ({} positives, {} negatives)",
            r.auc, r.positives, r.negatives
        );
        aucs.push(r.auc);
    }
    let (mean, std) = mean_std(&aucs);
    emit(a.out.as_deref(), |w| {
        writeln!(w, "run,auc,std")?;
        for (i, auc) in aucs.iter().enumerate() {
            writeln!(w, "{i},{auc},")?;
        }
        writeln!(w, "mean,{mean},{std}")?;
        Ok(())
    })
}

fn cmd_stats(a: StatsArgs) -> CliResult {
    let report = PipelineReport::read_csv(open(&a.report)?)?;
    println!("{report}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Coarsen(a) => cmd_coarsen(a),
        Command::Star(a) => cmd_star(a),
        Command::EmbedInit(a) => cmd_embed_init(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::EvalNodes(a) => cmd_eval_nodes(a),
        Command::EvalHyperedges(a) => cmd_eval_hyperedges(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
