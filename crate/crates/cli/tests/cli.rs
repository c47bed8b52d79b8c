use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hypervec::io;
use hypervec::synth::{planted, PlantedConfig};
use tempfile::TempDir;

const FAST: &[&str] = &[
    "--dim",
    "8",
    "--walks-per-vertex",
    "2",
    "--walk-length",
    "10",
    "--window",
    "3",
];

fn hypervec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypervec"))
        .args(args)
        .env_remove("HYPERVEC_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

struct Fixture {
    dir: TempDir,
    graph: PathBuf,
    labels: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let p = planted(&PlantedConfig {
            num_nodes: 200,
            num_hyperedges: 150,
            feature_dim: 0,
            seed: 3,
            ..Default::default()
        });
        let dir = tempfile::tempdir().unwrap();
        let graph = dir.path().join("g.hmetis");
        let mut buf = Vec::new();
        io::write_hypergraph(&mut buf, &p.hypergraph).unwrap();
        fs::write(&graph, buf).unwrap();
        let labels = dir.path().join("labels.txt");
        let text: String = p
            .labels
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{i} {c}\n"))
            .collect();
        fs::write(&labels, text).unwrap();
        Fixture { dir, graph, labels }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_pipeline(f: &Fixture, extra: &[&str]) -> (PathBuf, PathBuf) {
    let out = f.path("emb.txt");
    let report = f.path("report.csv");
    let mut args = vec![
        "pipeline",
        "--input",
        s(&f.graph),
        "--levels",
        "1",
        "--min-size",
        "10",
        "--out",
        s(&out),
        "--report",
        s(&report),
    ];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    let o = hypervec(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (out, report)
}

#[test]
fn pipeline_writes_embeddings_and_report() {
    let f = Fixture::new();
    let (out, report) = run_pipeline(&f, &[]);
    let emb =
        io::read_embeddings(fs::File::open(&out).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(emb.matrix.rows(), 350);
    assert_eq!(emb.matrix.cols(), 8);
    assert!(emb.matrix.is_finite());

    let csv = fs::read_to_string(report).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("level,nodes,hyperedges"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn pipeline_output_is_independent_of_thread_count() {
    let f = Fixture::new();
    let (a, _) = run_pipeline(&f, &["--threads", "1"]);
    let first = fs::read(&a).unwrap();
    let (b, _) = run_pipeline(&f, &["--threads", "3"]);
    assert_eq!(first, fs::read(&b).unwrap());
}

#[test]
fn refine_with_zero_omega_returns_input() {
    let f = Fixture::new();
    let init = f.path("init.txt");
    let mut args = vec!["embed-init", "--input", s(&f.graph), "--out", s(&init)];
    args.extend_from_slice(FAST);
    assert_eq!(code(&hypervec(&args)), 0);

    let refined = f.path("refined.txt");
    let o = hypervec(&[
        "refine",
        "--graph",
        s(&f.graph),
        "--embeddings",
        s(&init),
        "--omega",
        "0",
        "--out",
        s(&refined),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(init).unwrap(), fs::read(refined).unwrap());
}

#[test]
fn eval_nodes_writes_csv() {
    let f = Fixture::new();
    let (emb, _) = run_pipeline(&f, &[]);
    let out = f.path("acc.csv");
    let o = hypervec(&[
        "eval-nodes",
        "--embeddings",
        s(&emb),
        "--labels",
        s(&f.labels),
        "--splits",
        "3",
        "--train-frac",
        "0.2",
        "--clf-epochs",
        "100",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "split,accuracy,std");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("mean,"));
    for row in &lines[1..4] {
        let acc: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn stats_prints_levels() {
    let f = Fixture::new();
    let (_, report) = run_pipeline(&f, &[]);
    let o = hypervec(&["stats", "--report", s(&report)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("total"), "{text}");
}

#[test]
fn coarsen_and_star_write_files() {
    let f = Fixture::new();
    let coarse = f.path("coarse.hmetis");
    let o = hypervec(&[
        "coarsen",
        "--input",
        s(&f.graph),
        "--levels",
        "1",
        "--min-size",
        "10",
        "--out",
        s(&coarse),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let header = fs::read_to_string(&coarse).unwrap();
    let n: usize = header.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(n < 200);

    let o = hypervec(&["star", "--input", s(&f.graph)]);
    assert_eq!(code(&o), 0);
    let edges = String::from_utf8(o.stdout).unwrap().lines().count();
    let pins: usize = fs::read_to_string(&f.graph)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().count())
        .sum();
    assert_eq!(edges, pins);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&hypervec(&["--help"])), 0);
    assert_eq!(code(&hypervec(&["pipeline", "--bogus"])), 1);
    assert_eq!(
        code(&hypervec(&["stats", "--report", "x", "--threads", "0"])),
        1
    );

    let f = Fixture::new();
    let bad = f.path("bad.hmetis");
    fs::write(&bad, "2 3\n1 2\n1 9\n").unwrap();
    let o = hypervec(&["star", "--input", s(&bad)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    let o = hypervec(&["stats", "--report", s(&f.path("missing.csv"))]);
    assert_eq!(code(&o), 2);
}
