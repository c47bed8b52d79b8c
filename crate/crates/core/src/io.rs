//! Text formats: hMETIS hypergraphs, edge lists, feature and label tables,
//! embedding files.
//!
//! Every parser reports malformed input as [`Error::Parse`] with a 1-based line
//! number. Blank lines and lines starting with `%` are skipped everywhere, and
//! CRLF line endings are accepted.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::CsrGraph;
use crate::hypergraph::{Hypergraph, RawHypergraph};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// Header `num_hyperedges num_nodes [fmt]`, then one line of 1-based pins
    /// per hyperedge; `fmt = 1` puts the hyperedge weight first on each line.
    Hmetis,
    /// One `u v [w]` line per two-pin hyperedge, 0-based ids.
    Edgelist,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmetis" | "hgr" => Ok(Format::Hmetis),
            "edgelist" => Ok(Format::Edgelist),
            _ => Err(Error::invalid(format!("unknown format '{s}'"))),
        }
    }
}

/// Yields `(line_number, trimmed_line)` for every non-blank, non-comment line.
fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.split(b'\n').enumerate().filter_map(|(i, bytes)| {
        let line = i + 1;
        let bytes = match bytes {
            Ok(b) => b,
            Err(e) => return Some(Err(Error::Io(e))),
        };
        let text = match String::from_utf8(bytes) {
            Ok(t) => t,
            Err(_) => return Some(Err(Error::parse(line, "invalid UTF-8"))),
        };
        let t = text.trim();
        if t.is_empty() || t.starts_with('%') {
            None
        } else {
            Some(Ok((line, t.to_string())))
        }
    })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{tok}'")))
}

fn parse_real(tok: &str, line: usize, what: &str) -> Result<f64> {
    let x: f64 = parse_num(tok, line, what)?;
    if !x.is_finite() {
        return Err(Error::parse(line, format!("non-finite {what} '{tok}'")));
    }
    Ok(x)
}

pub fn parse_hypergraph<R: BufRead>(reader: R, format: Format) -> Result<RawHypergraph> {
    match format {
        Format::Hmetis => parse_hmetis(reader),
        Format::Edgelist => parse_edgelist(reader),
    }
}

fn parse_hmetis<R: BufRead>(reader: R) -> Result<RawHypergraph> {
    let mut lines = content_lines(reader);
    let (hline, header) = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::parse(1, "missing header")),
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if !(2..=3).contains(&toks.len()) {
        return Err(Error::parse(
            hline,
            format!("header needs 2 or 3 fields, found {}", toks.len()),
        ));
    }
    let num_edges: usize = parse_num(toks[0], hline, "hyperedge count")?;
    let num_nodes: usize = parse_num(toks[1], hline, "node count")?;
    let fmt: u32 = match toks.get(2) {
        Some(t) => parse_num(t, hline, "fmt")?,
        None => 0,
    };
    let weighted = match fmt {
        0 => false,
        1 => true,
        other => return Err(Error::parse(hline, format!("unsupported fmt {other}"))),
    };

    let mut pins = Vec::with_capacity(num_edges);
    let mut weights = Vec::new();
    let mut last_line = hline;
    for item in lines {
        let (line, text) = item?;
        last_line = line;
        if pins.len() == num_edges {
            return Err(Error::parse(
                line,
                format!("more hyperedge lines than the declared {num_edges}"),
            ));
        }
        let mut toks = text.split_whitespace();
        if weighted {
            let w = parse_real(toks.next().unwrap(), line, "hyperedge weight")?;
            if w < 0.0 {
                return Err(Error::parse(line, format!("negative hyperedge weight {w}")));
            }
            weights.push(w);
        }
        let mut p = Vec::new();
        for tok in toks {
            let id: usize = parse_num(tok, line, "node id")?;
            if id == 0 {
                return Err(Error::parse(line, "node ids are 1-based, found 0"));
            }
            if id > num_nodes {
                return Err(Error::parse(
                    line,
                    format!("node id {id} exceeds declared {num_nodes}"),
                ));
            }
            p.push(id - 1);
        }
        if p.is_empty() {
            return Err(Error::parse(line, "hyperedge line has no pins"));
        }
        pins.push(p);
    }
    if pins.len() != num_edges {
        return Err(Error::parse(
            last_line,
            format!(
                "header declares {num_edges} hyperedges, found {}",
                pins.len()
            ),
        ));
    }
    Ok(RawHypergraph {
        num_nodes: Some(num_nodes),
        pins,
        weights: weighted.then_some(weights),
    })
}

fn parse_edgelist<R: BufRead>(reader: R) -> Result<RawHypergraph> {
    let mut pins = Vec::new();
    let mut weights = Vec::new();
    let mut any_weight = None;
    for item in content_lines(reader) {
        let (line, text) = item?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(Error::parse(
                line,
                format!("expected 'u v [w]', found {} fields", toks.len()),
            ));
        }
        let has_weight = toks.len() == 3;
        if *any_weight.get_or_insert(has_weight) != has_weight {
            return Err(Error::parse(
                line,
                "weights must be given on all lines or none",
            ));
        }
        let u: usize = parse_num(toks[0], line, "vertex id")?;
        let v: usize = parse_num(toks[1], line, "vertex id")?;
        if has_weight {
            let w = parse_real(toks[2], line, "edge weight")?;
            if w < 0.0 {
                return Err(Error::parse(line, format!("negative edge weight {w}")));
            }
            weights.push(w);
        }
        pins.push(vec![u, v]);
    }
    Ok(RawHypergraph {
        num_nodes: None,
        pins,
        weights: any_weight.unwrap_or(false).then_some(weights),
    })
}

/// Writes `h` in hMETIS format; weights are written only when some weight
/// differs from 1.
pub fn write_hypergraph<W: Write>(mut out: W, h: &Hypergraph) -> Result<()> {
    let weighted = h.weights().iter().any(|&w| w != 1.0);
    if weighted {
        writeln!(out, "{} {} 1", h.num_hyperedges(), h.num_nodes())?;
    } else {
        writeln!(out, "{} {}", h.num_hyperedges(), h.num_nodes())?;
    }
    for e in 0..h.num_hyperedges() {
        if weighted {
            write!(out, "{}", h.weight(e))?;
        }
        for (i, &v) in h.pins(e).iter().enumerate() {
            if i > 0 || weighted {
                out.write_all(b" ")?;
            }
            write!(out, "{}", v + 1)?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes every undirected edge as `u v w`.
pub fn write_edgelist<W: Write>(mut out: W, g: &CsrGraph) -> Result<()> {
    for (u, v, w) in g.edges() {
        writeln!(out, "{u} {v} {w}")?;
    }
    Ok(())
}

/// Reads `id v1 ... vk` rows for nodes `0..num_nodes`, in any order.
pub fn parse_features<R: BufRead>(reader: R, num_nodes: usize) -> Result<Matrix> {
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; num_nodes];
    let mut width = None;
    for item in content_lines(reader) {
        let (line, text) = item?;
        let mut toks = text.split_whitespace();
        let id: usize = parse_num(toks.next().unwrap(), line, "node id")?;
        if id >= num_nodes {
            return Err(Error::parse(
                line,
                format!("node id {id} outside 0..{num_nodes}"),
            ));
        }
        let vals = toks
            .map(|t| parse_real(t, line, "feature value"))
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(vals.len()),
            Some(k) if k != vals.len() => {
                return Err(Error::parse(
                    line,
                    format!("row has {} values, expected {k}", vals.len()),
                ))
            }
            _ => {}
        }
        if rows[id].is_some() {
            return Err(Error::parse(line, format!("duplicate row for node {id}")));
        }
        rows[id] = Some(vals);
    }
    let missing: Vec<usize> = (0..num_nodes).filter(|&i| rows[i].is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds { ids: missing });
    }
    let k = width.unwrap_or(0);
    let mut data = Vec::with_capacity(num_nodes * k);
    for r in rows.into_iter().flatten() {
        data.extend(r);
    }
    Matrix::from_vec(num_nodes, k, data)
}

/// `node id -> class label`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTable {
    labels: BTreeMap<usize, u32>,
    num_classes: usize,
}

impl LabelTable {
    pub fn new(labels: BTreeMap<usize, u32>) -> Self {
        let num_classes = labels.values().max().map_or(0, |&m| m as usize + 1);
        LabelTable {
            labels,
            num_classes,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<u32> {
        self.labels.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.labels.iter().map(|(&k, &v)| (k, v))
    }
}

pub fn parse_labels<R: BufRead>(reader: R) -> Result<LabelTable> {
    let mut labels = BTreeMap::new();
    for item in content_lines(reader) {
        let (line, text) = item?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 'id label', found {} fields", toks.len()),
            ));
        }
        let id: usize = parse_num(toks[0], line, "node id")?;
        let label: u32 = parse_num(toks[1], line, "label")?;
        if labels.insert(id, label).is_some() {
            return Err(Error::parse(line, format!("duplicate label for node {id}")));
        }
    }
    Ok(LabelTable::new(labels))
}

pub fn write_labels<W: Write>(mut out: W, labels: &LabelTable) -> Result<()> {
    for (id, l) in labels.iter() {
        writeln!(out, "{id} {l}")?;
    }
    Ok(())
}

pub fn write_features<W: Write>(mut out: W, features: &Matrix) -> Result<()> {
    write_rows(&mut out, features, None)
}

/// Writes `n d` followed by `id v1 ... vd` per row. `ids` defaults to the row
/// index. Values use the shortest representation that parses back to the
/// same bits.
pub fn write_embeddings<W: Write>(mut out: W, emb: &Matrix, ids: Option<&[usize]>) -> Result<()> {
    if let Some(ids) = ids {
        if ids.len() != emb.rows() {
            return Err(Error::Dimension(format!(
                "{} ids for {} embedding rows",
                ids.len(),
                emb.rows()
            )));
        }
    }
    writeln!(out, "{} {}", emb.rows(), emb.cols())?;
    write_rows(&mut out, emb, ids)
}

fn write_rows<W: Write>(out: &mut W, m: &Matrix, ids: Option<&[usize]>) -> Result<()> {
    let mut buf = String::new();
    for (i, row) in m.iter_rows().enumerate() {
        use std::fmt::Write as _;
        buf.clear();
        let id = ids.map_or(i, |ids| ids[i]);
        write!(buf, "{id}").unwrap();
        for x in row {
            write!(buf, " {x}").unwrap();
        }
        buf.push('\n');
        out.write_all(buf.as_bytes())?;
    }
    Ok(())
}

/// An embedding file: rows in file order with their ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    pub ids: Vec<usize>,
    pub matrix: Matrix,
}

impl EmbeddingFile {
    /// Rearranges rows so that row `i` holds the vector for `wanted[i]`.
    pub fn arrange(&self, wanted: &[usize]) -> Result<Matrix> {
        let index: BTreeMap<usize, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(row, &id)| (id, row))
            .collect();
        let mut missing = Vec::new();
        let mut rows = Vec::with_capacity(wanted.len());
        for &id in wanted {
            match index.get(&id) {
                Some(&r) => rows.push(r),
                None => missing.push(id),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingEmbeddings { ids: missing });
        }
        Ok(self.matrix.select_rows(&rows))
    }

    /// Rows for ids `0..n`.
    pub fn dense(&self, n: usize) -> Result<Matrix> {
        let wanted: Vec<usize> = (0..n).collect();
        self.arrange(&wanted)
    }
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingFile> {
    let mut lines = content_lines(reader);
    let (hline, header) = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::parse(1, "missing header")),
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(Error::parse(hline, "header must be 'n d'"));
    }
    let n: usize = parse_num(toks[0], hline, "row count")?;
    let d: usize = parse_num(toks[1], hline, "dimension")?;

    let mut ids = Vec::with_capacity(n.min(1 << 20));
    let mut data = Vec::with_capacity(n.saturating_mul(d).min(1 << 24));
    let mut seen = std::collections::HashSet::new();
    let mut last_line = hline;
    for item in lines {
        let (line, text) = item?;
        last_line = line;
        if ids.len() == n {
            return Err(Error::parse(
                line,
                format!("more rows than the declared {n}"),
            ));
        }
        let mut toks = text.split_whitespace();
        let id: usize = parse_num(toks.next().unwrap(), line, "vertex id")?;
        if !seen.insert(id) {
            return Err(Error::parse(line, format!("duplicate row for id {id}")));
        }
        let before = data.len();
        for t in toks {
            data.push(parse_real(t, line, "embedding value")?);
        }
        if data.len() - before != d {
            return Err(Error::parse(
                line,
                format!("row has {} values, header says {d}", data.len() - before),
            ));
        }
        ids.push(id);
    }
    if ids.len() != n {
        return Err(Error::parse(
            last_line,
            format!("header declares {n} rows, found {}", ids.len()),
        ));
    }
    Ok(EmbeddingFile {
        ids,
        matrix: Matrix::from_vec(n, d, data)?,
    })
}
