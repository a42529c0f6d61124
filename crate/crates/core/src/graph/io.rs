//! Plain-text graph, label and pair-list files.
//!
//! Graph file:
//!
//! ```text
//! graph <n> <num_edges> <d0>
//! <u> <v>            # num_edges lines, u < v
//! <x_1> ... <x_d0>   # n lines, only when d0 > 0
//! ```
//!
//! Pair list: one `<path1> <path2> <iso:0|1>` per line.
//! Label file: `labels <n>` followed by one `0` or `1` per line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Graph, NodeLabeling};
use crate::diffmath::Tensor;
use crate::error::{Error, Result};

pub fn format_graph(g: &Graph) -> String {
    let d0 = g.features().map_or(0, Tensor::cols);
    let mut out = format!("graph {} {} {}\n", g.n(), g.num_edges(), d0);
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    if let Some(f) = g.features() {
        for r in 0..f.rows() {
            let row: Vec<String> = f.row(r).iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn parse_graph(text: &str, origin: &str) -> Result<Graph> {
    let err = |line: usize, reason: String| Error::Parse {
        path: origin.to_string(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty graph file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let ["graph", n, m, d0] = fields[..] else {
        return Err(err(
            ln,
            format!("expected `graph <n> <num_edges> <d0>`, got `{header}`"),
        ));
    };
    let parse_count = |s: &str, what: &str| s.parse::<usize>().map_err(|_| err(ln, format!("bad {what} `{s}`")));
    let (n, m, d0) = (
        parse_count(n, "node count")?,
        parse_count(m, "edge count")?,
        parse_count(d0, "feature width")?,
    );

    let mut edges = Vec::with_capacity(m);
    let mut last = ln;
    for i in 0..m {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(last + 1, format!("expected {m} edges, found {i}")))?;
        last = ln;
        let ends: Vec<&str> = line.split_whitespace().collect();
        let [u, v] = ends[..] else {
            return Err(err(ln, format!("expected `<u> <v>`, got `{line}`")));
        };
        let u: usize = u.parse().map_err(|_| err(ln, format!("bad node index `{u}`")))?;
        let v: usize = v.parse().map_err(|_| err(ln, format!("bad node index `{v}`")))?;
        if u >= v {
            return Err(err(ln, format!("edge ({u},{v}) must satisfy u < v")));
        }
        if v >= n {
            return Err(err(ln, format!("node {v} out of range for {n} nodes")));
        }
        edges.push((u, v));
    }
    let g = Graph::new(n, edges).map_err(|e| err(last, e.to_string()))?;

    if d0 == 0 {
        if let Some((ln, extra)) = lines.next() {
            return Err(err(ln, format!("unexpected trailing content `{extra}`")));
        }
        return Ok(g);
    }
    let mut data = Vec::with_capacity(n * d0);
    for i in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(last + 1, format!("expected {n} feature rows, found {i}")))?;
        last = ln;
        let before = data.len();
        for tok in line.split_whitespace() {
            let x: f64 = tok.parse().map_err(|_| err(ln, format!("bad feature `{tok}`")))?;
            if !x.is_finite() {
                return Err(err(ln, format!("non-finite feature `{tok}`")));
            }
            data.push(x);
        }
        if data.len() - before != d0 {
            return Err(err(ln, format!("expected {d0} features")));
        }
    }
    if let Some((ln, extra)) = lines.next() {
        return Err(err(ln, format!("unexpected trailing content `{extra}`")));
    }
    let features = Tensor::from_vec(n, d0, data)?;
    g.with_features(features)
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&text, &path.display().to_string())
}

pub fn write_graph(g: &Graph, path: &Path) -> Result<()> {
    std::fs::write(path, format_graph(g)).map_err(|e| Error::io(path, e))
}

pub fn write_labels(labels: &NodeLabeling, path: &Path) -> Result<()> {
    let mut out = format!("labels {}\n", labels.labels.len());
    for &b in &labels.labels {
        out.push_str(if b { "1\n" } else { "0\n" });
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<NodeLabeling> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let err = |line: usize, reason: String| Error::Parse {
        path: origin.clone(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty label file".into()))?;
    let n: usize = header
        .strip_prefix("labels ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, format!("expected `labels <n>`, got `{header}`")))?;
    let mut labels = Vec::with_capacity(n);
    for (ln, line) in lines.filter(|(_, l)| !l.is_empty()) {
        labels.push(match line {
            "0" => false,
            "1" => true,
            other => return Err(err(ln, format!("label must be 0 or 1, got `{other}`"))),
        });
    }
    if labels.len() != n {
        return Err(err(ln, format!("header says {n} labels, found {}", labels.len())));
    }
    Ok(NodeLabeling { labels })
}

/// One line of a pair-list file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairEntry {
    pub first: PathBuf,
    pub second: PathBuf,
    pub isomorphic: bool,
}

pub fn write_pair_list(entries: &[PairEntry], path: &Path) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        let _ = writeln!(
            out,
            "{} {} {}",
            e.first.display(),
            e.second.display(),
            u8::from(e.isomorphic)
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a pair list; relative paths are resolved against the list's directory.
pub fn read_pair_list(path: &Path) -> Result<Vec<PairEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = |reason: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let [a, b, iso] = parts[..] else {
            return Err(bad(format!("expected `<path1> <path2> <iso>`, got `{line}`")));
        };
        let isomorphic = match iso {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("iso flag must be 0 or 1, got `{other}`"))),
        };
        out.push(PairEntry {
            first: base.join(a),
            second: base.join(b),
            isomorphic,
        });
    }
    Ok(out)
}
