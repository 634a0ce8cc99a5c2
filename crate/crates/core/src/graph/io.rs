//! Plain-text graph files.
//!
//! * edges: one `src<TAB>dst` pair per line, 0-based, `#` starts a comment
//! * features: header `n d`, then `n` lines of `d` space-separated floats
//! * labels: one class id per node, `-1` for unlabeled

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Adjacency, Graph, GraphError};
use crate::autodiff::Mat;

/// Conventional file names inside a dataset directory.
#[derive(Clone, Debug)]
pub struct GraphFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
}

impl GraphFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            edges: dir.join("edges.tsv"),
            features: dir.join("features.txt"),
            labels: dir.join("labels.txt"),
        }
    }

    pub fn load(&self) -> Result<Graph, GraphError> {
        load_graph(&self.edges, &self.features, &self.labels)
    }
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse {
        path: path.to_owned(),
        line,
        msg: msg.into(),
    }
}

pub fn load_graph(edge_file: &Path, feature_file: &Path, label_file: &Path) -> Result<Graph, GraphError> {
    let features = parse_features(feature_file, &read(feature_file)?)?;
    let n = features.rows();
    let edges = parse_edges(edge_file, &read(edge_file)?, n)?;
    let (labels, m) = parse_labels(label_file, &read(label_file)?, n)?;
    Graph::new(Adjacency::from_edges(n, &edges, false), features, labels, m)
}

fn parse_features(path: &Path, text: &str) -> Result<Mat, GraphError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| parse_err(path, 1, "missing `n d` header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let (n, d) = match dims[..] {
        [a, b] => match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(n), Ok(d)) => (n, d),
            _ => return Err(parse_err(path, 1, format!("bad header `{header}`"))),
        },
        _ => return Err(parse_err(path, 1, format!("bad header `{header}`"))),
    };
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        if rows == n {
            return Err(parse_err(path, lineno, format!("more than {n} feature rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad number `{tok}`")))?;
            data.push(v);
        }
        if data.len() - before != d {
            return Err(parse_err(
                path,
                lineno,
                format!("{} values, expected {d}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(
            path,
            text.lines().count(),
            format!("{rows} feature rows, header says {n}"),
        ));
    }
    Ok(Mat::from_vec(n, d, data).expect("sized above"))
}

fn parse_edges(path: &Path, text: &str, n: usize) -> Result<Vec<(usize, usize)>, GraphError> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = toks[..] else {
            return Err(parse_err(path, lineno, format!("expected `src<TAB>dst`, got `{raw}`")));
        };
        let mut ids = [0usize; 2];
        for (slot, tok) in ids.iter_mut().zip([a, b]) {
            *slot = tok
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad node id `{tok}`")))?;
            if *slot >= n {
                return Err(GraphError::NodeRange {
                    path: path.to_owned(),
                    line: lineno,
                    id: *slot,
                    n,
                });
            }
        }
        edges.push((ids[0], ids[1]));
    }
    Ok(edges)
}

fn parse_labels(path: &Path, text: &str, n: usize) -> Result<(Vec<Option<usize>>, usize), GraphError> {
    let mut labels = Vec::with_capacity(n);
    for (i, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        let v: i64 = tok
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad label `{tok}`")))?;
        labels.push(match v {
            -1 => None,
            c if c >= 0 => Some(c as usize),
            _ => return Err(parse_err(path, i + 1, format!("label {v} < -1"))),
        });
    }
    if labels.len() != n {
        return Err(parse_err(
            path,
            text.lines().count(),
            format!("{} labels for {n} nodes", labels.len()),
        ));
    }
    let m = labels.iter().flatten().max().map_or(0, |&c| c + 1);
    Ok((labels, m))
}

fn create(path: &Path) -> Result<fs::File, GraphError> {
    fs::File::create(path).map_err(|source| GraphError::Io {
        path: path.to_owned(),
        source,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn write_edges(g: &Graph, path: &Path) -> Result<(), GraphError> {
    let mut out = String::new();
    for (a, b) in g.adjacency().edges() {
        out.push_str(&format!("{a}\t{b}\n"));
    }
    create(path)?.write_all(out.as_bytes()).map_err(io_err(path))
}

pub fn write_features(g: &Graph, path: &Path) -> Result<(), GraphError> {
    let f = g.features();
    let mut out = format!("{} {}\n", f.rows(), f.cols());
    for r in 0..f.rows() {
        let row: Vec<String> = f.row(r).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    create(path)?.write_all(out.as_bytes()).map_err(io_err(path))
}

pub fn write_labels(g: &Graph, path: &Path) -> Result<(), GraphError> {
    let mut out = String::new();
    for l in g.labels() {
        match l {
            Some(c) => out.push_str(&format!("{c}\n")),
            None => out.push_str("-1\n"),
        }
    }
    create(path)?.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Writes the three files into `dir` under their conventional names.
pub fn write_graph(g: &Graph, dir: &Path) -> Result<GraphFiles, GraphError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = GraphFiles::in_dir(dir);
    write_edges(g, &files.edges)?;
    write_features(g, &files.features)?;
    write_labels(g, &files.labels)?;
    Ok(files)
}
