//! Plain-text dataset format.
//!
//! A dataset directory holds four UTF-8 files with LF line endings. Lines
//! starting with `#` and blank lines are ignored everywhere.
//!
//! * `edges.tsv`: one `u<TAB>v` pair per line, 0-based, each undirected edge
//!   listed once. Duplicates (in either orientation) are dropped; self-loops
//!   are rejected.
//! * `features.txt`: header `N d`, then `N` lines of `d` space-separated reals.
//! * `labels.txt`: `N` lines with one class index each.
//! * `masks.txt`: `N` lines with one of `t`, `v`, `s`, `-`
//!   (train / validation / test / unused).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{DatasetStats, Graph, GraphError, Masks};
use crate::linalg::DenseMatrix;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const MASKS_FILE: &str = "masks.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub masks: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            edges: dir.join(EDGES_FILE),
            features: dir.join(FEATURES_FILE),
            labels: dir.join(LABELS_FILE),
            masks: dir.join(MASKS_FILE),
        }
    }
}

/// Benchmark datasets with published size statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownDataset {
    Cora,
    CiteSeer,
    Chameleon,
    Squirrel,
}

impl KnownDataset {
    pub const ALL: [KnownDataset; 4] = [
        KnownDataset::Cora,
        KnownDataset::CiteSeer,
        KnownDataset::Chameleon,
        KnownDataset::Squirrel,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "cora" => Some(Self::Cora),
            "citeseer" => Some(Self::CiteSeer),
            "chameleon" => Some(Self::Chameleon),
            "squirrel" => Some(Self::Squirrel),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Cora => "cora",
            Self::CiteSeer => "citeseer",
            Self::Chameleon => "chameleon",
            Self::Squirrel => "squirrel",
        }
    }

    /// `(nodes, undirected edges, classes)`.
    pub fn expected_counts(self) -> (usize, usize, usize) {
        match self {
            Self::Cora => (2708, 5278, 7),
            Self::CiteSeer => (3327, 4552, 6),
            Self::Chameleon => (890, 8854, 5),
            Self::Squirrel => (2223, 46998, 5),
        }
    }

    pub fn validate(self, stats: &DatasetStats) -> Result<(), GraphError> {
        let (n, e, k) = self.expected_counts();
        if (stats.num_nodes, stats.num_edges, stats.num_classes) != (n, e, k) {
            return Err(GraphError::Integrity(format!(
                "{} expects {n} nodes / {e} edges / {k} classes, files contain {} / {} / {}",
                self.name(),
                stats.num_nodes,
                stats.num_edges,
                stats.num_classes
            )));
        }
        Ok(())
    }
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Iterator for Lines<'a> {
    type Item = (usize, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim_end_matches('\r');
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t));
        }
        None
    }
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn lines<'a>(path: &'a Path, text: &'a str) -> Lines<'a> {
    Lines {
        path,
        inner: text.lines().enumerate(),
    }
}

fn parse_edges(path: &Path, text: &str) -> Result<Vec<(usize, usize, usize)>, GraphError> {
    let mut out = Vec::new();
    let mut it = lines(path, text);
    while let Some((no, line)) = it.next() {
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(it.path, no, "expected `u<TAB>v`"));
        };
        let u = a
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(it.path, no, format!("bad node id {a:?}: {e}")))?;
        let v = b
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(it.path, no, format!("bad node id {b:?}: {e}")))?;
        if u == v {
            return Err(parse_err(it.path, no, format!("self-loop on node {u}")));
        }
        out.push((u, v, no));
    }
    Ok(out)
}

fn parse_features(path: &Path, text: &str) -> Result<DenseMatrix, GraphError> {
    let mut it = lines(path, text);
    let (hno, header) = it.next().ok_or_else(|| parse_err(path, 1, "missing `N d` header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(path, hno, "header must be `N d`"));
    }
    let n: usize = dims[0]
        .parse()
        .map_err(|e| parse_err(path, hno, format!("bad N: {e}")))?;
    let d: usize = dims[1]
        .parse()
        .map_err(|e| parse_err(path, hno, format!("bad d: {e}")))?;
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (no, line) in it {
        if rows == n {
            return Err(parse_err(path, no, format!("more than {n} feature rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| parse_err(path, no, format!("bad value {tok:?}: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, no, format!("non-finite value {tok:?}")));
            }
            data.push(v);
        }
        if data.len() - before != d {
            return Err(parse_err(
                path,
                no,
                format!("expected {d} values, found {}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(GraphError::Integrity(format!(
            "{}: header declares {n} rows, found {rows}",
            path.display()
        )));
    }
    Ok(DenseMatrix::from_vec(n, d, data)?)
}

fn parse_labels(path: &Path, text: &str) -> Result<Vec<usize>, GraphError> {
    lines(path, text)
        .map(|(no, line)| {
            line.parse::<usize>()
                .map_err(|e| parse_err(path, no, format!("bad label {line:?}: {e}")))
        })
        .collect()
}

fn parse_masks(path: &Path, text: &str) -> Result<Masks, GraphError> {
    let mut masks = Masks::empty(0);
    for (no, line) in lines(path, text) {
        let (t, v, s) = match line {
            "t" => (true, false, false),
            "v" => (false, true, false),
            "s" => (false, false, true),
            "-" => (false, false, false),
            other => return Err(parse_err(path, no, format!("bad mask {other:?}"))),
        };
        masks.train.push(t);
        masks.val.push(v);
        masks.test.push(s);
    }
    Ok(masks)
}

/// Reads and validates the four dataset files.
pub fn load_dataset(paths: &DatasetPaths) -> Result<Graph, GraphError> {
    let features = parse_features(&paths.features, &read(&paths.features)?)?;
    let n = features.rows();
    let labels = parse_labels(&paths.labels, &read(&paths.labels)?)?;
    if labels.len() != n {
        return Err(GraphError::Integrity(format!(
            "{} has {} labels but features declare {n} nodes",
            paths.labels.display(),
            labels.len()
        )));
    }
    let masks = parse_masks(&paths.masks, &read(&paths.masks)?)?;
    if masks.len() != n {
        return Err(GraphError::Integrity(format!(
            "{} has {} entries but features declare {n} nodes",
            paths.masks.display(),
            masks.len()
        )));
    }
    let edges = parse_edges(&paths.edges, &read(&paths.edges)?)?;
    if let Some(&(u, v, no)) = edges.iter().find(|&&(u, v, _)| u >= n || v >= n) {
        return Err(GraphError::Integrity(format!(
            "{}:{no}: edge ({u}, {v}) references a node outside 0..{n}",
            paths.edges.display()
        )));
    }
    Graph::new(n, edges.into_iter().map(|(u, v, _)| (u, v)), features, labels, masks)
}

/// Loads `dir`; when the directory name is a known benchmark and `validate`
/// is set, the node/edge/class counts must match the published statistics.
pub fn load_dataset_dir(dir: impl AsRef<Path>, validate: bool) -> Result<Graph, GraphError> {
    let dir = dir.as_ref();
    let graph = load_dataset(&DatasetPaths::in_dir(dir))?;
    if validate {
        let known = dir
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(KnownDataset::from_name);
        if let Some(known) = known {
            known.validate(&graph.stats())?;
        }
    }
    Ok(graph)
}

/// Writes `graph` in the plain-text layout under `dir`.
pub fn write_dataset(graph: &Graph, dir: impl AsRef<Path>) -> Result<(), GraphError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GraphError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let paths = DatasetPaths::in_dir(dir);

    let mut s = String::new();
    for &(u, v) in graph.edges() {
        s.push_str(&format!("{u}\t{v}\n"));
    }
    fs::write(&paths.edges, s).map_err(io(&paths.edges))?;

    let f = graph.features();
    let mut out = std::io::BufWriter::new(fs::File::create(&paths.features).map_err(io(&paths.features))?);
    let write = |out: &mut std::io::BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "{} {}", f.rows(), f.cols())?;
        for r in 0..f.rows() {
            let row: Vec<String> = f.row(r).iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        out.flush()
    };
    write(&mut out).map_err(io(&paths.features))?;

    let labels: String = graph.labels().iter().map(|l| format!("{l}\n")).collect();
    fs::write(&paths.labels, labels).map_err(io(&paths.labels))?;

    let m = graph.masks();
    let masks: String = (0..graph.num_nodes())
        .map(|i| {
            if m.train[i] {
                "t\n"
            } else if m.val[i] {
                "v\n"
            } else if m.test[i] {
                "s\n"
            } else {
                "-\n"
            }
        })
        .collect();
    fs::write(&paths.masks, masks).map_err(io(&paths.masks))?;
    Ok(())
}
