//! Edge-list parsing and the bundled social networks.
//!
//! Format: one edge `u v` per line, whitespace separated. `#` starts a
//! comment. A line with a single label declares an isolated vertex (it may
//! get edges later). Labels are numbered in order of first appearance.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub expected_n: usize,
    pub source: &'static str,
    #[serde(skip)]
    contents: Option<&'static str>,
}

impl DatasetEntry {
    pub fn bundled(&self) -> bool {
        self.contents.is_some()
    }
}

pub const DATASETS: &[DatasetEntry] = &[
    DatasetEntry {
        id: "medici_business",
        description: "Florentine families, business ties; undirected",
        expected_n: 16,
        source: "Padgett & Ansell (1993), Robins et al. (2007)",
        contents: Some(include_str!("../data/medici_business.edges")),
    },
    DatasetEntry {
        id: "sampson",
        description: "Sampson monastery novices, cumulative liking, symmetrized by OR",
        expected_n: 18,
        source: "Sampson (1968)",
        contents: Some(include_str!("../data/sampson.edges")),
    },
    DatasetEntry {
        id: "lazega_work",
        description: "Lazega law firm partners, coworker ties",
        expected_n: 36,
        source: "Lazega (2001)",
        contents: None,
    },
    DatasetEntry {
        id: "bank_wiring",
        description: "Bank wiring room employees",
        expected_n: 14,
        source: "Roethlisberger & Dickson (1939)",
        contents: None,
    },
];

pub fn dataset(id: &str) -> Result<&'static DatasetEntry> {
    DATASETS.iter().find(|d| d.id == id).ok_or_else(|| Error::UnknownDataset {
        id: id.to_string(),
        available: DATASETS.iter().map(|d| d.id).collect::<Vec<_>>().join(", "),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub graph: Graph,
    /// Repeated edges dropped, `b a` after `a b` included.
    pub duplicates: usize,
}

pub fn parse_edgelist(text: &str) -> Result<EdgeList> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut duplicates = 0;
    fn id<'t>(label: &'t str, index: &mut HashMap<&'t str, usize>, labels: &mut Vec<String>) -> usize {
        *index.entry(label).or_insert_with(|| {
            labels.push(label.to_string());
            labels.len() - 1
        })
    }
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let body = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = body.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            [a] => {
                id(a, &mut index, &mut labels);
            }
            [a, b] => {
                if a == b {
                    return Err(Error::ParseSelfLoop { line, label: a.to_string() });
                }
                let (u, v) = (id(a, &mut index, &mut labels), id(b, &mut index, &mut labels));
                if seen.insert((u.min(v), u.max(v))) {
                    edges.push((u, v));
                } else {
                    duplicates += 1;
                }
            }
            more => {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected `u v`, found {} tokens: `{}`", more.len(), body.trim()),
                })
            }
        }
    }
    let graph = Graph::new(labels.len(), edges)?.with_labels(labels)?;
    Ok(EdgeList { graph, duplicates })
}

pub fn load_edgelist(path: &Path) -> Result<EdgeList> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_edgelist(&text)
}

fn checked(entry: &DatasetEntry, list: EdgeList) -> Result<Graph> {
    if list.graph.n() != entry.expected_n {
        return Err(Error::DatasetSize { id: entry.id.to_string(), expected: entry.expected_n, got: list.graph.n() });
    }
    Ok(list.graph)
}

/// A dataset compiled into the library.
pub fn load_bundled(id: &str) -> Result<Graph> {
    let entry = dataset(id)?;
    match entry.contents {
        Some(text) => checked(entry, parse_edgelist(text)?),
        None => Err(Error::DatasetNotBundled { id: entry.id.to_string(), expected_n: entry.expected_n }),
    }
}

/// `<dir>/<id>.edges` if it exists, else the bundled copy. Vertex counts are
/// checked against the registry either way.
pub fn load_dataset(id: &str, dir: Option<&Path>) -> Result<Graph> {
    let entry = dataset(id)?;
    if let Some(dir) = dir {
        let path = dir.join(format!("{id}.edges"));
        if path.exists() {
            return checked(entry, load_edgelist(&path)?);
        }
    }
    load_bundled(id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let g = parse_edgelist("a b\nb c\n").unwrap().graph;
        assert_eq!((g.n(), g.m()), (3, 2));

        assert!(matches!(parse_edgelist("a a\n"), Err(Error::ParseSelfLoop { line: 1, .. })));

        let l = parse_edgelist("a b\nb a\n").unwrap();
        assert_eq!((l.graph.m(), l.duplicates), (1, 1));

        assert!(matches!(parse_edgelist("# hi\n\na b c\n"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn comments_and_declarations() {
        let l = parse_edgelist("# header\nz\n\nx y # trailing\n").unwrap();
        assert_eq!(l.graph.n(), 3);
        assert_eq!(l.graph.labels().unwrap(), ["z", "x", "y"]);
        assert_eq!(l.graph.edges(), [(1, 2)]);
    }

    #[test]
    fn bundled_sizes() {
        let medici = load_bundled("medici_business").unwrap();
        assert_eq!((medici.n(), medici.m()), (16, 15));
        let sampson = load_bundled("sampson").unwrap();
        assert_eq!((sampson.n(), sampson.m()), (18, 60));
        assert!(matches!(load_bundled("bank_wiring"), Err(Error::DatasetNotBundled { expected_n: 14, .. })));
        match load_bundled("karate") {
            Err(Error::UnknownDataset { available, .. }) => assert!(available.contains("lazega_work")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn data_dir_override() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::new();
        for v in 0..14 {
            text.push_str(&format!("w{v}\n"));
        }
        text.push_str("w0 w1\n");
        std::fs::write(dir.path().join("bank_wiring.edges"), &text).unwrap();
        let g = load_dataset("bank_wiring", Some(dir.path())).unwrap();
        assert_eq!((g.n(), g.m()), (14, 1));

        std::fs::write(dir.path().join("sampson.edges"), "a b\n").unwrap();
        assert!(matches!(
            load_dataset("sampson", Some(dir.path())),
            Err(Error::DatasetSize { expected: 18, got: 2, .. })
        ));
    }

    #[test]
    fn round_trip() {
        let g = load_bundled("medici_business").unwrap();
        let back = parse_edgelist(&g.to_edgelist()).unwrap().graph;
        assert_eq!(back, g);
    }
}
