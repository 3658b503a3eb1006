//! On-disk graph cache.
//!
//! Structure and labels live in plain text (`nodes.tsv`, `classes.txt`,
//! `edges.tsv`); the feature matrix is kept apart in `features.bin` so that
//! embedding-only pipelines can load the graph without ever opening it.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numkit::io::{read_tensor, write_tensor};

pub const NODES_FILE: &str = "nodes.tsv";
pub const CLASSES_FILE: &str = "classes.txt";
pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.bin";

pub fn save(graph: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(path, e))
    };
    let mut nodes = String::new();
    for (id, y) in graph.node_ids().iter().zip(graph.labels()) {
        nodes.push_str(&format!("{id}\t{y}\n"));
    }
    write(NODES_FILE, nodes)?;
    write(CLASSES_FILE, graph.class_names().join("\n") + "\n")?;
    let mut edges = String::new();
    for (s, d) in graph.edges() {
        edges.push_str(&format!("{s}\t{d}\n"));
    }
    write(EDGES_FILE, edges)?;
    if let Ok(features) = graph.features() {
        let path = dir.join(FEATURES_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        write_tensor(&mut w, features)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Loads a cached graph; `features.bin` is touched only when `with_features`.
pub fn load(dir: &Path, with_features: bool) -> Result<Graph> {
    let read = |name: &str| -> Result<String> {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| Error::io(path, e))
    };
    let parse_err = |name: &str, line: usize, message: &str| Error::Parse {
        path: dir.join(name),
        line,
        message: message.to_string(),
    };

    let class_names: Vec<String> = read(CLASSES_FILE)?
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();

    let mut node_ids = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in read(NODES_FILE)?.lines().enumerate() {
        let (id, y) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(NODES_FILE, i + 1, "expected `id <TAB> label`"))?;
        node_ids.push(id.to_string());
        labels.push(
            y.parse()
                .map_err(|_| parse_err(NODES_FILE, i + 1, "label is not an index"))?,
        );
    }

    let mut edges = Vec::new();
    for (i, line) in read(EDGES_FILE)?.lines().enumerate() {
        let pair = line
            .split_once('\t')
            .and_then(|(s, d)| Some((s.parse().ok()?, d.parse().ok()?)))
            .ok_or_else(|| parse_err(EDGES_FILE, i + 1, "expected `src <TAB> dst`"))?;
        edges.push(pair);
    }

    let features = if with_features {
        let path = dir.join(FEATURES_FILE);
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        Some(read_tensor(&mut BufReader::new(file))?)
    } else {
        None
    };
    Graph::new(node_ids, class_names, labels, features, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Matrix;

    #[test]
    fn round_trip_with_and_without_features() {
        let g = Graph::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["X".into(), "Y".into()],
            vec![1, 0, 1],
            Some(Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]).unwrap()),
            vec![(0, 1), (2, 1)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&g, dir.path()).unwrap();
        let back = load(dir.path(), true).unwrap();
        assert_eq!(back.node_ids(), g.node_ids());
        assert_eq!(back.labels(), g.labels());
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.features().unwrap(), g.features().unwrap());

        fs::remove_file(dir.path().join(FEATURES_FILE)).unwrap();
        let bare = load(dir.path(), false).unwrap();
        assert!(!bare.has_features());
        assert!(load(dir.path(), true).is_err());
    }
}
