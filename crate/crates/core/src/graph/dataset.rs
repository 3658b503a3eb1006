//! Reader for the raw `.content` / `.cites` citation dataset files.
//!
//! `.content` rows are `node_id <TAB> f_1 ... f_d <TAB> label` with binary
//! bag-of-words entries; `.cites` rows are `cited_id <TAB> citing_id`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numkit::Matrix;

/// Counts of citation rows discarded while building the graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub citation_rows: usize,
    pub dangling: usize,
    pub self_loops: usize,
    pub duplicates: usize,
}

pub fn load_citation_dataset(content_path: &Path, cites_path: &Path) -> Result<Graph> {
    let (graph, stats) = load_citation_dataset_with_stats(content_path, cites_path)?;
    if stats.dangling + stats.self_loops + stats.duplicates > 0 {
        log::info!(
            "{}: dropped {} dangling, {} self-loop and {} duplicate citations out of {}",
            cites_path.display(),
            stats.dangling,
            stats.self_loops,
            stats.duplicates,
            stats.citation_rows
        );
    }
    Ok(graph)
}

pub fn load_citation_dataset_with_stats(
    content_path: &Path,
    cites_path: &Path,
) -> Result<(Graph, LoadStats)> {
    let content = fs::read_to_string(content_path).map_err(|e| Error::io(content_path, e))?;
    let cites = fs::read_to_string(cites_path).map_err(|e| Error::io(cites_path, e))?;

    let mut node_ids = Vec::new();
    let mut raw_labels = Vec::new();
    let mut values: Vec<f32> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut index: HashMap<String, usize> = HashMap::new();

    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let parse_err = |message: String| Error::Parse {
            path: content_path.to_path_buf(),
            line: lineno,
            message,
        };
        if fields.len() < 3 {
            return Err(parse_err(format!(
                "expected `id, features..., label`, found {} fields",
                fields.len()
            )));
        }
        let d = fields.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(parse_err(format!("{d} features, earlier rows have {expected}")));
            }
            _ => {}
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(parse_err("empty node id".into()));
        }
        if index.insert(id.to_string(), node_ids.len()).is_some() {
            return Err(Error::Validation(format!(
                "{}:{lineno}: duplicate node id `{id}`",
                content_path.display()
            )));
        }
        for tok in &fields[1..fields.len() - 1] {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(format!("feature `{tok}` is not a number")))?;
            if v != 0.0 && v != 1.0 {
                return Err(Error::Validation(format!(
                    "{}:{lineno}: feature value {tok} is not 0 or 1",
                    content_path.display()
                )));
            }
            values.push(v as f32);
        }
        node_ids.push(id.to_string());
        raw_labels.push(fields[fields.len() - 1].to_string());
    }

    let Some(dim) = dim else {
        return Err(Error::Validation(format!(
            "{} contains no nodes",
            content_path.display()
        )));
    };

    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_of: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let labels = raw_labels.iter().map(|l| class_of[l.as_str()]).collect();

    let mut stats = LoadStats::default();
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for (lineno, line) in cites.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: cites_path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected `cited <TAB> citing`, found {} fields", fields.len()),
            });
        }
        stats.citation_rows += 1;
        let (Some(&cited), Some(&citing)) = (index.get(fields[0]), index.get(fields[1])) else {
            stats.dangling += 1;
            continue;
        };
        if cited == citing {
            stats.self_loops += 1;
            continue;
        }
        if !seen.insert((citing, cited)) {
            stats.duplicates += 1;
            continue;
        }
        edges.push((citing, cited));
    }

    let n = node_ids.len();
    let features = Matrix::new(n, dim, values)?;
    let graph = Graph::new(node_ids, class_names, labels, Some(features), edges)?;
    Ok((graph, stats))
}
