//! Embedding tables as text: a `count dim` header, then one
//! `node_id <TAB> v_1 <TAB> ... <TAB> v_dim` line per node, with an optional
//! trailing label column for plotting tools.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

/// Formats rows with the shortest representation that reads back to the
/// same `f32`.
pub fn write_embeddings_tsv<T: Scalar>(
    path: &Path,
    node_ids: &[String],
    table: &Matrix<T>,
    labels: Option<&[usize]>,
) -> Result<()> {
    if node_ids.len() != table.rows() || labels.is_some_and(|l| l.len() != table.rows()) {
        return Err(Error::shape(format!(
            "{} ids / {} rows / {:?} labels",
            node_ids.len(),
            table.rows(),
            labels.map(<[usize]>::len)
        )));
    }
    let mut out = String::with_capacity(table.len() * 12);
    let _ = writeln!(out, "{} {}", table.rows(), table.cols());
    for (i, id) in node_ids.iter().enumerate() {
        out.push_str(id);
        for &v in table.row(i) {
            let _ = write!(out, "\t{}", v.to_f64_lossy() as f32);
        }
        if let Some(l) = labels {
            let _ = write!(out, "\t{}", l[i]);
        }
        out.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parsed embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub node_ids: Vec<String>,
    pub table: Matrix<f32>,
    pub labels: Option<Vec<usize>>,
}

/// Reads a file written by [`write_embeddings_tsv`]. A label column is
/// detected from the field count.
pub fn read_embeddings_tsv(path: &Path) -> Result<EmbeddingFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let (count, dim) = header
        .split_once(' ')
        .and_then(|(c, d)| Some((c.parse::<usize>().ok()?, d.parse::<usize>().ok()?)))
        .ok_or_else(|| err(1, format!("expected `count dim`, got `{header}`")))?;
    let mut node_ids = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    let mut labels: Option<Vec<usize>> = None;
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let fields: Vec<&str> = line.split('\t').collect();
        let has_label = match fields.len() {
            n if n == dim + 1 => false,
            n if n == dim + 2 => true,
            n => return Err(err(lineno, format!("{n} fields, expected {}", dim + 1))),
        };
        if k == 0 && has_label {
            labels = Some(Vec::with_capacity(count));
        }
        if has_label != labels.is_some() {
            return Err(err(lineno, "label column present on some rows only".into()));
        }
        node_ids.push(fields[0].to_string());
        for f in &fields[1..=dim] {
            data.push(
                f.parse::<f32>()
                    .map_err(|_| err(lineno, format!("bad value `{f}`")))?,
            );
        }
        if let Some(l) = &mut labels {
            l.push(
                fields[dim + 1]
                    .parse()
                    .map_err(|_| err(lineno, "bad label".into()))?,
            );
        }
    }
    if node_ids.len() != count {
        return Err(err(1, format!("header says {count} rows, found {}", node_ids.len())));
    }
    Ok(EmbeddingFile {
        node_ids,
        table: Matrix::new(count, dim, data)?,
        labels,
    })
}
