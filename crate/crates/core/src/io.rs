//! Text formats for graphs, features and labels.
//!
//! * Edge list: one `u v` pair per line, `#` starts a comment, an optional
//!   `#nodes N` line fixes the node count (otherwise `max index + 1`).
//! * Features: CSV, one row per node, no header.
//! * Labels: one non-negative integer per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text)
}

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut declared = None;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let mut parts = comment.split_whitespace();
            if parts.next() == Some("nodes") {
                let value = parts.next().ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "`#nodes` header without a count".into(),
                })?;
                declared = Some(parse_index(value, line_no)?);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected two node indices, got `{line}`"),
            });
        };
        let (u, v) = (parse_index(a, line_no)?, parse_index(b, line_no)?);
        if u == v {
            return Err(Error::SelfLoop {
                line: line_no,
                node: u,
            });
        }
        edges.push((u, v));
    }
    let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max();
    let n = match (declared, inferred) {
        (Some(n), _) => n,
        (None, Some(n)) => n,
        (None, None) => return Err(Error::Empty),
    };
    Graph::new(n, edges)
}

fn parse_index(token: &str, line: usize) -> Result<usize> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{token}` is not a non-negative integer"),
    })
}

pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("#nodes {}\n", g.num_nodes());
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text)
}

pub fn parse_features(text: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("`{}` is not a number", tok.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let d = rows.first().map(Vec::len).ok_or(Error::Empty)?;
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, d), flat).expect("rows have equal length"))
}

pub fn write_features(x: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let labels = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_index(l.trim(), i + 1))
        .collect::<Result<Vec<_>>>()?;
    if labels.is_empty() {
        return Err(Error::Empty);
    }
    Ok(labels)
}

pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for l in labels {
        writeln!(file, "{l}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// `lambda,response`-style two-column CSV with a header row.
pub fn write_pairs_csv(
    header: (&str, &str),
    rows: &[(f64, f64)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("{},{}\n", header.0, header.1);
    for (a, b) in rows {
        out.push_str(&format!("{a:.17e},{b:.17e}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// CSV with a header line and preformatted rows.
pub fn write_csv(header: &str, rows: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
