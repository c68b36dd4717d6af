//! Plain-text embedding store.
//!
//! A header line `num_vectors dim`, then one line per vector: the key
//! followed by `dim` space-separated decimals. GloVe files, which lack the
//! header, are read through the same function.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::numcore::Matrix;

pub fn write_store(keys: &[String], vectors: &Matrix) -> String {
    assert_eq!(keys.len(), vectors.rows());
    let mut out = format!("{} {}\n", vectors.rows(), vectors.cols());
    for (r, key) in keys.iter().enumerate() {
        out.push_str(key);
        for v in vectors.row(r) {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn read_store(text: &str) -> Result<(Vec<String>, Matrix)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let mut declared: Option<(usize, usize)> = None;
    if let Some((_, first)) = lines.peek() {
        let parts: Vec<&str> = first.split_whitespace().collect();
        if let [n, d] = parts[..] {
            if let (Ok(n), Ok(d)) = (n.parse::<usize>(), d.parse::<usize>()) {
                declared = Some((n, d));
                lines.next();
            }
        }
    }
    let mut keys = Vec::new();
    let mut data = Vec::new();
    let mut dim = declared.map(|(_, d)| d);
    for (n, line) in lines {
        let mut parts = line.split_whitespace();
        let key = parts.next().expect("non-empty line");
        let start = data.len();
        for p in parts {
            data.push(p.parse::<f64>().map_err(|e| Error::Parse {
                line: n + 1,
                msg: format!("bad component `{p}`: {e}"),
            })?);
        }
        let width = data.len() - start;
        match dim {
            Some(d) if d != width => {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("expected {d} components, found {width}"),
                })
            }
            None => dim = Some(width),
            _ => {}
        }
        keys.push(key.to_string());
    }
    if let Some((n, _)) = declared {
        if n != keys.len() {
            return Err(Error::Format(format!("header declares {n} vectors, found {}", keys.len())));
        }
    }
    let dim = dim.unwrap_or(0);
    Ok((keys.clone(), Matrix::from_vec(keys.len(), dim, data)?))
}

pub fn load_store(path: &Path) -> Result<(Vec<String>, Matrix)> {
    read_store(&fsutil::read_to_string(path)?)
}
