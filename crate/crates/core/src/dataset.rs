//! Plain-text vector datasets: one vector per line, values separated by
//! commas or whitespace. Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

fn data_err(line: usize, message: impl Into<String>) -> Error {
    Error::Data { line, message: message.into() }
}

/// Parses dataset text. All vectors must share one dimension.
pub fn parse(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(|tok| {
                let x: f64 = tok.parse().map_err(|_| data_err(line_no, format!("cannot parse `{tok}` as a number")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(data_err(line_no, format!("non-finite value `{tok}`")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if v.is_empty() {
            return Err(data_err(line_no, "no values on line"));
        }
        if let Some(first) = out.first() {
            if first.len() != v.len() {
                return Err(data_err(line_no, format!("expected {} values, found {}", first.len(), v.len())));
            }
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(data_err(0, "dataset has no vectors"));
    }
    Ok(out)
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    parse(&fs::read_to_string(path)?)
}
