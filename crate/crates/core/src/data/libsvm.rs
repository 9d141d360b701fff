use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::risk::{Dataset, Sample};
use crate::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses libsvm/svmlight text: `<label> <index>:<value> ...` per line with
/// 1-based, strictly increasing indices.
///
/// Labels `+1`/`1` map to +1 and `-1`/`0` to -1. Blank lines and `#` comments
/// are skipped. The dimension is the largest index seen unless `dim` is given,
/// in which case it must cover every index.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label = match label_tok.parse::<f64>() {
            Ok(1.0) => 1.0,
            Ok(v) if v == -1.0 || v == 0.0 => -1.0,
            _ => {
                return Err(parse_err(
                    lineno,
                    format!("label `{label_tok}` is not one of -1, 0, +1, 1"),
                ))
            }
        };
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected `index:value`, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature index 0 (indices are 1-based)"));
            }
            if idx <= prev {
                return Err(parse_err(
                    lineno,
                    format!("feature index {idx} does not increase past {prev}"),
                ));
            }
            if let Some(d) = dim {
                if idx > d {
                    return Err(parse_err(
                        lineno,
                        format!("feature index {idx} exceeds declared dimension {d}"),
                    ));
                }
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric value `{val}`")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value `{val}`")));
            }
            prev = idx;
            indices.push((idx - 1) as u32);
            values.push(val);
        }
        max_index = max_index.max(prev);
        samples.push(Sample { indices, values, label });
    }
    Dataset::new(samples, dim.unwrap_or(max_index))
}

pub fn read_libsvm_file(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    parse_libsvm(BufReader::new(File::open(path)?), dim)
}

/// Writes one line per sample. Values use the shortest representation that
/// parses back to the same `f64` (at most 17 significant digits).
pub fn write_libsvm<W: Write>(data: &Dataset, out: &mut W) -> std::io::Result<()> {
    for s in data.iter() {
        write!(out, "{}", if s.label > 0.0 { "+1" } else { "-1" })?;
        for (&j, &v) in s.indices.iter().zip(s.values) {
            write!(out, " {}:{v:?}", j + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
