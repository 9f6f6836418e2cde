//! Output conventions shared by the CLI: CSV tables with a `# key=value`
//! provenance line, JSON sidecars, and the sweep grid syntax.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid grid {spec:?}: {reason}")]
pub struct GridSyntaxError {
    pub spec: String,
    pub reason: String,
}

/// Parses a scalar (`2.5`), a list (`0,0.01,0.2`) or a sweep
/// `start:stop:count[:log]`. Linear grids include both ends; log grids are
/// geometric and need positive ends.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, GridSyntaxError> {
    if spec.contains(',') {
        return spec
            .split(',')
            .map(|item| match parse_grid(item)?.as_slice() {
                [v] => Ok(*v),
                _ => Err(GridSyntaxError {
                    spec: spec.to_string(),
                    reason: "list items must be plain numbers".into(),
                }),
            })
            .collect();
    }
    let err = |reason: &str| GridSyntaxError {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let number = |s: &str| -> Result<f64, GridSyntaxError> {
        let v: f64 = s.trim().parse().map_err(|_| err(&format!("{s:?} is not a number")))?;
        if v.is_nan() {
            return Err(err("NaN is not allowed"));
        }
        Ok(v)
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [value] => Ok(vec![number(value)?]),
        [start, stop, count] | [start, stop, count, _] => {
            let log = match parts.get(3).map(|s| s.trim()) {
                None | Some("lin") => false,
                Some("log") => true,
                Some(other) => return Err(err(&format!("unknown scale {other:?}, expected log or lin"))),
            };
            let (start, stop) = (number(start)?, number(stop)?);
            let count: usize = count.trim().parse().map_err(|_| err("count must be a positive integer"))?;
            if count == 0 {
                return Err(err("count must be a positive integer"));
            }
            if !(start.is_finite() && stop.is_finite()) {
                return Err(err("ends must be finite"));
            }
            if count == 1 {
                return Ok(vec![start]);
            }
            if log && !(start > 0.0 && stop > 0.0) {
                return Err(err("log grids need positive ends"));
            }
            let last = (count - 1) as f64;
            Ok((0..count)
                .map(|i| {
                    let w = i as f64 / last;
                    if i + 1 == count {
                        stop
                    } else if log {
                        (start.ln() + w * (stop.ln() - start.ln())).exp()
                    } else {
                        start + w * (stop - start)
                    }
                })
                .collect())
        }
        _ => Err(err("expected a number or start:stop:count[:log]")),
    }
}

/// Shortest representation that parses back to the same `f64`; infinities
/// print as `inf` and `-inf`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// `# key=value key=value` provenance line (without the `# `).
pub fn provenance(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_csv(path: &Path, comment: &str, header: &str, rows: &[String]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {comment}")?;
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()
}

/// `prefix` with `suffix` appended to the file name: `out/run` + `.csv`.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
