//! CSV ingestion and deterministic numeric output.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

/// Parse a headered `t,y` CSV. Rows are sorted by `t` when needed; duplicate
/// abscissae are rejected. Warnings go to `warn`.
pub fn parse_dataset(reader: impl Read, warn: &mut dyn FnMut(&str)) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["t", "y"] {
        return Err(CliError::input(format!(
            "line 1: expected header `t,y`, found `{}`",
            names.join(",")
        )));
    }
    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(CliError::input(format!(
                "line {line}: expected 2 fields, found {}",
                record.len()
            )));
        }
        let field = |k: usize, name: &str| -> CliResult<f64> {
            let raw = &record[k];
            let v: f64 = raw.parse().map_err(|_| {
                CliError::input(format!("line {line}: cannot parse {name} = `{raw}`"))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(format!(
                    "line {line}: {name} is not finite"
                )));
            }
            Ok(v)
        };
        rows.push((field(0, "t")?, field(1, "y")?, line));
    }
    if rows.windows(2).any(|w| w[1].0 < w[0].0) {
        warn("warning: input rows are not sorted by t; sorting");
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    if let Some(w) = rows.windows(2).find(|w| w[1].0 == w[0].0) {
        return Err(CliError::input(format!(
            "lines {} and {}: duplicate t = {}",
            w[0].2.min(w[1].2),
            w[0].2.max(w[1].2),
            fmt_f64(w[0].0)
        )));
    }
    Ok(Dataset {
        t: rows.iter().map(|r| r.0).collect(),
        y: rows.iter().map(|r| r.1).collect(),
    })
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let file = File::open(path)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    parse_dataset(file, &mut |m| eprintln!("{m}"))
}

/// `NATSPLINE_OUT` when set, otherwise the given directory.
pub fn resolve_output_dir(flag: &Path) -> PathBuf {
    match std::env::var_os("NATSPLINE_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.to_path_buf(),
    }
}

pub fn prepare_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::input(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

/// Write rows of already formatted fields.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if !header.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let file = File::create(path)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    write_csv(std::io::BufWriter::new(file), header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> (CliResult<Dataset>, Vec<String>) {
        let mut warnings = Vec::new();
        let r = parse_dataset(s.as_bytes(), &mut |m| warnings.push(m.to_string()));
        (r, warnings)
    }

    #[test]
    fn round_trip_formatting() {
        for x in [0.1, 551.4428571428571, -1e-300, 1.0 / 3.0, 2.0, 1e22] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn accepts_crlf_and_sorts() {
        let (d, w) = parse("t,y\r\n1,2\r\n0,1\r\n2,3\r\n");
        let d = d.unwrap();
        assert_eq!(d.t, vec![0.0, 1.0, 2.0]);
        assert_eq!(d.y, vec![1.0, 2.0, 3.0]);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn line_numbered_errors() {
        let msg = parse("t,y\n0,1\n0.5,abc\n").0.unwrap_err().to_string();
        assert!(msg.starts_with("line 3:"), "{msg}");
        let msg = parse("t,y\n0,1\n1,inf\n").0.unwrap_err().to_string();
        assert!(msg.starts_with("line 3:"), "{msg}");
        let msg = parse("x,y\n0,1\n").0.unwrap_err().to_string();
        assert!(msg.starts_with("line 1:"), "{msg}");
        let msg = parse("t,y\n0,1\n1,2\n0,3\n").0.unwrap_err().to_string();
        assert!(
            msg.contains("lines 2 and 4") && msg.contains("duplicate"),
            "{msg}"
        );
        assert!(parse("t,y\n0,1,2\n").0.is_err());
    }
}
