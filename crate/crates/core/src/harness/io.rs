//! Plain-text file formats.
//!
//! - Observations: one `row col value` triplet per line, 0-based indices,
//!   whitespace separated. Blank lines and `#` comments are ignored.
//! - Dense matrices: CSV, one line per matrix row, values written with 17
//!   significant digits so they read back bit-exact.
//! - Traces: JSON lines, one [`TraceLine`] per outer iteration.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::objective::{CompletionProblem, Observation};
use crate::solver::{IterationRecord, SolveTrace, Variant};
use crate::spectral::DenseMatrix;

use super::HarnessError;

fn open(path: &Path) -> Result<File, HarnessError> {
    File::open(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File, HarnessError> {
    File::create(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_triplets(
    reader: impl BufRead,
    rows: usize,
    cols: usize,
) -> Result<CompletionProblem, HarnessError> {
    let mut observed = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| HarnessError::Io {
            path: "<triplets>".into(),
            source,
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(HarnessError::Malformed {
                line: lineno,
                message: format!("expected `row col value`, found {} fields", fields.len()),
            });
        }
        let index = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|e| HarnessError::Malformed {
                line: lineno,
                message: format!("bad {what} index `{s}`: {e}"),
            })
        };
        let row = index(fields[0], "row")?;
        let col = index(fields[1], "column")?;
        let value: f64 = fields[2].parse().map_err(|e| HarnessError::Malformed {
            line: lineno,
            message: format!("bad value `{}`: {e}", fields[2]),
        })?;
        if !value.is_finite() {
            return Err(HarnessError::Malformed {
                line: lineno,
                message: format!("value `{}` is not finite", fields[2]),
            });
        }
        if row >= rows || col >= cols {
            return Err(HarnessError::OutOfBounds {
                line: lineno,
                row,
                col,
                rows,
                cols,
            });
        }
        if !seen.insert((row, col)) {
            return Err(HarnessError::Duplicate {
                line: lineno,
                row,
                col,
            });
        }
        observed.push(Observation { row, col, value });
    }
    Ok(CompletionProblem::new(rows, cols, observed)?)
}

/// Reads observed entries of a `rows x cols` matrix from a triplet file.
pub fn load_problem(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
) -> Result<CompletionProblem, HarnessError> {
    let path = path.as_ref();
    parse_triplets(BufReader::new(open(path)?), rows, cols)
}

pub fn save_problem(problem: &CompletionProblem, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let io_err = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(create(path)?);
    writeln!(w, "# {} x {} observed entries: row col value", problem.rows(), problem.cols())
        .map_err(io_err)?;
    for o in problem.observations() {
        writeln!(w, "{} {} {:.16e}", o.row, o.col, o.value).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_matrix(x: &DenseMatrix, writer: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in x.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: "<matrix>".into(),
        source,
    })
}

pub fn save_matrix(x: &DenseMatrix, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    write_matrix(x, create(path.as_ref())?)
}

pub fn read_matrix(reader: impl std::io::Read) -> Result<DenseMatrix, HarnessError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, record) in r.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(HarnessError::Malformed {
                    line,
                    message: format!("row has {} fields, expected {c}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|e| HarnessError::Malformed {
                line,
                message: format!("bad value `{field}`: {e}"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(HarnessError::Malformed {
            line: 1,
            message: "matrix file is empty".into(),
        });
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, &values))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix, HarnessError> {
    read_matrix(open(path.as_ref())?)
}

/// One JSON line of a solve trace.
///
/// `k` counts outer iterations across all continuation stages;
/// `stage_k` restarts at zero in each stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub method: Variant,
    pub stage: usize,
    pub lambda: f64,
    pub k: usize,
    pub stage_k: usize,
    pub objective: f64,
    pub surrogate: f64,
    pub lbar: f64,
    pub inner_iterations: usize,
    pub residual: f64,
    pub rank: usize,
    pub elapsed_secs: f64,
}

impl TraceLine {
    fn new(trace: &SolveTrace, stage: usize, k: usize, r: &IterationRecord) -> Self {
        Self {
            method: trace.variant,
            stage,
            lambda: trace.lambda,
            k,
            stage_k: r.k,
            objective: r.objective,
            surrogate: r.surrogate,
            lbar: r.lbar,
            inner_iterations: r.inner_iterations,
            residual: r.residual,
            rank: r.rank,
            elapsed_secs: r.elapsed_secs,
        }
    }
}

pub fn trace_lines(stages: &[SolveTrace]) -> Vec<TraceLine> {
    let mut k = 0;
    let mut out = Vec::new();
    for (stage, trace) in stages.iter().enumerate() {
        for r in &trace.records {
            out.push(TraceLine::new(trace, stage, k, r));
            k += 1;
        }
    }
    out
}

pub fn write_trace_jsonl(stages: &[SolveTrace], mut writer: impl Write) -> Result<(), HarnessError> {
    for line in trace_lines(stages) {
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n").map_err(|source| HarnessError::Io {
            path: "<trace>".into(),
            source,
        })?;
    }
    Ok(())
}

pub fn save_trace_jsonl(stages: &[SolveTrace], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(create(path)?);
    write_trace_jsonl(stages, &mut w)?;
    w.flush().map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_with_comments() {
        let text = "# header\n0 0 1.5\n\n  2 1 -3e-2  # trailing\n1 0 4\n";
        let p = parse_triplets(text.as_bytes(), 3, 2).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.observations()[1], Observation { row: 2, col: 1, value: -3e-2 });
    }

    #[test]
    fn empty_file_is_empty_problem() {
        let p = parse_triplets("".as_bytes(), 4, 4).unwrap();
        assert!(p.is_empty());
        let p = parse_triplets("# nothing\n\n".as_bytes(), 4, 4).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn triplet_errors_carry_line_numbers() {
        let err = parse_triplets("0 0 1\n3 0 2\n".as_bytes(), 3, 3).unwrap_err();
        assert!(matches!(err, HarnessError::OutOfBounds { line: 2, row: 3, col: 0, .. }));
        let err = parse_triplets("0 0 1\n\n0 0 2\n".as_bytes(), 3, 3).unwrap_err();
        assert!(matches!(err, HarnessError::Duplicate { line: 3, row: 0, col: 0 }));
        let err = parse_triplets("0 0\n".as_bytes(), 3, 3).unwrap_err();
        assert!(matches!(err, HarnessError::Malformed { line: 1, .. }));
        let err = parse_triplets("# c\n-1 0 2\n".as_bytes(), 3, 3).unwrap_err();
        assert!(matches!(err, HarnessError::Malformed { line: 2, .. }));
        let err = parse_triplets("0 1 nan\n".as_bytes(), 3, 3).unwrap_err();
        assert!(matches!(err, HarnessError::Malformed { line: 1, .. }));
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let x = DenseMatrix::from_fn(3, 4, |i, j| {
            (i as f64 + 0.1) / (j as f64 + 3.0) * std::f64::consts::PI - 1e-300 * j as f64
        });
        let mut buf = Vec::new();
        write_matrix(&x, &mut buf).unwrap();
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), x);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let err = read_matrix("1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, HarnessError::Malformed { line: 2, .. }));
        assert!(read_matrix("".as_bytes()).is_err());
        assert!(read_matrix("1,x\n".as_bytes()).is_err());
    }
}
