//! Plain-text I/O: CSV signals, spectrogram and feature matrices with a
//! comment header, per-repeat benchmark rows, and binary PGM images.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use spectemp::simbench::BenchReport;
use spectemp::spectrogram::{FeatureMatrix, SpectroTemporalMatrix};

use crate::CliError;

/// Parsed signal file: always carries values, optionally one timestamp per
/// row.
pub struct SignalFile {
    pub times: Option<Vec<f64>>,
    pub values: Vec<f64>,
}

pub fn read_signal_csv(path: &Path) -> Result<SignalFile, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut columns: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let ncols = fields.len();
        match columns {
            None if ncols == 1 || ncols == 2 => columns = Some(ncols),
            Some(c) if c == ncols => {}
            _ => {
                return Err(CliError::format(format!(
                    "{}: line {} has {} columns, expected 1 or 2 consistently",
                    path.display(),
                    lineno + 1,
                    ncols
                )))
            }
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|_| {
                CliError::format(format!(
                    "{}: line {}: '{}' is not a number",
                    path.display(),
                    lineno + 1,
                    s
                ))
            })
        };
        if ncols == 2 {
            times.push(parse(fields[0])?);
            values.push(parse(fields[1])?);
        } else {
            values.push(parse(fields[0])?);
        }
    }
    if values.is_empty() {
        return Err(CliError::format(format!(
            "{}: no data rows found",
            path.display()
        )));
    }
    Ok(SignalFile {
        times: if times.is_empty() { None } else { Some(times) },
        values,
    })
}

pub fn write_signal_csv(path: &Path, times: &[f64], values: &[f64]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (t, y) in times.iter().zip(values) {
        writeln!(out, "{t},{y}").map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

/// Spectrogram CSV: one comment header, then `M` rows of `N` values at
/// nine significant digits, row `j` holding frequency `freqs[j]`.
pub fn write_matrix_csv(
    path: &Path,
    matrix: &SpectroTemporalMatrix,
    method: &str,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "# method={method} f0={} M={} dt={} burn_in={}",
        matrix.freqs[0],
        matrix.num_freqs(),
        matrix.dt,
        matrix.burn_in_cols
    )
    .map_err(|e| CliError::io(path, e))?;
    write_rows(&mut out, &matrix.values).map_err(|e| CliError::io(path, e))?;
    out.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_feature_csv(path: &Path, feature: &FeatureMatrix) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_rows(&mut out, feature.values()).map_err(|e| CliError::io(path, e))?;
    out.flush().map_err(|e| CliError::io(path, e))
}

fn write_rows<W: Write>(out: &mut W, values: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            if j > 0 {
                write!(out, ",")?;
            }
            write!(out, "{:.8e}", values[(i, j)])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Header metadata of a spectrogram CSV.
pub struct MatrixHeader {
    pub method: String,
    pub f0: f64,
    pub num_freqs: usize,
    pub dt: f64,
    pub burn_in: usize,
}

pub fn read_matrix_csv(path: &Path) -> Result<(MatrixHeader, DMatrix<f64>), CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut header: Option<MatrixHeader> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let mut method = String::new();
            let mut f0 = 0.0;
            let mut num_freqs = 0;
            let mut dt = 0.0;
            let mut burn_in = 0;
            for token in rest.split_whitespace() {
                if let Some((key, value)) = token.split_once('=') {
                    match key {
                        "method" => method = value.to_string(),
                        "f0" => f0 = value.parse().unwrap_or(0.0),
                        "M" => num_freqs = value.parse().unwrap_or(0),
                        "dt" => dt = value.parse().unwrap_or(0.0),
                        "burn_in" => burn_in = value.parse().unwrap_or(0),
                        _ => {}
                    }
                }
            }
            header = Some(MatrixHeader {
                method,
                f0,
                num_freqs,
                dt,
                burn_in,
            });
            continue;
        }
        let row: Result<Vec<f64>, _> = trimmed.split(',').map(|s| s.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| CliError::format(format!("{}: {e}", path.display())))?);
    }
    let header = header
        .ok_or_else(|| CliError::format(format!("{}: missing '#' header line", path.display())))?;
    if rows.is_empty() {
        return Err(CliError::format(format!("{}: no rows", path.display())));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::format(format!(
            "{}: ragged rows",
            path.display()
        )));
    }
    let matrix = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    Ok((header, matrix))
}

/// Binary 8-bit PGM scaled by the matrix maximum, frequency axis
/// bottom-to-top (first matrix row is the lowest frequency and lands on
/// the bottom image row).
pub fn write_pgm(path: &Path, values: &DMatrix<f64>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let (rows, cols) = (values.nrows(), values.ncols());
    write!(out, "P5\n{cols} {rows}\n255\n").map_err(|e| CliError::io(path, e))?;
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let mut buf = Vec::with_capacity(rows * cols);
    for i in (0..rows).rev() {
        for j in 0..cols {
            let px = if max > 0.0 {
                (values[(i, j)] / max * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            buf.push(px);
        }
    }
    out.write_all(&buf).map_err(|e| CliError::io(path, e))?;
    out.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_bench_csv(path: &Path, report: &BenchReport) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "method,length,repeat,phase,seconds").map_err(|e| CliError::io(path, e))?;
    for entry in &report.entries {
        writeln!(
            out,
            "{},{},{},{},{:.6}",
            entry.method.as_str(),
            entry.length,
            entry.repeat,
            entry.phase.as_str(),
            entry.seconds
        )
        .map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}
