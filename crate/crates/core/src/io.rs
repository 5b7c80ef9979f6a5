//! Plain-text formats: matrix CSV, the `tensor J n1 .. nJ` format, weight
//! graph files (`i,j,w`), traces and cluster assignments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::model::{ClusterAssignment, WeightGraph};
use crate::solvers::ConvergenceTrace;
use crate::tensor::DenseTensor;
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "iter,elapsed_s,objective,primal_res,dual_res";

fn parse_err(path: &str, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Parses CSV text; `origin` names the source in error messages.
pub fn parse_matrix_csv(text: &str, origin: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, rec) in csv_reader(text).records().enumerate() {
        let rec = rec.map_err(|e| parse_err(origin, idx + 1, 1, e.to_string()))?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, usize>> = rec
            .iter()
            .enumerate()
            .map(|(c, f)| f.parse::<f64>().map_err(|_| c + 1))
            .collect();
        if rows.is_empty() && width.is_none() && parsed.iter().any(|r| r.is_err()) {
            // Header row.
            width = Some(rec.len());
            continue;
        }
        let values = parsed
            .into_iter()
            .zip(rec.iter())
            .map(|(r, f)| r.map_err(|c| parse_err(origin, line, c, format!("not a number: {f:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        match width {
            Some(w) if w != values.len() => {
                return Err(parse_err(
                    origin,
                    line,
                    values.len().min(w) + 1,
                    format!("expected {w} fields, found {}", values.len()),
                ))
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Format(format!("{origin}: no data rows")));
    }
    let p = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), p, rows.into_iter().flatten()))
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    parse_matrix_csv(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{}", m[(r, c)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    Ok(fs::write(path, format_matrix_csv(m))?)
}

pub fn parse_tensor(text: &str, origin: &str) -> Result<DenseTensor<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{origin}: empty tensor file")))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("tensor") {
        return Err(parse_err(origin, hline + 1, 1, "header must start with \"tensor\""));
    }
    let nums: Vec<usize> = head
        .enumerate()
        .map(|(k, tok)| {
            tok.parse::<usize>()
                .map_err(|_| parse_err(origin, hline + 1, k + 2, format!("bad header field {tok:?}")))
        })
        .collect::<Result<_>>()?;
    let (order, dims) = match nums.split_first() {
        Some((&j, rest)) if j >= 1 && rest.len() == j => (j, rest.to_vec()),
        _ => {
            return Err(parse_err(
                origin,
                hline + 1,
                2,
                "header must read \"tensor J n1 .. nJ\" with J >= 1",
            ))
        }
    };
    debug_assert_eq!(order, dims.len());
    let mut values = Vec::with_capacity(dims.iter().product());
    for (ln, line) in lines {
        for (k, tok) in line.split_whitespace().enumerate() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| parse_err(origin, ln + 1, k + 1, format!("not a number: {tok:?}")))?;
            values.push(v);
        }
    }
    let expected: usize = dims.iter().product();
    if values.len() != expected {
        return Err(Error::Format(format!(
            "{origin}: expected {expected} values for dims {dims:?}, found {}",
            values.len()
        )));
    }
    DenseTensor::new(dims, values)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor<f64>> {
    let path = path.as_ref();
    parse_tensor(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn format_tensor(t: &DenseTensor<f64>) -> String {
    let mut out = format!("tensor {}", t.order());
    for d in t.dims() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    let last = *t.dims().last().unwrap_or(&1);
    for (k, v) in t.values().iter().enumerate() {
        write!(out, "{v}").unwrap();
        out.push(if (k + 1) % last.max(1) == 0 { '\n' } else { ' ' });
    }
    out
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor<f64>) -> Result<()> {
    Ok(fs::write(path, format_tensor(t))?)
}

pub fn parse_weight_graph(text: &str, n_vertices: usize, origin: &str) -> Result<WeightGraph<f64>> {
    let mut edges = Vec::new();
    for (idx, rec) in csv_reader(text).records().enumerate() {
        let rec = rec.map_err(|e| parse_err(origin, idx + 1, 1, e.to_string()))?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_err(origin, line, 1, format!("expected i,j,w, found {} fields", rec.len())));
        }
        if idx == 0 && rec[0].parse::<usize>().is_err() {
            continue;
        }
        let i = rec[0]
            .parse::<usize>()
            .map_err(|_| parse_err(origin, line, 1, format!("bad vertex {:?}", &rec[0])))?;
        let j = rec[1]
            .parse::<usize>()
            .map_err(|_| parse_err(origin, line, 2, format!("bad vertex {:?}", &rec[1])))?;
        let w = rec[2]
            .parse::<f64>()
            .map_err(|_| parse_err(origin, line, 3, format!("bad weight {:?}", &rec[2])))?;
        edges.push((i, j, w));
    }
    WeightGraph::new(n_vertices, edges)
}

pub fn load_weight_graph(path: impl AsRef<Path>, n_vertices: usize) -> Result<WeightGraph<f64>> {
    let path = path.as_ref();
    parse_weight_graph(&fs::read_to_string(path)?, n_vertices, &path.display().to_string())
}

pub fn format_weight_graph(g: &WeightGraph<f64>) -> String {
    let mut out = String::new();
    for &(i, j, w) in g.edges() {
        writeln!(out, "{i},{j},{w}").unwrap();
    }
    out
}

pub fn save_weight_graph(path: impl AsRef<Path>, g: &WeightGraph<f64>) -> Result<()> {
    Ok(fs::write(path, format_weight_graph(g))?)
}

pub fn format_trace(trace: &ConvergenceTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iter, r.elapsed_s, r.objective, r.primal_res, r.dual_res
        )
        .unwrap();
    }
    out
}

pub fn save_trace(path: impl AsRef<Path>, trace: &ConvergenceTrace) -> Result<()> {
    Ok(fs::write(path, format_trace(trace))?)
}

/// Parses a trace written by [`format_trace`]; the returned matrix has one row
/// per iteration and the five header columns.
pub fn parse_trace(text: &str, origin: &str) -> Result<DMatrix<f64>> {
    let first = text.lines().next().unwrap_or("");
    if first.trim() != TRACE_HEADER {
        return Err(parse_err(origin, 1, 1, format!("expected header {TRACE_HEADER:?}")));
    }
    parse_matrix_csv(text, origin)
}

pub fn format_assignments(a: &ClusterAssignment) -> String {
    let mut out = String::from("mode,index,cluster\n");
    for (mode, labels) in a.labels.iter().enumerate() {
        for (i, c) in labels.iter().enumerate() {
            writeln!(out, "{mode},{i},{c}").unwrap();
        }
    }
    out
}

pub fn save_assignments(path: impl AsRef<Path>, a: &ClusterAssignment) -> Result<()> {
    Ok(fs::write(path, format_assignments(a))?)
}

/// Reads `mode,index,cluster` rows back into per-mode label vectors.
pub fn parse_assignments(text: &str, origin: &str) -> Result<Vec<Vec<usize>>> {
    let m = parse_matrix_csv(text, origin)?;
    if m.ncols() != 3 {
        return Err(Error::Format(format!("{origin}: expected 3 columns")));
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for r in 0..m.nrows() {
        let (mode, idx, c) = (m[(r, 0)] as usize, m[(r, 1)] as usize, m[(r, 2)] as usize);
        if out.len() <= mode {
            out.resize(mode + 1, Vec::new());
        }
        if out[mode].len() <= idx {
            out[mode].resize(idx + 1, 0);
        }
        out[mode][idx] = c;
    }
    Ok(out)
}
