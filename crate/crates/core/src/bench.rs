//! Runs several algorithms on one instance under one stopping rule.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::model::ProblemInstance;
use crate::solvers::{solve, Algorithm, ConvergenceTrace, SolverParams};

#[derive(Debug, Clone)]
pub struct BenchEntry {
    pub algorithm: Algorithm,
    pub iterations: usize,
    /// Sub-problem iterations; equal to `iterations` except for COBRA.
    pub inner_iterations: usize,
    pub total_s: f64,
    pub final_objective: f64,
    pub converged: bool,
    pub error: Option<String>,
    pub trace: ConvergenceTrace,
}

impl BenchEntry {
    pub fn iters_per_s(&self) -> f64 {
        if self.total_s > 0.0 {
            self.iterations as f64 / self.total_s
        } else {
            f64::INFINITY
        }
    }

    /// Mean wall time of one iteration, excluding the setup before the first.
    pub fn seconds_per_iteration(&self) -> f64 {
        let rows = &self.trace.rows;
        match (rows.first(), rows.last()) {
            (Some(a), Some(b)) if rows.len() > 1 => (b.elapsed_s - a.elapsed_s) / (rows.len() - 1) as f64,
            (Some(a), _) => a.elapsed_s,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub checksum: String,
    pub max_iter: usize,
    pub entries: Vec<BenchEntry>,
}

pub const REPORT_HEADER: &str =
    "algorithm,iters_per_s,total_s,iterations,inner_iterations,final_objective,converged,note";

impl BenchReport {
    /// Non-converged runs report the cap in `iterations` and `capped` in the
    /// note column; failed runs carry the error message instead.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for e in &self.entries {
            let note = match (&e.error, e.converged) {
                (Some(msg), _) => format!("error: {}", msg.replace([',', '\n'], ";")),
                (None, true) => String::new(),
                (None, false) => format!("capped at {}", self.max_iter),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.algorithm,
                e.iters_per_s(),
                e.total_s,
                e.iterations,
                e.inner_iterations,
                e.final_objective,
                e.converged,
                note
            )
            .unwrap();
        }
        out
    }

    pub fn entry(&self, alg: Algorithm) -> Option<&BenchEntry> {
        self.entries.iter().find(|e| e.algorithm == alg)
    }
}

/// Row of a parsed report: algorithm name, then the numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub algorithm: Algorithm,
    pub iters_per_s: f64,
    pub total_s: f64,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    pub note: String,
}

pub fn parse_report(text: &str) -> crate::Result<Vec<ReportRow>> {
    let bad = |line: usize, msg: String| crate::Error::Parse {
        path: "bench report".into(),
        line,
        column: 1,
        message: msg,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(REPORT_HEADER) {
        return Err(bad(1, "missing header".into()));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.splitn(8, ',').collect();
        if f.len() != 8 {
            return Err(bad(k + 2, format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(k + 2, e.to_string()));
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(k + 2, e.to_string()));
        rows.push(ReportRow {
            algorithm: f[0].parse()?,
            iters_per_s: num(f[1])?,
            total_s: num(f[2])?,
            iterations: int(f[3])?,
            inner_iterations: int(f[4])?,
            final_objective: num(f[5])?,
            converged: f[6].parse().map_err(|_| bad(k + 2, format!("bad flag {:?}", f[6])))?,
            note: f[7].to_string(),
        });
    }
    Ok(rows)
}

/// Hex SHA-256 of the little-endian bytes of the data in column-major order.
pub fn data_checksum(m: &DMatrix<f64>) -> String {
    let mut h = Sha256::new();
    for v in m.iter() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

/// Runs `algorithms` in order on `inst`. Failures are recorded in the entry
/// and the remaining algorithms still run.
pub fn bench(inst: &ProblemInstance<f64>, algorithms: &[Algorithm], params: &SolverParams<f64>) -> BenchReport {
    let checksum = data_checksum(inst.data());
    let mut entries = Vec::with_capacity(algorithms.len());
    for &alg in algorithms {
        log::info!("bench {alg}: data sha256 {checksum}");
        let entry = match solve(inst, alg, params) {
            Ok((state, trace)) => BenchEntry {
                algorithm: alg,
                iterations: state.iter,
                inner_iterations: trace.inner_iterations,
                total_s: trace.elapsed_s(),
                final_objective: trace.final_objective().unwrap_or(f64::NAN),
                converged: state.converged,
                error: None,
                trace,
            },
            Err(e) => {
                log::warn!("bench {alg} failed: {e}");
                BenchEntry {
                    algorithm: alg,
                    iterations: 0,
                    inner_iterations: 0,
                    total_s: 0.0,
                    final_objective: f64::NAN,
                    converged: false,
                    error: Some(e.to_string()),
                    trace: ConvergenceTrace::default(),
                }
            }
        };
        entries.push(entry);
    }
    BenchReport { checksum, max_iter: params.max_iter, entries }
}
