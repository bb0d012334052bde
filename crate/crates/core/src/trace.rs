//! Per-iteration records and their CSV form.
//!
//! The CSV schema is fixed: `k,F,g_norm,alpha,eta,inner_iters,branch,t,m,theta`
//! with floats written to 17 significant digits. Records carry a few more
//! fields (inner residual, model decrease, step length, next objective) that
//! the certificate checks use but the CSV does not export.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 10] =
    ["k", "F", "g_norm", "alpha", "eta", "inner_iters", "branch", "t", "m", "theta"];

/// How an outer iteration produced the next iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Full step accepted without line search.
    UnitStep,
    /// Backtracking line search.
    LineSearch,
    /// Proximal gradient baseline step.
    Pgm,
    /// Final row: the iterate the run stopped at. No step was taken.
    Terminal,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::UnitStep => "unit_step",
            Branch::LineSearch => "line_search",
            Branch::Pgm => "pgm",
            Branch::Terminal => "terminal",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_step" => Ok(Branch::UnitStep),
            "line_search" => Ok(Branch::LineSearch),
            "pgm" => Ok(Branch::Pgm),
            "terminal" => Ok(Branch::Terminal),
            other => Err(Error::Parse { line: 0, message: format!("unknown branch {other:?}") }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    /// `F(x_k)`
    pub f: f64,
    /// `||G(x_k)||`
    pub g_norm: f64,
    pub alpha: f64,
    pub eta: f64,
    pub inner_iters: usize,
    pub inner_converged: bool,
    /// `||r_k(x_hat)||`
    pub residual_norm: f64,
    /// `q_k(x_k) - q_k(x_hat)`
    pub q_drop: f64,
    pub branch: Branch,
    pub t: f64,
    pub m: usize,
    /// Reference residual after this iteration's update.
    pub theta: f64,
    /// `||x_hat - x_k||`
    pub step_norm: f64,
    /// `F(x_{k+1})`
    pub f_next: f64,
}

impl IterateRecord {
    pub(crate) fn terminal(k: usize, f: f64, g_norm: f64, alpha: f64, eta: f64, theta: f64) -> Self {
        Self {
            k,
            f,
            g_norm,
            alpha,
            eta,
            inner_iters: 0,
            inner_converged: true,
            residual_norm: 0.0,
            q_drop: 0.0,
            branch: Branch::Terminal,
            t: 0.0,
            m: 0,
            theta,
            step_norm: 0.0,
            f_next: f,
        }
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes records in the fixed CSV schema.
pub fn write_trace_csv<W: Write>(records: &[IterateRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            float(r.f),
            float(r.g_norm),
            float(r.alpha),
            float(r.eta),
            r.inner_iters.to_string(),
            r.branch.to_string(),
            float(r.t),
            r.m.to_string(),
            float(r.theta),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one numeric column (by header name) from a trace CSV.
pub fn read_trace_column<R: Read>(input: R, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(input);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| Error::Parse { line: 1, message: format!("no column named {column:?}") })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec.get(idx).unwrap_or("").trim();
        let v = field.parse::<f64>().map_err(|_| Error::Parse {
            line: i + 2,
            message: format!("not a number: {field:?}"),
        })?;
        out.push(v);
    }
    Ok(out)
}
