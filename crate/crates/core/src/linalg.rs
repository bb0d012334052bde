//! Dense and sparse kernels shared by the losses, the inner solver and the
//! diagnostics.
//!
//! Vectors are plain `[f64]` slices. Matrices come in two flavours:
//! [`DenseMatrix`] (row-major) and [`SparseMatrix`] (compressed rows with a
//! column-major mirror for coordinate access). Curvature operators
//! `B + alpha * I` are carried by [`HessianRep`], which keeps the
//! `A^T diag(d) A / N` structure of generalized linear losses instead of
//! forming `B`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scale(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Anything that can be applied to a vector and transposed-applied.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn matvec(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>>;
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        (0..self.rows).all(|i| {
            (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= rel_tol * scale)
        })
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, self.row(i), &mut out);
        }
        Ok(out)
    }
}

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and explicit zeros
/// are never stored. A column-major copy and the squared column norms are
/// built once at construction; coordinate descent walks columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    // column-major mirror
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_values: Vec<f64>,
    col_sq_norms: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists. Zero values are dropped.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(j, v) in row {
                if j >= cols {
                    return Err(Error::InvalidMatrix(format!(
                        "row {i}: column {j} out of range for {cols} columns"
                    )));
                }
                if prev.is_some_and(|p| j <= p) {
                    return Err(Error::InvalidMatrix(format!(
                        "row {i}: column indices not strictly increasing at {j}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidMatrix(format!("row {i}: non-finite value")));
                }
                prev = Some(j);
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::assemble(rows.len(), cols, row_ptr, col_idx, values))
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = (0..m.rows)
            .map(|i| m.row(i).iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect())
            .collect();
        Self::from_rows(m.cols, &rows).expect("dense rows are well formed")
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
        Self::from_rows(n, &rows).expect("identity is well formed")
    }

    fn assemble(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let mut counts = vec![0usize; cols + 1];
        for &j in &col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..cols {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0; col_idx.len()];
        let mut col_values = vec![0.0; col_idx.len()];
        for i in 0..rows {
            for p in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[p];
                row_idx[next[j]] = i;
                col_values[next[j]] = values[p];
                next[j] += 1;
            }
        }
        let col_sq_norms = (0..cols)
            .map(|j| col_values[col_ptr[j]..col_ptr[j + 1]].iter().map(|v| v * v).sum())
            .collect();
        Self { rows, cols, row_ptr, col_idx, values, col_ptr, row_idx, col_values, col_sq_norms }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// `(row, value)` pairs of column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.col_values[r].iter().copied())
    }

    pub fn column_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    /// Returns a copy with each row multiplied by the matching factor.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        check_len(self.rows, factors.len())?;
        let rows: Vec<Vec<(usize, f64)>> = (0..self.rows)
            .map(|i| self.row(i).map(|(j, v)| (j, v * factors[i])).collect())
            .collect();
        Self::from_rows(self.cols, &rows)
    }

    /// Keeps only the listed rows, in the listed order.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = keep.iter().map(|&i| self.row(i).collect()).collect();
        Self::from_rows(self.cols, &rows).expect("subset of a valid matrix")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m.data[i * self.cols + j] = v;
            }
        }
        m
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| self.row_dot(i, x)).collect())
    }

    fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * yi;
                }
            }
        }
        Ok(out)
    }
}

/// Curvature part of a [`HessianRep`].
#[derive(Debug, Clone)]
pub enum Curvature {
    /// Explicit symmetric positive semidefinite matrix.
    Dense(DenseMatrix),
    /// `A^T diag(weights) A * scale`, never materialized.
    Structured { a: Arc<SparseMatrix>, weights: Vec<f64>, scale: f64 },
}

/// The operator `B + alpha * I`.
#[derive(Debug, Clone)]
pub struct HessianRep {
    pub curvature: Curvature,
    pub alpha: f64,
}

impl HessianRep {
    pub fn dense(b: DenseMatrix, alpha: f64) -> Result<Self> {
        if !b.is_symmetric(1e-12) {
            return Err(Error::InvalidMatrix("dense Hessian must be symmetric".into()));
        }
        Self::check_alpha(alpha)?;
        Ok(Self { curvature: Curvature::Dense(b), alpha })
    }

    pub fn structured(a: Arc<SparseMatrix>, weights: Vec<f64>, scale: f64, alpha: f64) -> Result<Self> {
        check_len(a.nrows(), weights.len())?;
        if weights.iter().any(|w| !(*w >= 0.0)) || !(scale >= 0.0) {
            return Err(Error::InvalidMatrix("structured weights must be nonnegative".into()));
        }
        Self::check_alpha(alpha)?;
        Ok(Self { curvature: Curvature::Structured { a, weights, scale }, alpha })
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidMatrix(format!("ridge must be finite and >= 0, got {alpha}")));
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        Self::check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        match &self.curvature {
            Curvature::Dense(b) => b.ncols(),
            Curvature::Structured { a, .. } => a.ncols(),
        }
    }

    /// `(B + alpha I) v`
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply_curvature(v)?;
        axpy(self.alpha, v, &mut out);
        Ok(out)
    }

    /// `B v` without the ridge.
    pub fn apply_curvature(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        match &self.curvature {
            Curvature::Dense(b) => b.matvec(v),
            Curvature::Structured { a, weights, scale } => {
                let mut av = a.matvec(v)?;
                for (u, w) in av.iter_mut().zip(weights) {
                    *u *= w * scale;
                }
                a.matvec_transpose(&av)
            }
        }
    }

    /// Exact diagonal of `B + alpha I`.
    pub fn diag(&self) -> Vec<f64> {
        match &self.curvature {
            Curvature::Dense(b) => (0..b.ncols()).map(|j| b.get(j, j) + self.alpha).collect(),
            Curvature::Structured { a, weights, scale } => (0..a.ncols())
                .map(|j| {
                    let s: f64 = a.column(j).map(|(i, v)| weights[i] * v * v).sum();
                    s * scale + self.alpha
                })
                .collect(),
        }
    }

    /// Power-iteration estimate of `||B||` (ridge excluded).
    pub fn curvature_norm(&self, tol: f64, max_iter: usize, seed: u64) -> SpectralEstimate {
        let n = self.dim();
        power_iteration(n, tol, max_iter, seed, |v| {
            self.apply_curvature(v).expect("dimension fixed by construction")
        })
    }
}

/// Result of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const SPECTRAL_TOL: f64 = 1e-6;
pub const SPECTRAL_MAX_ITER: usize = 500;
pub const SPECTRAL_SEED: u64 = 42;

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
fn power_iteration(
    n: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
    op: impl Fn(&[f64]) -> Vec<f64>,
) -> SpectralEstimate {
    if n == 0 {
        return SpectralEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let w = op(&v);
        let nw = norm(&w);
        if nw == 0.0 {
            return SpectralEstimate { value: 0.0, iterations: it, converged: true };
        }
        let prev = lambda;
        lambda = nw;
        v = w.into_iter().map(|x| x / nw).collect();
        if it > 1 && (lambda - prev).abs() <= tol * lambda {
            return SpectralEstimate { value: lambda, iterations: it, converged: true };
        }
    }
    SpectralEstimate { value: lambda, iterations: max_iter, converged: false }
}

/// Largest singular value of `a` via power iteration on `A^T A`.
///
/// The relative tolerance applies to the singular value, so the eigenvalue
/// iteration runs at `tol` as well (its relative error is twice as large,
/// which only makes the stop more conservative).
pub fn estimate_spectral_norm<A: LinearOperator + ?Sized>(
    a: &A,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SpectralEstimate> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidMatrix("spectral norm of an empty matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("spectral tolerance must be positive".into()));
    }
    let est = power_iteration(a.ncols(), tol, max_iter, seed, |v| {
        let av = a.matvec(v).expect("dimension fixed");
        a.matvec_transpose(&av).expect("dimension fixed")
    });
    Ok(SpectralEstimate { value: est.value.sqrt(), ..est })
}
