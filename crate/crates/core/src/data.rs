//! Datasets: LIBSVM text parsing and writing, row normalization, and a
//! seeded generator for synthetic binary classification data.
//!
//! The LIBSVM format is one sample per line:
//!
//! ```text
//! <label> <index>:<value> <index>:<value> ...
//! ```
//!
//! with 1-based, strictly increasing indices. Labels must be `+1`/`1` or
//! `-1`. Anything after `#` is a comment.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{LinearOperator, SparseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: SparseMatrix,
    pub labels: Vec<f64>,
    pub name: String,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses LIBSVM text, inferring the feature count from the largest index.
pub fn parse_libsvm<R: BufRead>(input: R, name: &str) -> Result<Dataset> {
    parse_libsvm_with_dim(input, name, None)
}

/// Parses LIBSVM text. `n_features` overrides the inferred dimension; it is
/// an error for it to be smaller than the largest index in the file.
pub fn parse_libsvm_with_dim<R: BufRead>(
    input: R,
    name: &str,
    n_features: Option<usize>,
) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_error(lineno, format!("bad label {label_tok:?}")))?;
        if label != 1.0 && label != -1.0 {
            return Err(parse_error(lineno, format!("label must be +1 or -1, got {label_tok:?}")));
        }

        let mut row = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_error(lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize =
                idx.parse().map_err(|_| parse_error(lineno, format!("bad index {idx:?}")))?;
            let val: f64 =
                val.parse().map_err(|_| parse_error(lineno, format!("bad value {val:?}")))?;
            if idx == 0 {
                return Err(parse_error(lineno, "indices are 1-based"));
            }
            if idx <= prev {
                return Err(parse_error(lineno, format!("index {idx} not increasing")));
            }
            if !val.is_finite() {
                return Err(parse_error(lineno, format!("non-finite value at index {idx}")));
            }
            prev = idx;
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
        labels.push(label);
    }

    let cols = match n_features {
        Some(n) if n < max_index => {
            return Err(parse_error(0, format!("feature count {n} below largest index {max_index}")))
        }
        Some(n) => n,
        None => max_index,
    };
    let features = SparseMatrix::from_rows(cols, &rows)?;
    Ok(Dataset { features, labels, name: name.to_string() })
}

/// Writes the dataset in LIBSVM text with shortest round-trip float
/// formatting.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for (i, b) in data.labels.iter().enumerate() {
        write!(out, "{}", if *b > 0.0 { "+1" } else { "-1" })?;
        for (j, v) in data.features.row(i) {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Scales every nonzero row to unit Euclidean norm.
pub fn normalize_rows(data: &Dataset) -> Dataset {
    let factors: Vec<f64> = (0..data.n_samples())
        .map(|i| {
            let n = data.features.row(i).map(|(_, v)| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect();
    Dataset {
        features: data.features.scale_rows(&factors).expect("one factor per row"),
        labels: data.labels.clone(),
        name: data.name.clone(),
    }
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    /// Fraction of nonzero entries in the ground-truth weights.
    pub sparsity: f64,
    /// Fraction of nonzero entries in each feature row.
    pub density: f64,
    /// Standard deviation of the label noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n_samples: usize, n_features: usize, seed: u64) -> Self {
        Self { n_samples, n_features, sparsity: 0.1, density: 1.0, noise: 0.1, seed }
    }
}

/// Draws a seeded logistic-regression dataset.
///
/// A ground-truth `w` gets `ceil(sparsity * n)` entries of `+-1`; feature
/// rows are standard normal at positions kept with probability `density`;
/// labels are `sign(a_i^T w + noise * eps_i)` with ties sent to `+1`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let (m, n) = (spec.n_samples, spec.n_features);
    if m == 0 || n == 0 {
        return Err(Error::InvalidConfig("synthetic data needs N, n >= 1".into()));
    }
    for (name, v) in [("sparsity", spec.sparsity), ("density", spec.density)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {v}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let support = ((spec.sparsity * n as f64).ceil() as usize).clamp(1, n);
    let mut w = vec![0.0; n];
    for j in sample(&mut rng, n, support).into_iter() {
        w[j] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }

    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row = Vec::new();
        for j in 0..n {
            if spec.density >= 1.0 || rng.random_bool(spec.density) {
                let v: f64 = StandardNormal.sample(&mut rng);
                row.push((j, v));
            }
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        let z: f64 = row.iter().map(|(j, v)| v * w[*j]).sum::<f64>() + spec.noise * eps;
        labels.push(if z >= 0.0 { 1.0 } else { -1.0 });
        rows.push(row);
    }
    Ok(Dataset {
        features: SparseMatrix::from_rows(n, &rows)?,
        labels,
        name: format!("synthetic-N{m}-n{n}-seed{}", spec.seed),
    })
}

/// [`generate_synthetic`] with dense rows and the default noise level.
pub fn generate_synthetic_logistic(
    n_samples: usize,
    n_features: usize,
    sparsity: f64,
    seed: u64,
) -> Result<Dataset> {
    generate_synthetic(&SyntheticSpec { sparsity, ..SyntheticSpec::new(n_samples, n_features, seed) })
}
