//! Bundled instances. Most have a solution set known in closed form, which
//! the diagnostics and certificate checks rely on.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{generate_synthetic, normalize_rows, Dataset, SyntheticSpec};
use crate::diagnostics::SolutionSetDescription;
use crate::error::{Error, Result};
use crate::linalg::{norm, SparseMatrix};
use crate::losses::{LeastSquaresLoss, LinearLoss, LogisticLoss};
use crate::problem::CompositeProblem;
use crate::regularizers::{soft_threshold, Regularizer};

#[derive(Debug, Clone)]
pub struct BundledProblem {
    pub id: String,
    pub problem: CompositeProblem,
    pub x0: Vec<f64>,
    /// `None` when `X*` has no closed form.
    pub solution_set: Option<SolutionSetDescription>,
}

/// `F(x) = <c, x> + ||x||` for a unit vector `c`. The optimal value is 0 and
/// `X* = {-gamma c : gamma >= 0}`.
pub fn example_2_7_problem(c: Vec<f64>) -> Result<CompositeProblem> {
    if (norm(&c) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidConfig("c must be a unit vector".into()));
    }
    CompositeProblem::new(Arc::new(LinearLoss::new(c)), Regularizer::norm2(1.0)?)
}

/// The degenerate instance above with seeded `c` and a seeded standard
/// normal `x0`.
pub fn example_2_7(n: usize, seed: u64) -> Result<BundledProblem> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nc = norm(&c);
    c.iter_mut().for_each(|v| *v /= nc);
    let x0: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(BundledProblem {
        id: format!("example-2-7-n{n}"),
        problem: example_2_7_problem(c.clone())?,
        x0,
        solution_set: Some(SolutionSetDescription::ray(c)?),
    })
}

/// `f(x) = (x1 + x2 - 2)^2 / 2`, `g = 0`: `X*` is the line `x1 + x2 = 2`.
pub fn rank_deficient_least_squares() -> Result<BundledProblem> {
    let a = SparseMatrix::from_rows(2, &[vec![(0, 1.0), (1, 1.0)]])?;
    let loss = LeastSquaresLoss::new(Arc::new(a), vec![2.0])?;
    let h = 1.0 / 2f64.sqrt();
    Ok(BundledProblem {
        id: "rank-deficient-ls".into(),
        problem: CompositeProblem::new(Arc::new(loss), Regularizer::Zero)?,
        x0: vec![3.0, -4.0],
        solution_set: Some(SolutionSetDescription::affine(vec![1.0, 1.0], vec![vec![h, -h]])?),
    })
}

/// `f(x) = ||x - z||^2 / 2`, `g = 0`.
pub fn shifted_quadratic(z: Vec<f64>) -> Result<BundledProblem> {
    let n = z.len();
    let loss = LeastSquaresLoss::new(Arc::new(SparseMatrix::identity(n)), z.clone())?;
    Ok(BundledProblem {
        id: format!("shifted-quadratic-n{n}"),
        problem: CompositeProblem::new(Arc::new(loss), Regularizer::Zero)?,
        x0: vec![0.0; n],
        solution_set: Some(SolutionSetDescription::Singleton(z)),
    })
}

/// `f(x) = ||D x - b||^2 / 2` with diagonal `D`, `g = lambda ||x||_1`. The
/// minimizer is `x_j = S(d_j b_j, lambda) / d_j^2`.
pub fn diagonal_lasso(d: Vec<f64>, b: Vec<f64>, lambda: f64) -> Result<BundledProblem> {
    if d.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: d.len(), found: b.len() });
    }
    if d.contains(&0.0) {
        return Err(Error::InvalidConfig("diagonal entries must be nonzero".into()));
    }
    let n = d.len();
    let rows: Vec<Vec<(usize, f64)>> = d.iter().enumerate().map(|(j, v)| vec![(j, *v)]).collect();
    let a = SparseMatrix::from_rows(n, &rows)?;
    let xstar = d.iter().zip(&b).map(|(dj, bj)| soft_threshold(dj * bj, lambda) / (dj * dj)).collect();
    let loss = LeastSquaresLoss::new(Arc::new(a), b)?;
    Ok(BundledProblem {
        id: format!("diagonal-lasso-n{n}"),
        problem: CompositeProblem::new(Arc::new(loss), Regularizer::l1(lambda)?)?,
        x0: vec![0.0; n],
        solution_set: Some(SolutionSetDescription::Singleton(xstar)),
    })
}

/// `f(x) = ||x - z||^2 / 2` over the box `[lower, upper]`: `x* = clamp(z)`.
pub fn box_projection(z: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<BundledProblem> {
    let n = z.len();
    let xstar: Vec<f64> =
        z.iter().zip(lower.iter().zip(&upper)).map(|(v, (l, u))| v.clamp(*l, *u)).collect();
    let x0: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
    let reg = Regularizer::boxed(lower, upper)?;
    let loss = LeastSquaresLoss::new(Arc::new(SparseMatrix::identity(n)), z)?;
    Ok(BundledProblem {
        id: format!("box-projection-n{n}"),
        problem: CompositeProblem::new(Arc::new(loss), reg)?,
        x0,
        solution_set: Some(SolutionSetDescription::Singleton(xstar)),
    })
}

/// `l1`-regularized logistic regression on a row-normalized dataset,
/// started at zero.
pub fn logistic_l1(data: &Dataset, lambda: f64) -> Result<CompositeProblem> {
    let reg = if lambda == 0.0 { Regularizer::Zero } else { Regularizer::l1(lambda)? };
    let loss = LogisticLoss::new(Arc::new(data.features.clone()), data.labels.clone())?;
    CompositeProblem::new(Arc::new(loss), reg)
}

/// Synthetic `N x n` logistic instance with the given seed, rows normalized.
pub fn synthetic_logistic(n_samples: usize, n_features: usize, seed: u64, lambda: f64) -> Result<BundledProblem> {
    let data = normalize_rows(&generate_synthetic(&SyntheticSpec::new(n_samples, n_features, seed))?);
    Ok(BundledProblem {
        id: format!("synthetic-logistic-N{n_samples}-n{n_features}-seed{seed}"),
        problem: logistic_l1(&data, lambda)?,
        x0: vec![0.0; n_features],
        solution_set: None,
    })
}

/// The seed-7, `200 x 50`, `lambda = 1e-3` logistic instance used for the
/// rate and iteration-count checks.
pub fn acceptance_logistic() -> Result<BundledProblem> {
    synthetic_logistic(200, 50, 7, 1e-3)
}

/// Every bundled instance with a closed-form solution set.
pub fn with_known_solution_set() -> Result<Vec<BundledProblem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let z: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
    Ok(vec![
        example_2_7(5, 2027)?,
        rank_deficient_least_squares()?,
        shifted_quadratic(z.clone())?,
        diagonal_lasso(vec![1.0, 2.0, 0.5, 3.0], vec![1.0, -0.1, 2.0, 0.4], 0.3)?,
        box_projection(z, vec![-1.0; 4], vec![0.5; 4])?,
    ])
}

/// All bundled instances, including the acceptance logistic problem.
pub fn all() -> Result<Vec<BundledProblem>> {
    let mut out = with_known_solution_set()?;
    out.push(acceptance_logistic()?);
    Ok(out)
}

/// Looks up a bundled instance by id.
pub fn by_name(id: &str) -> Result<BundledProblem> {
    all()?
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown problem {id:?}")))
}
