//! Proximal gradient baseline: `x_{k+1} = prox_{t g}(x_k - t grad f(x_k))`.
//!
//! Termination uses the unit-scale residual `||G(x_k)||`, the same yardstick as
//! the Newton-type solver, whatever step `t` is used for moving.

use std::time::Instant;

use crate::error::{check_len, Error, Result};
use crate::linalg::norm;
use crate::problem::CompositeProblem;
use crate::residuals::{objective, prox_gradient_map_with};
use crate::solver::{SolveReport, SolveStatus};
use crate::trace::{Branch, IterateRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct PgmConfig {
    /// Step size; `None` means `1 / L1`.
    pub step: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PgmConfig {
    fn default() -> Self {
        Self { step: None, tol: 1e-8, max_iter: 100_000 }
    }
}

impl PgmConfig {
    pub fn resolve_step(&self, problem: &CompositeProblem) -> Result<f64> {
        let t = match self.step {
            Some(t) => t,
            None => {
                let l1 = problem.lipschitz().value;
                if !(l1 > 0.0) {
                    return Err(Error::InvalidConfig(
                        "default step 1/L1 needs a positive Lipschitz constant".into(),
                    ));
                }
                1.0 / l1
            }
        };
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidConfig(format!("step must be positive, got {t}")));
        }
        Ok(t)
    }
}

pub fn pgm_solve(problem: &CompositeProblem, x0: Vec<f64>, cfg: &PgmConfig) -> Result<SolveReport> {
    check_len(problem.dim(), x0.len())?;
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidConfig("tol must be positive".into()));
    }
    let t = cfg.resolve_step(problem)?;
    let start = Instant::now();
    let reg = problem.regularizer();

    let mut x = x0;
    let mut f = objective(problem, &x)?;
    if !f.is_finite() {
        return Err(Error::InvalidConfig("F(x0) must be finite".into()));
    }
    let f0 = f;
    let mut trace = Vec::new();
    let mut k = 0;
    let status = loop {
        let grad = problem.loss().gradient(&x)?;
        let g_norm = norm(&prox_gradient_map_with(reg, &x, &grad));
        if g_norm <= cfg.tol || k >= cfg.max_iter {
            trace.push(IterateRecord::terminal(k, f, g_norm, 0.0, 0.0, 0.0));
            break if g_norm <= cfg.tol { SolveStatus::Converged } else { SolveStatus::MaxOuterReached };
        }
        let u: Vec<f64> = x.iter().zip(&grad).map(|(a, b)| a - t * b).collect();
        let x_new = reg.prox(&u, t);
        let step_norm = x_new.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let f_new = objective(problem, &x_new)?;
        trace.push(IterateRecord {
            k,
            f,
            g_norm,
            alpha: 0.0,
            eta: 0.0,
            inner_iters: 0,
            inner_converged: true,
            residual_norm: 0.0,
            q_drop: 0.0,
            branch: Branch::Pgm,
            t,
            m: 0,
            theta: 0.0,
            step_norm,
            f_next: f_new,
        });
        x = x_new;
        f = f_new;
        k += 1;
    };
    Ok(SolveReport { status, x, trace, wall_time: start.elapsed(), c_bound: f0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, SparseMatrix};
    use crate::losses::{LeastSquaresLoss, LinearLoss};
    use crate::regularizers::Regularizer;
    use std::sync::Arc;

    #[test]
    fn unit_step_on_half_square_is_exact() {
        let loss = LeastSquaresLoss::new(Arc::new(SparseMatrix::identity(1)), vec![0.0]).unwrap();
        let p = CompositeProblem::new(Arc::new(loss), Regularizer::Zero).unwrap();
        let rep = pgm_solve(&p, vec![1.0], &PgmConfig { step: Some(1.0), ..Default::default() }).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.outer_iterations(), 1);
        assert_eq!(rep.x, vec![0.0]);
        assert_eq!(rep.steps()[0].branch, Branch::Pgm);
    }

    #[test]
    fn least_squares_contracts_to_direct_solution() {
        let rows = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&rows).unwrap());
        let rhs = vec![1.0, -1.0];
        let p = CompositeProblem::new(
            Arc::new(LeastSquaresLoss::new(Arc::new(a), rhs.clone()).unwrap()),
            Regularizer::Zero,
        )
        .unwrap();
        let cfg = PgmConfig { tol: 1e-10, ..Default::default() };
        let rep = pgm_solve(&p, vec![0.0, 0.0], &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        let am = nalgebra::DMatrix::from_row_slice(2, 2, &rows.concat());
        let sol = am.clone().lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        // ||x - x*|| <= ||(A^T A)^-1|| ||G(x)||
        let smin = am.singular_values().min();
        let bound = cfg.tol / (smin * smin);
        assert!(((rep.x[0] - sol[0]).powi(2) + (rep.x[1] - sol[1]).powi(2)).sqrt() <= bound);
        // monotone descent
        for w in rep.trace.windows(2) {
            assert!(w[1].f <= w[0].f + 1e-12);
        }
    }

    #[test]
    fn rejects_zero_lipschitz_default_step() {
        let p = CompositeProblem::new(Arc::new(LinearLoss::new(vec![1.0])), Regularizer::norm2(1.0).unwrap())
            .unwrap();
        assert!(pgm_solve(&p, vec![0.0], &PgmConfig::default()).is_err());
        assert!(pgm_solve(&p, vec![0.0], &PgmConfig { step: Some(-1.0), ..Default::default() }).is_err());
    }

    #[test]
    fn max_iter_is_reported() {
        let loss = LeastSquaresLoss::new(Arc::new(SparseMatrix::identity(2)), vec![1.0, 1.0]).unwrap();
        let p = CompositeProblem::new(Arc::new(loss), Regularizer::l1(0.1).unwrap()).unwrap();
        let cfg = PgmConfig { step: Some(0.01), tol: 1e-12, max_iter: 5 };
        let rep = pgm_solve(&p, vec![0.0, 0.0], &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::MaxOuterReached);
        assert_eq!(rep.outer_iterations(), 5);
    }
}
