//! The outer proximal Newton-type loop.
//!
//! At iterate `x_k` with prox-gradient residual `||G(x_k)||`:
//!
//! 1. take `B_k` as the exact Hessian of `f` at `x_k`;
//! 2. set `alpha_k = min(alpha_bar, c * ||G(x_k)||^rho)` and `H_k = B_k + alpha_k I`;
//! 3. solve the model inexactly with `eta_k = nu * min(1, ||G(x_k)||^varrho)`;
//! 4. accept the model solution `x_hat` outright when `k >= 1`,
//!    `||G(x_hat)|| <= sigma * vartheta_k` and `F(x_hat) <= C`, recording
//!    `vartheta_{k+1} = ||G(x_hat)||`; otherwise keep `vartheta` and
//! 5. backtrack along `d = x_hat - x_k` until
//!    `F(x_k + t d) <= F(x_k) - theta * alpha_k * t * ||d||^2`;
//! 6. move to `x_k + t d`.
//!
//! At `k = 0` the reference value `vartheta_1` is set to `||G(x_0)||` and the
//! line search always runs.

use std::time::{Duration, Instant};

use crate::error::{check_len, Error, Result};
use crate::linalg::norm;
use crate::problem::CompositeProblem;
use crate::residuals::{objective, prox_gradient_map_with, SubproblemModel};
use crate::subsolver::{solve_subproblem, Q_DROP_SLACK};
use crate::trace::{Branch, IterateRecord};

/// Parameters of the outer loop. Greek names follow the usual notation:
/// `theta` is the sufficient-decrease factor, `sigma` the residual
/// contraction needed for a unit step, `gamma` the backtracking factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub theta: f64,
    pub sigma: f64,
    pub gamma: f64,
    /// Objective ceiling for unit steps. `None` picks `2 F(x0)` (or
    /// `F(x0) + 1` when `F(x0) <= 0`).
    pub c_bound: Option<f64>,
    pub alpha_bar: f64,
    pub c_alpha: f64,
    pub rho: f64,
    pub nu: f64,
    /// Exponent in the forcing term. `None` means "same as `rho`".
    pub varrho: Option<f64>,
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta: 0.1,
            sigma: 0.5,
            gamma: 0.5,
            c_bound: None,
            alpha_bar: 1e-4,
            c_alpha: 1e-8,
            rho: 1.0,
            nu: 0.9,
            varrho: None,
            tol: 1e-8,
            max_outer: 500,
            max_inner: 10_000,
            max_backtracks: 60,
        }
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

impl SolverConfig {
    pub fn with_rho(rho: f64) -> Self {
        Self { rho, ..Self::default() }
    }

    pub fn varrho(&self) -> f64 {
        self.varrho.unwrap_or(self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        open_unit("theta", self.theta)?;
        open_unit("sigma", self.sigma)?;
        open_unit("gamma", self.gamma)?;
        positive("alpha_bar", self.alpha_bar)?;
        positive("c", self.c_alpha)?;
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidConfig(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(0.0..1.0).contains(&self.nu) {
            return Err(Error::InvalidConfig(format!("nu must lie in [0, 1), got {}", self.nu)));
        }
        positive("varrho", self.varrho())?;
        positive("tol", self.tol)?;
        if self.max_inner == 0 {
            return Err(Error::InvalidConfig("max_inner must be at least 1".into()));
        }
        if let Some(c) = self.c_bound {
            if c.is_nan() {
                return Err(Error::InvalidConfig("C must be a number".into()));
            }
        }
        Ok(())
    }
}

/// `alpha_k = min(alpha_bar, c * g_norm^rho)`
pub fn choose_alpha(g_norm: f64, cfg: &SolverConfig) -> f64 {
    cfg.alpha_bar.min(cfg.c_alpha * g_norm.powf(cfg.rho))
}

/// `eta_k = nu * min(1, g_norm^varrho)`
pub fn choose_eta(g_norm: f64, cfg: &SolverConfig) -> f64 {
    cfg.nu * g_norm.powf(cfg.varrho()).min(1.0)
}

/// Objective ceiling used when the configuration does not fix one.
pub fn default_c_bound(f0: f64) -> f64 {
    if f0 > 0.0 {
        2.0 * f0
    } else {
        f0 + 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxOuterReached,
    InnerFailure,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// One row per outer iteration plus a terminal row for the final iterate.
    pub trace: Vec<IterateRecord>,
    pub wall_time: Duration,
    /// Objective ceiling in force (the baseline reports `F(x0)`).
    pub c_bound: f64,
}

impl SolveReport {
    /// Rows that correspond to actual steps (the terminal row dropped).
    pub fn steps(&self) -> &[IterateRecord] {
        match self.trace.last() {
            Some(r) if r.branch == Branch::Terminal => &self.trace[..self.trace.len() - 1],
            _ => &self.trace,
        }
    }

    pub fn outer_iterations(&self) -> usize {
        self.steps().len()
    }

    pub fn inner_total(&self) -> usize {
        self.steps().iter().map(|r| r.inner_iters).sum()
    }

    pub fn final_g_norm(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.g_norm)
    }

    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.f)
    }
}

/// Accepted backtracking step.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub t: f64,
    pub m: usize,
    pub x_new: Vec<f64>,
    pub f_new: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no step satisfied the decrease test within {attempts} trials")]
pub struct LineSearchFailure {
    pub attempts: usize,
}

/// Smallest `m >= 0` with
/// `F(x + gamma^m d) <= F(x) - theta * alpha * gamma^m * ||d||^2`.
///
/// Infinite objective values always fail the test.
pub fn line_search(
    problem: &CompositeProblem,
    x: &[f64],
    f_x: f64,
    d: &[f64],
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<std::result::Result<LineSearchOutcome, LineSearchFailure>> {
    check_len(x.len(), d.len())?;
    let dd = norm(d).powi(2);
    let mut t = 1.0;
    for m in 0..=cfg.max_backtracks {
        let x_new: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        let f_new = objective(problem, &x_new)?;
        if f_new <= f_x - cfg.theta * alpha * t * dd {
            return Ok(Ok(LineSearchOutcome { t, m, x_new, f_new }));
        }
        t *= cfg.gamma;
    }
    Ok(Err(LineSearchFailure { attempts: cfg.max_backtracks + 1 }))
}

/// Everything the loop carries from one iteration to the next.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub k: usize,
    pub x: Vec<f64>,
    /// `F(x_k)`
    pub f: f64,
    /// `f(x_k)`, the smooth part alone.
    pub f_smooth: f64,
    pub grad: Vec<f64>,
    pub g_norm: f64,
    /// `vartheta_k`; unset before the first step.
    pub vartheta: Option<f64>,
    pub c_bound: f64,
}

impl SolverState {
    pub fn new(problem: &CompositeProblem, x0: Vec<f64>, cfg: &SolverConfig) -> Result<Self> {
        check_len(problem.dim(), x0.len())?;
        let f = objective(problem, &x0)?;
        if !f.is_finite() {
            return Err(Error::InvalidConfig("F(x0) must be finite".into()));
        }
        let c_bound = cfg.c_bound.unwrap_or_else(|| default_c_bound(f));
        if !(c_bound > f) {
            return Err(Error::InvalidConfig(format!("C = {c_bound} must exceed F(x0) = {f}")));
        }
        let mut s = Self {
            k: 0,
            x: x0,
            f,
            f_smooth: 0.0,
            grad: Vec::new(),
            g_norm: 0.0,
            vartheta: None,
            c_bound,
        };
        s.refresh(problem)?;
        Ok(s)
    }

    fn refresh(&mut self, problem: &CompositeProblem) -> Result<()> {
        self.f_smooth = problem.loss().value(&self.x)?;
        self.grad = problem.loss().gradient(&self.x)?;
        self.g_norm = norm(&prox_gradient_map_with(problem.regularizer(), &self.x, &self.grad));
        Ok(())
    }

    fn terminal_record(&self, cfg: &SolverConfig) -> IterateRecord {
        IterateRecord::terminal(
            self.k,
            self.f,
            self.g_norm,
            choose_alpha(self.g_norm, cfg),
            choose_eta(self.g_norm, cfg),
            self.vartheta.unwrap_or(self.g_norm),
        )
    }
}

/// Runs one outer iteration, updating `state` in place.
///
/// `Ok(Err(status))` reports an inner or line-search failure; the state is
/// left at `x_k` in that case.
pub fn step(
    problem: &CompositeProblem,
    state: &mut SolverState,
    cfg: &SolverConfig,
) -> Result<std::result::Result<IterateRecord, SolveStatus>> {
    let g_norm = state.g_norm;
    let alpha = choose_alpha(g_norm, cfg);
    let eta = choose_eta(g_norm, cfg);

    let h = problem.loss().hessian(&state.x)?.with_alpha(alpha)?;
    let model = SubproblemModel::new(
        state.x.clone(),
        state.grad.clone(),
        h,
        state.f_smooth,
        problem.regularizer(),
    )?;
    let inner = solve_subproblem(&model, g_norm, eta, cfg.max_inner)?;
    // r_k(x_k) = G(x_k), so "improved" means below g_norm
    if !inner.converged && (inner.q_drop < -Q_DROP_SLACK || inner.residual_norm >= g_norm) {
        return Ok(Err(SolveStatus::InnerFailure));
    }
    let d: Vec<f64> = inner.x_hat.iter().zip(&state.x).map(|(a, b)| a - b).collect();
    let step_norm = norm(&d);
    if step_norm == 0.0 {
        return Ok(Err(SolveStatus::InnerFailure));
    }

    let f_hat = objective(problem, &inner.x_hat)?;
    let grad_hat = problem.loss().gradient(&inner.x_hat)?;
    let g_hat = norm(&prox_gradient_map_with(problem.regularizer(), &inner.x_hat, &grad_hat));

    let unit = match state.vartheta {
        Some(vt) => g_hat <= cfg.sigma * vt && f_hat <= state.c_bound,
        None => false,
    };

    let mut record = IterateRecord {
        k: state.k,
        f: state.f,
        g_norm,
        alpha,
        eta,
        inner_iters: inner.inner_iters,
        inner_converged: inner.converged,
        residual_norm: inner.residual_norm,
        q_drop: inner.q_drop,
        branch: Branch::UnitStep,
        t: 1.0,
        m: 0,
        theta: 0.0,
        step_norm,
        f_next: f_hat,
    };

    if unit {
        state.vartheta = Some(g_hat);
        state.x = inner.x_hat;
        state.f = f_hat;
        state.f_smooth = problem.loss().value(&state.x)?;
        state.grad = grad_hat;
        state.g_norm = g_hat;
    } else {
        let vt = state.vartheta.unwrap_or(g_norm);
        state.vartheta = Some(vt);
        let ls = match line_search(problem, &state.x, state.f, &d, alpha, cfg)? {
            Ok(ls) => ls,
            Err(_) => return Ok(Err(SolveStatus::LineSearchFailure)),
        };
        record.branch = Branch::LineSearch;
        record.t = ls.t;
        record.m = ls.m;
        record.f_next = ls.f_new;
        if ls.m == 0 {
            state.x = inner.x_hat;
            state.f = f_hat;
            state.f_smooth = problem.loss().value(&state.x)?;
            state.grad = grad_hat;
            state.g_norm = g_hat;
        } else {
            state.x = ls.x_new;
            state.f = ls.f_new;
            state.refresh(problem)?;
        }
    }
    record.theta = state.vartheta.expect("set above");
    state.k += 1;
    Ok(Ok(record))
}

/// Runs the method from `x0` until `||G(x_k)|| <= tol`, a cap, or a failure.
pub fn solve(problem: &CompositeProblem, x0: Vec<f64>, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut state = SolverState::new(problem, x0, cfg)?;
    let mut trace = Vec::new();
    let status = loop {
        if state.g_norm <= cfg.tol {
            break SolveStatus::Converged;
        }
        if state.k >= cfg.max_outer {
            break SolveStatus::MaxOuterReached;
        }
        match step(problem, &mut state, cfg)? {
            Ok(rec) => trace.push(rec),
            Err(status) => break status,
        }
    };
    trace.push(state.terminal_record(cfg));
    Ok(SolveReport {
        status,
        x: state.x,
        trace,
        wall_time: start.elapsed(),
        c_bound: state.c_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, SparseMatrix};
    use crate::losses::{LeastSquaresLoss, QuadraticLoss};
    use crate::regularizers::Regularizer;
    use std::sync::Arc;

    fn half_square() -> CompositeProblem {
        // f(x) = x^2 / 2, g = 0
        let loss = LeastSquaresLoss::new(Arc::new(SparseMatrix::identity(1)), vec![0.0]).unwrap();
        CompositeProblem::new(Arc::new(loss), Regularizer::Zero).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let cfg = SolverConfig { alpha_bar: 1e-4, c_alpha: 1e-8, rho: 0.1, ..Default::default() };
        assert_eq!(choose_alpha(1.0, &cfg), 1e-8);
        assert_eq!(choose_alpha(0.0, &cfg), 0.0);
        let cfg = SolverConfig { alpha_bar: 1e-4, c_alpha: 1.0, rho: 1.0, ..Default::default() };
        assert_eq!(choose_alpha(1.0, &cfg), 1e-4);
        assert!(choose_alpha(1e-300, &SolverConfig::default()) > 0.0);
    }

    #[test]
    fn eta_examples() {
        let cfg = SolverConfig { nu: 0.9, varrho: Some(0.5), ..Default::default() };
        assert!((choose_eta(0.04, &cfg) - 0.18).abs() < 1e-15);
        assert_eq!(choose_eta(3.0, &cfg), 0.9);
        assert_eq!(choose_eta(1.0, &cfg), 0.9);
        let cfg = SolverConfig { nu: 0.0, ..Default::default() };
        assert_eq!(choose_eta(0.5, &cfg), 0.0);
        // varrho defaults to rho
        let cfg = SolverConfig::with_rho(0.5);
        assert_eq!(cfg.varrho(), 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig { theta: 1.0, ..Default::default() },
            SolverConfig { sigma: 0.0, ..Default::default() },
            SolverConfig { gamma: 1.5, ..Default::default() },
            SolverConfig { rho: 0.0, ..Default::default() },
            SolverConfig { rho: 1.1, ..Default::default() },
            SolverConfig { nu: 1.0, ..Default::default() },
            SolverConfig { varrho: Some(0.0), ..Default::default() },
            SolverConfig { alpha_bar: 0.0, ..Default::default() },
            SolverConfig { c_alpha: -1.0, ..Default::default() },
            SolverConfig { tol: 0.0, ..Default::default() },
            SolverConfig { max_inner: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn c_bound_default() {
        assert_eq!(default_c_bound(3.0), 6.0);
        assert_eq!(default_c_bound(0.0), 1.0);
        assert_eq!(default_c_bound(-2.0), -1.0);
    }

    #[test]
    fn line_search_zero_direction() {
        let p = half_square();
        let ls = line_search(&p, &[1.0], 0.5, &[0.0], 1e-4, &SolverConfig::default()).unwrap().unwrap();
        assert_eq!((ls.t, ls.m), (1.0, 0));
    }

    #[test]
    fn line_search_accepts_exact_step() {
        let p = half_square();
        let cfg = SolverConfig::default();
        // F(0) = 0 <= F(1) - 0.1 * 1e-4 * 1
        let ls = line_search(&p, &[1.0], 0.5, &[-1.0], 1e-4, &cfg).unwrap().unwrap();
        assert_eq!((ls.t, ls.m), (1.0, 0));
        assert_eq!(ls.f_new, 0.0);
    }

    #[test]
    fn line_search_overshoot_matches_scan() {
        let p = half_square();
        let cfg = SolverConfig::default();
        let (alpha, d) = (1e-4, -10.0);
        let ls = line_search(&p, &[1.0], 0.5, &[d], alpha, &cfg).unwrap().unwrap();
        // brute-force scan of m = 0..50
        let f = |x: f64| 0.5 * x * x;
        let m_scan = (0..=50)
            .find(|&m| {
                let t = 0.5f64.powi(m);
                f(1.0 + t * d) <= f(1.0) - cfg.theta * alpha * t * d * d
            })
            .unwrap() as usize;
        assert_eq!(ls.m, m_scan);
        assert_eq!(ls.t, 0.5f64.powi(m_scan as i32));
    }

    #[test]
    fn line_search_reports_failure() {
        let p = half_square();
        let cfg = SolverConfig { max_backtracks: 3, ..Default::default() };
        // pure ascent direction never satisfies the test
        let fail = line_search(&p, &[1.0], 0.5, &[1.0], 1e-4, &cfg).unwrap().unwrap_err();
        assert_eq!(fail.attempts, 4);
    }

    #[test]
    fn line_search_rejects_leaving_the_domain() {
        let loss = LeastSquaresLoss::new(Arc::new(SparseMatrix::identity(1)), vec![5.0]).unwrap();
        let p = CompositeProblem::new(Arc::new(loss), Regularizer::boxed(vec![0.0], vec![1.0]).unwrap())
            .unwrap();
        let cfg = SolverConfig::default();
        let ls = line_search(&p, &[0.5], objective(&p, &[0.5]).unwrap(), &[4.0], 1e-4, &cfg)
            .unwrap()
            .unwrap();
        assert!(0.5 + ls.t * 4.0 <= 1.0);
        assert!(ls.m >= 3);
    }

    #[test]
    fn first_step_always_line_searches() {
        let q = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let loss = QuadraticLoss::new(q, vec![-1.0, 4.0]).unwrap();
        let p = CompositeProblem::new(Arc::new(loss), Regularizer::l1(0.1).unwrap()).unwrap();
        let cfg = SolverConfig::default();
        let mut state = SolverState::new(&p, vec![0.0, 0.0], &cfg).unwrap();
        let rec = step(&p, &mut state, &cfg).unwrap().unwrap();
        assert_eq!(rec.k, 0);
        assert_eq!(rec.branch, Branch::LineSearch);
        assert_eq!(rec.theta, rec.g_norm);
        assert_eq!(state.k, 1);
    }

    #[test]
    fn solve_square_least_squares() {
        let rows = vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]];
        let a = SparseMatrix::from_dense(&DenseMatrix::from_rows(&rows).unwrap());
        let rhs = vec![1.0, -2.0, 3.0];
        let loss = LeastSquaresLoss::new(Arc::new(a), rhs.clone()).unwrap();
        let p = CompositeProblem::new(Arc::new(loss), Regularizer::Zero).unwrap();
        let cfg = SolverConfig { tol: 1e-12, ..Default::default() };
        let rep = solve(&p, vec![0.0; 3], &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);

        let am = nalgebra::DMatrix::from_row_slice(3, 3, &rows.concat());
        let sol = am.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        for j in 0..3 {
            assert!((rep.x[j] - sol[j]).abs() <= 1e-8);
        }
        assert_eq!(rep.trace.last().unwrap().branch, Branch::Terminal);
    }

    #[test]
    fn solve_rejects_bad_start() {
        let p = half_square();
        let cfg = SolverConfig { c_bound: Some(0.1), ..Default::default() };
        assert!(solve(&p, vec![1.0], &cfg).is_err());
        assert!(solve(&p, vec![1.0, 2.0], &SolverConfig::default()).is_err());
        let boxed = CompositeProblem::new(
            Arc::new(LeastSquaresLoss::new(Arc::new(SparseMatrix::identity(1)), vec![0.0]).unwrap()),
            Regularizer::boxed(vec![0.0], vec![1.0]).unwrap(),
        )
        .unwrap();
        assert!(solve(&boxed, vec![3.0], &SolverConfig::default()).is_err());
    }

    #[test]
    fn already_optimal_start_takes_no_steps() {
        let p = half_square();
        let rep = solve(&p, vec![0.0], &SolverConfig { c_bound: Some(1.0), ..Default::default() })
            .unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.outer_iterations(), 0);
        assert_eq!(rep.trace.len(), 1);
    }

    #[test]
    fn max_outer_is_reported() {
        let q = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let loss = QuadraticLoss::new(q, vec![-1.0, 4.0]).unwrap();
        let p = CompositeProblem::new(Arc::new(loss), Regularizer::l1(0.1).unwrap()).unwrap();
        let cfg = SolverConfig { max_outer: 1, tol: 1e-14, nu: 0.5, ..Default::default() };
        let rep = solve(&p, vec![5.0, 5.0], &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::MaxOuterReached);
        assert_eq!(rep.outer_iterations(), 1);
    }
}
