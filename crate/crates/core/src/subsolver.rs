//! Inexact minimization of the quadratic model `q_k`.
//!
//! Separable regularizers are handled by cyclic coordinate minimization in
//! ascending index order; every coordinate update is an exact
//! one-dimensional minimization, so `q_k` never increases. Other
//! regularizers fall back to proximal-gradient steps on the model with step
//! `1 / (||B|| + alpha)`.
//!
//! Both paths start at the anchor `x_k` and stop at the first full sweep (or
//! step) satisfying `||r_k(x)|| <= eta_k ||G(x_k)||` and `q_k(x) <= q_k(x_k) + Q_DROP_SLACK`.
//! A solve also ends early once the residual has stopped improving for
//! [`STALL_SWEEPS`] sweeps, which happens when the target lies below what
//! floating point can resolve.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, Curvature, LinearOperator, SPECTRAL_SEED};
use crate::residuals::SubproblemModel;

/// An inner solve gives up when the residual has not dropped by 1% over
/// this many sweeps.
pub const STALL_SWEEPS: usize = 100;

/// Amount by which an accepted iterate may raise the model. Near a solution
/// the true decrease of a sweep can be smaller than the rounding error in
/// evaluating it.
pub const Q_DROP_SLACK: f64 = 1e-12;

/// Outcome of an inner solve.
#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x_hat: Vec<f64>,
    /// Full coordinate sweeps, or proximal-gradient steps.
    pub inner_iters: usize,
    pub residual_norm: f64,
    /// `q_k(x_k) - q_k(x_hat)`
    pub q_drop: f64,
    pub converged: bool,
}

/// Solves the model until `||r_k|| <= eta_k * g_norm_k` or `max_inner`
/// iterations have run.
///
/// On exhaustion or stagnation the iterate with the smallest residual among
/// those that do not increase the model beyond [`Q_DROP_SLACK`] is returned with `converged = false`.
pub fn solve_subproblem(
    model: &SubproblemModel<'_>,
    g_norm_k: f64,
    eta_k: f64,
    max_inner: usize,
) -> Result<InnerResult> {
    if !(0.0..1.0).contains(&eta_k) {
        return Err(Error::InvalidConfig(format!("eta must lie in [0, 1), got {eta_k}")));
    }
    solve_to_target(model, eta_k * g_norm_k, max_inner, &mut |_, _| {})
}

/// Like [`solve_subproblem`] but with an absolute residual target and an
/// observer called after every sweep with `(sweep, q_k(x) - q_k(x_k))`.
pub fn solve_to_target(
    model: &SubproblemModel<'_>,
    target: f64,
    max_inner: usize,
    observer: &mut dyn FnMut(usize, f64),
) -> Result<InnerResult> {
    if max_inner == 0 {
        return Err(Error::InvalidConfig("max_inner must be at least 1".into()));
    }
    if !(target >= 0.0) {
        return Err(Error::InvalidConfig(format!("residual target must be >= 0, got {target}")));
    }
    let mut solver = Inner::new(model)?;
    let mut best: Option<InnerResult> = None;
    // residual at the last checkpoint sweep (1, 1 + STALL_SWEEPS, ...)
    let mut checkpoint = f64::INFINITY;
    let mut last = max_inner;

    for sweep in 0..=max_inner {
        if sweep > 0 {
            solver.iterate();
        }
        let (res, change) = solver.measure();
        if sweep > 0 {
            observer(sweep, change);
        }
        let q_drop = -change;
        if res <= target && q_drop >= -Q_DROP_SLACK {
            return Ok(InnerResult {
                x_hat: solver.x.clone(),
                inner_iters: sweep,
                residual_norm: res,
                q_drop,
                converged: true,
            });
        }
        if q_drop >= -Q_DROP_SLACK && best.as_ref().is_none_or(|b| res < b.residual_norm) {
            best = Some(InnerResult {
                x_hat: solver.x.clone(),
                inner_iters: sweep,
                residual_norm: res,
                q_drop,
                converged: false,
            });
        }
        if sweep % STALL_SWEEPS == 1 {
            if res >= 0.99 * checkpoint {
                last = sweep;
                break;
            }
            checkpoint = res;
        }
    }
    let mut out = best.expect("the anchor itself never increases the model");
    out.inner_iters = last;
    Ok(out)
}

/// High-accuracy solve used as a test oracle: returns `x` with
/// `||r_k(x)|| <= tol`.
pub fn exact_subproblem_oracle(model: &SubproblemModel<'_>, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("oracle tolerance must be positive".into()));
    }
    let out = solve_to_target(model, tol, 1_000_000, &mut |_, _| {})?;
    if !out.converged {
        return Err(Error::SubproblemNotConverged { target: tol, residual: out.residual_norm });
    }
    Ok(out.x_hat)
}

enum Method {
    Coordinate { diag: Vec<f64> },
    ProxGradient { step: f64 },
}

struct Inner<'m, 'a> {
    model: &'m SubproblemModel<'a>,
    method: Method,
    x: Vec<f64>,
    /// `x - x_k`
    step: Vec<f64>,
    /// `A step` for structured curvature, `B step` for dense curvature.
    cache: Vec<f64>,
}

impl<'m, 'a> Inner<'m, 'a> {
    fn new(model: &'m SubproblemModel<'a>) -> Result<Self> {
        let h = &model.hessian;
        let method = if model.reg.is_separable() {
            let diag = h.diag();
            if diag.iter().any(|d| !(*d > 0.0)) {
                return Err(Error::InvalidConfig(
                    "model curvature must be positive on every coordinate".into(),
                ));
            }
            Method::Coordinate { diag }
        } else {
            let lip = h.curvature_norm(1e-6, 500, SPECTRAL_SEED).value + h.alpha;
            if !(lip > 0.0) {
                return Err(Error::InvalidConfig("model curvature is zero".into()));
            }
            Method::ProxGradient { step: 1.0 / lip }
        };
        let n = model.dim();
        let cache = match &h.curvature {
            Curvature::Structured { a, .. } => vec![0.0; a.nrows()],
            Curvature::Dense(_) => vec![0.0; n],
        };
        Ok(Self { model, method, x: model.anchor.clone(), step: vec![0.0; n], cache })
    }

    fn iterate(&mut self) {
        let method = std::mem::replace(&mut self.method, Method::ProxGradient { step: 0.0 });
        match &method {
            Method::Coordinate { diag } => self.coordinate_sweep(diag),
            Method::ProxGradient { step } => self.prox_gradient_step(*step),
        }
        self.method = method;
    }

    fn coordinate_sweep(&mut self, diag: &[f64]) {
        let m = self.model;
        let alpha = m.hessian.alpha;
        for (j, &hjj) in diag.iter().enumerate() {
            let curv = match &m.hessian.curvature {
                Curvature::Structured { a, weights, scale } => {
                    scale * a.column(j).map(|(i, v)| v * weights[i] * self.cache[i]).sum::<f64>()
                }
                Curvature::Dense(_) => self.cache[j],
            };
            let partial = m.grad[j] + curv + alpha * self.step[j];
            let old = self.x[j];
            let new = m.reg.prox_coordinate(j, old - partial / hjj, 1.0 / hjj);
            let delta = new - old;
            if delta == 0.0 {
                continue;
            }
            self.x[j] = new;
            self.step[j] = new - m.anchor[j];
            match &m.hessian.curvature {
                Curvature::Structured { a, .. } => {
                    for (i, v) in a.column(j) {
                        self.cache[i] += v * delta;
                    }
                }
                // B is symmetric, so row j is column j
                Curvature::Dense(b) => axpy(delta, b.row(j), &mut self.cache),
            }
        }
        self.refresh_cache();
    }

    fn refresh_cache(&mut self) {
        self.cache = match &self.model.hessian.curvature {
            Curvature::Structured { a, .. } => a.matvec(&self.step),
            Curvature::Dense(b) => b.matvec(&self.step),
        }
        .expect("dimensions fixed by the model");
    }

    fn prox_gradient_step(&mut self, s: f64) {
        let m = self.model;
        let hs = m.hessian.apply(&self.step).expect("dimensions fixed by the model");
        let u: Vec<f64> = self
            .x
            .iter()
            .zip(&m.grad)
            .zip(&hs)
            .map(|((xi, gi), hi)| xi - s * (gi + hi))
            .collect();
        self.x = m.reg.prox(&u, s);
        self.step = self.x.iter().zip(&m.anchor).map(|(a, b)| a - b).collect();
        self.refresh_cache();
    }

    /// Residual norm and `q(x) - q(x_k)` at the current iterate.
    fn measure(&self) -> (f64, f64) {
        let m = self.model;
        let mut hs = match &m.hessian.curvature {
            Curvature::Structured { a, weights, scale } => {
                let w: Vec<f64> =
                    self.cache.iter().zip(weights).map(|(u, d)| u * d * scale).collect();
                a.matvec_transpose(&w).expect("dimensions fixed by the model")
            }
            Curvature::Dense(_) => self.cache.clone(),
        };
        axpy(m.hessian.alpha, &self.step, &mut hs);
        let r = m.residual_with(&self.x, &hs);
        let change = dot(&m.grad, &self.step) + 0.5 * dot(&self.step, &hs) + m.reg.value_change(&self.x, &m.anchor);
        (norm(&r), change)
    }
}
