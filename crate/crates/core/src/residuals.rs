//! Optimality measures: the objective `F`, the prox-gradient mapping
//! `G(x) = x - prox_g(x - grad f(x))`, the local quadratic model `q_k` and its
//! fixed-point residual `r_k`.
//!
//! The prox scale is fixed to one everywhere. All constants used by the
//! diagnostics (for instance the `2 + L1` Lipschitz modulus of `G`) assume
//! that normalization.

use crate::error::{check_len, Result};
use crate::linalg::{dot, norm, HessianRep};
use crate::problem::CompositeProblem;
use crate::regularizers::Regularizer;

/// `F(x) = f(x) + g(x)`; `+inf` outside the domain of `g`.
pub fn objective(problem: &CompositeProblem, x: &[f64]) -> Result<f64> {
    let gx = problem.regularizer().value(x);
    if gx == f64::INFINITY {
        check_len(problem.dim(), x.len())?;
        return Ok(f64::INFINITY);
    }
    Ok(problem.loss().value(x)? + gx)
}

/// `G(x) = x - prox_g(x - grad f(x))`.
pub fn prox_gradient_map(problem: &CompositeProblem, x: &[f64]) -> Result<Vec<f64>> {
    let grad = problem.loss().gradient(x)?;
    Ok(prox_gradient_map_with(problem.regularizer(), x, &grad))
}

pub(crate) fn prox_gradient_map_with(reg: &Regularizer, x: &[f64], grad: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = x.iter().zip(grad).map(|(a, b)| a - b).collect();
    let p = reg.prox(&u, 1.0);
    x.iter().zip(&p).map(|(a, b)| a - b).collect()
}

/// `dist(0, grad f(x) + dg(x))`, available in closed form for the zero and
/// l1 regularizers only.
pub fn subdifferential_distance(problem: &CompositeProblem, x: &[f64]) -> Result<Option<f64>> {
    let grad = problem.loss().gradient(x)?;
    let d = match problem.regularizer() {
        Regularizer::Zero => Some(norm(&grad)),
        Regularizer::L1 { lambda } => {
            let s: f64 = x
                .iter()
                .zip(&grad)
                .map(|(&xj, &gj)| {
                    let c = if xj > 0.0 {
                        (gj + lambda).abs()
                    } else if xj < 0.0 {
                        (gj - lambda).abs()
                    } else {
                        (gj.abs() - lambda).max(0.0)
                    };
                    c * c
                })
                .sum();
            Some(s.sqrt())
        }
        _ => None,
    };
    Ok(d)
}

/// Quadratic model of `F` around an anchor point:
/// `q(x) = f_k + <grad_k, x - x_k> + (x - x_k)^T H (x - x_k) / 2 + g(x)`.
#[derive(Debug, Clone)]
pub struct SubproblemModel<'a> {
    pub anchor: Vec<f64>,
    pub grad: Vec<f64>,
    pub hessian: HessianRep,
    pub f_anchor: f64,
    pub reg: &'a Regularizer,
}

impl<'a> SubproblemModel<'a> {
    pub fn new(
        anchor: Vec<f64>,
        grad: Vec<f64>,
        hessian: HessianRep,
        f_anchor: f64,
        reg: &'a Regularizer,
    ) -> Result<Self> {
        check_len(anchor.len(), grad.len())?;
        check_len(anchor.len(), hessian.dim())?;
        Ok(Self { anchor, grad, hessian, f_anchor, reg })
    }

    /// Builds the model of `problem` at `x` with curvature `hessian`.
    pub fn at(problem: &'a CompositeProblem, x: &[f64], hessian: HessianRep) -> Result<Self> {
        let grad = problem.loss().gradient(x)?;
        let f = problem.loss().value(x)?;
        Self::new(x.to_vec(), grad, hessian, f, problem.regularizer())
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// `q(x) - q(x_k)`, computed from the step so the `f_k` term cancels
    /// exactly.
    pub fn change(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        let step: Vec<f64> = x.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        let hs = self.hessian.apply(&step)?;
        Ok(dot(&self.grad, &step) + 0.5 * dot(&step, &hs) + self.reg.value_change(x, &self.anchor))
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        let step: Vec<f64> = x.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        let hs = self.hessian.apply(&step)?;
        Ok(self.f_anchor + dot(&self.grad, &step) + 0.5 * dot(&step, &hs) + self.reg.value(x))
    }

    /// `r(x) = x - prox_g(x - grad_k - H (x - x_k))`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let step: Vec<f64> = x.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        let hs = self.hessian.apply(&step)?;
        Ok(self.residual_with(x, &hs))
    }

    /// Residual given a precomputed `H (x - x_k)`.
    pub(crate) fn residual_with(&self, x: &[f64], h_step: &[f64]) -> Vec<f64> {
        let u: Vec<f64> =
            x.iter().zip(&self.grad).zip(h_step).map(|((xi, gi), hi)| xi - gi - hi).collect();
        let p = self.reg.prox(&u, 1.0);
        x.iter().zip(&p).map(|(a, b)| a - b).collect()
    }
}
