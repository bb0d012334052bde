//! Convex regularizers `g` and their proximal operators.
//!
//! `prox(u, t)` returns `argmin_x g(x) + ||x - u||^2 / (2 t)`. Members with a
//! coordinatewise prox report [`Regularizer::is_separable`] and expose
//! [`Regularizer::prox_coordinate`], which the coordinate-descent inner solver
//! relies on. Values outside the domain of `g` are `f64::INFINITY`; that
//! sentinel compares above every finite objective, so any step leaving the
//! domain is rejected without producing NaN.

use crate::error::{Error, Result};
use crate::linalg::norm;

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    /// `g = 0`
    Zero,
    /// `g(x) = lambda * ||x||_1`
    L1 { lambda: f64 },
    /// Indicator of `{x : lower <= x <= upper}`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `g(x) = weight * ||x||_2`; not separable.
    Norm2 { weight: f64 },
}

/// Scalar soft threshold `sign(u) * max(|u| - k, 0)`.
#[inline]
pub fn soft_threshold(u: f64, k: f64) -> f64 {
    if u > k {
        u - k
    } else if u < -k {
        u + k
    } else {
        0.0
    }
}

impl Regularizer {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidRegularizer(format!("l1 weight must be >= 0, got {lambda}")));
        }
        Ok(Self::L1 { lambda })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidRegularizer("box bounds differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidRegularizer("box needs lower <= upper".into()));
        }
        Ok(Self::Box { lower, upper })
    }

    pub fn norm2(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidRegularizer(format!("norm weight must be >= 0, got {weight}")));
        }
        Ok(Self::Norm2 { weight })
    }

    pub fn is_separable(&self) -> bool {
        !matches!(self, Self::Norm2 { .. })
    }

    /// Dimension the regularizer is tied to, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Self::Box { lower, .. } => Some(lower.len()),
            _ => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            Self::Box { lower, upper } => {
                let inside = x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| l <= v && v <= u);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Norm2 { weight } => weight * norm(x),
        }
    }

    /// `g(x) - g(base)`, summed coordinatewise for separable members so that
    /// small changes are not lost to cancellation.
    pub fn value_change(&self, x: &[f64], base: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::L1 { lambda } => lambda * x.iter().zip(base).map(|(a, b)| a.abs() - b.abs()).sum::<f64>(),
            Self::Box { .. } | Self::Norm2 { .. } => self.value(x) - self.value(base),
        }
    }

    /// Proximal operator with scale `t > 0`.
    pub fn prox(&self, u: &[f64], t: f64) -> Vec<f64> {
        match self {
            Self::Norm2 { weight } => {
                let nu = norm(u);
                let k = weight * t;
                if nu <= k {
                    vec![0.0; u.len()]
                } else {
                    let s = 1.0 - k / nu;
                    u.iter().map(|v| v * s).collect()
                }
            }
            _ => u.iter().enumerate().map(|(j, &v)| self.prox_coordinate(j, v, t)).collect(),
        }
    }

    /// Coordinatewise prox for separable members.
    ///
    /// # Panics
    ///
    /// On [`Regularizer::Norm2`], which has no coordinatewise prox.
    #[inline]
    pub fn prox_coordinate(&self, j: usize, u: f64, t: f64) -> f64 {
        match self {
            Self::Zero => u,
            Self::L1 { lambda } => soft_threshold(u, lambda * t),
            Self::Box { lower, upper } => u.clamp(lower[j], upper[j]),
            Self::Norm2 { .. } => panic!("norm regularizer is not separable"),
        }
    }
}
