use std::sync::Arc;

use crate::error::{Error, Result};
use crate::losses::{LipschitzEstimate, SmoothLoss};
use crate::regularizers::Regularizer;

/// `F = f + g` with the gradient Lipschitz constant of `f` cached at
/// construction.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    loss: Arc<dyn SmoothLoss>,
    reg: Regularizer,
    lipschitz: LipschitzEstimate,
}

impl CompositeProblem {
    pub fn new(loss: Arc<dyn SmoothLoss>, reg: Regularizer) -> Result<Self> {
        if let Some(m) = reg.fixed_dim() {
            if m != loss.dim() {
                return Err(Error::DimensionMismatch { expected: loss.dim(), found: m });
            }
        }
        let lipschitz = loss.lipschitz_gradient()?;
        Ok(Self { loss, reg, lipschitz })
    }

    pub fn dim(&self) -> usize {
        self.loss.dim()
    }

    pub fn loss(&self) -> &dyn SmoothLoss {
        &*self.loss
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    /// Cached estimate of `L1`, the Lipschitz modulus of `grad f`.
    pub fn lipschitz(&self) -> LipschitzEstimate {
        self.lipschitz
    }
}
