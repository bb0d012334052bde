//! Smooth convex losses `f`.
//!
//! The generalized linear losses have the form `f(x) = h(Ax) + <b, x>`, so
//! their Hessians are returned as the structured operator
//! `A^T diag(d) A / N` rather than as dense matrices.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::linalg::{
    dot, estimate_spectral_norm, DenseMatrix, HessianRep, LinearOperator, SparseMatrix,
    SPECTRAL_MAX_ITER, SPECTRAL_SEED, SPECTRAL_TOL,
};

/// Global Lipschitz constant of the gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub value: f64,
    /// `false` when the spectral estimate behind it hit its iteration cap.
    pub converged: bool,
}

pub trait SmoothLoss: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Hessian at `x` with zero ridge.
    fn hessian(&self, x: &[f64]) -> Result<HessianRep>;
    fn lipschitz_gradient(&self) -> Result<LipschitzEstimate>;
}

/// `log(1 + exp(-z))` without overflow.
#[inline]
pub fn log1p_exp_neg(z: f64) -> f64 {
    (-z.abs()).exp().ln_1p() + (-z).max(0.0)
}

/// Logistic sigmoid `1 / (1 + exp(-z))`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss `(1/N) sum log(1 + exp(-b_i a_i^T x))`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    a: Arc<SparseMatrix>,
    labels: Vec<f64>,
}

impl LogisticLoss {
    pub fn new(a: Arc<SparseMatrix>, labels: Vec<f64>) -> Result<Self> {
        check_len(a.nrows(), labels.len())?;
        if a.nrows() == 0 {
            return Err(Error::InvalidMatrix("logistic loss needs at least one sample".into()));
        }
        if let Some(b) = labels.iter().find(|b| **b != 1.0 && **b != -1.0) {
            return Err(Error::InvalidConfig(format!("labels must be +1 or -1, got {b}")));
        }
        Ok(Self { a, labels })
    }

    pub fn features(&self) -> &Arc<SparseMatrix> {
        &self.a
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.a.matvec(x)?;
        Ok(ax.iter().zip(&self.labels).map(|(v, b)| v * b).collect())
    }

    fn n_samples(&self) -> f64 {
        self.labels.len() as f64
    }
}

impl SmoothLoss for LogisticLoss {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let z = self.margins(x)?;
        Ok(z.iter().map(|&zi| log1p_exp_neg(zi)).sum::<f64>() / self.n_samples())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.margins(x)?;
        let n = self.n_samples();
        let w: Vec<f64> =
            z.iter().zip(&self.labels).map(|(&zi, b)| -b * sigmoid(-zi) / n).collect();
        self.a.matvec_transpose(&w)
    }

    fn hessian(&self, x: &[f64]) -> Result<HessianRep> {
        let z = self.margins(x)?;
        let d = z
            .iter()
            .map(|&zi| sigmoid(zi) * sigmoid(-zi))
            .collect();
        HessianRep::structured(self.a.clone(), d, 1.0 / self.n_samples(), 0.0)
    }

    /// `||A||^2 / (4N)`
    fn lipschitz_gradient(&self) -> Result<LipschitzEstimate> {
        let s = estimate_spectral_norm(&*self.a, SPECTRAL_TOL, SPECTRAL_MAX_ITER, SPECTRAL_SEED)?;
        Ok(LipschitzEstimate {
            value: s.value * s.value / (4.0 * self.n_samples()),
            converged: s.converged,
        })
    }
}

/// Result of a single least-squares evaluation.
#[derive(Debug, Clone)]
pub struct LeastSquaresEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: HessianRep,
}

/// `f(x) = ||Ax - rhs||^2 / 2`
#[derive(Debug, Clone)]
pub struct LeastSquaresLoss {
    a: Arc<SparseMatrix>,
    rhs: Vec<f64>,
}

impl LeastSquaresLoss {
    pub fn new(a: Arc<SparseMatrix>, rhs: Vec<f64>) -> Result<Self> {
        check_len(a.nrows(), rhs.len())?;
        Ok(Self { a, rhs })
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.a.matvec(x)?;
        r.iter_mut().zip(&self.rhs).for_each(|(ri, b)| *ri -= b);
        Ok(r)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<LeastSquaresEval> {
        let r = self.residual(x)?;
        Ok(LeastSquaresEval {
            value: 0.5 * dot(&r, &r),
            gradient: self.a.matvec_transpose(&r)?,
            hessian: self.hessian(x)?,
        })
    }
}

impl SmoothLoss for LeastSquaresLoss {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        Ok(0.5 * dot(&r, &r))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(x)?;
        self.a.matvec_transpose(&r)
    }

    fn hessian(&self, x: &[f64]) -> Result<HessianRep> {
        check_len(self.dim(), x.len())?;
        HessianRep::structured(self.a.clone(), vec![1.0; self.a.nrows()], 1.0, 0.0)
    }

    /// `||A||^2`
    fn lipschitz_gradient(&self) -> Result<LipschitzEstimate> {
        let s = estimate_spectral_norm(&*self.a, SPECTRAL_TOL, SPECTRAL_MAX_ITER, SPECTRAL_SEED)?;
        Ok(LipschitzEstimate { value: s.value * s.value, converged: s.converged })
    }
}

/// `f(x) = <c, x>`; zero curvature.
#[derive(Debug, Clone)]
pub struct LinearLoss {
    c: Vec<f64>,
}

impl LinearLoss {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }
}

impl SmoothLoss for LinearLoss {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        Ok(dot(&self.c, x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        Ok(self.c.clone())
    }

    fn hessian(&self, x: &[f64]) -> Result<HessianRep> {
        check_len(self.dim(), x.len())?;
        HessianRep::dense(DenseMatrix::zeros(self.dim(), self.dim()), 0.0)
    }

    fn lipschitz_gradient(&self) -> Result<LipschitzEstimate> {
        Ok(LipschitzEstimate { value: 0.0, converged: true })
    }
}

/// `f(x) = x^T Q x / 2 + <b, x>` with symmetric PSD `Q`.
#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    q: DenseMatrix,
    b: Vec<f64>,
}

impl QuadraticLoss {
    pub fn new(q: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        check_len(q.ncols(), b.len())?;
        if !q.is_symmetric(1e-12) {
            return Err(Error::InvalidMatrix("quadratic form must be symmetric".into()));
        }
        Ok(Self { q, b })
    }
}

impl SmoothLoss for QuadraticLoss {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let qx = self.q.matvec(x)?;
        Ok(0.5 * dot(x, &qx) + dot(&self.b, x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.q.matvec(x)?;
        g.iter_mut().zip(&self.b).for_each(|(gi, bi)| *gi += bi);
        Ok(g)
    }

    fn hessian(&self, x: &[f64]) -> Result<HessianRep> {
        check_len(self.dim(), x.len())?;
        HessianRep::dense(self.q.clone(), 0.0)
    }

    fn lipschitz_gradient(&self) -> Result<LipschitzEstimate> {
        let s = estimate_spectral_norm(&self.q, SPECTRAL_TOL, SPECTRAL_MAX_ITER, SPECTRAL_SEED)?;
        Ok(LipschitzEstimate { value: s.value, converged: s.converged })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist, norm, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, m: usize, n: usize) -> SparseMatrix {
        let rows: Vec<Vec<(usize, f64)>> = (0..m)
            .map(|_| (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect())
            .collect();
        SparseMatrix::from_rows(n, &rows).unwrap()
    }

    fn random_logistic(seed: u64, m: usize, n: usize) -> LogisticLoss {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sparse(&mut rng, m, n);
        let b = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        LogisticLoss::new(Arc::new(a), b).unwrap()
    }

    fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        dist(a, b) / norm(b).max(1e-12)
    }

    #[test]
    fn logistic_value_examples() {
        let loss = random_logistic(3, 5, 4);
        assert!((loss.value(&[0.0; 4]).unwrap() - 2f64.ln()).abs() < 1e-15);

        let single =
            LogisticLoss::new(Arc::new(SparseMatrix::identity(1)), vec![1.0]).unwrap();
        let mut prev = f64::INFINITY;
        for t in [0.0, 1.0, 10.0, 100.0, 800.0] {
            let v = single.value(&[t]).unwrap();
            assert!(v < prev && v.is_finite());
            prev = v;
        }
        assert!(prev < 1e-300);

        let a = SparseMatrix::from_rows(2, &[vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap();
        let loss = LogisticLoss::new(Arc::new(a), vec![1.0, -1.0]).unwrap();
        let e = std::f64::consts::E;
        let oracle = 0.5 * ((1.0 + 1.0 / e).ln() + (1.0 + e).ln());
        assert!((loss.value(&[1.0, 1.0]).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn logistic_value_is_finite_for_huge_margins() {
        let single =
            LogisticLoss::new(Arc::new(SparseMatrix::identity(1)), vec![1.0]).unwrap();
        assert!((single.value(&[-1000.0]).unwrap() - 1000.0).abs() < 1e-9);
        assert_eq!(single.gradient(&[-1000.0]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn logistic_rejects_bad_labels() {
        let a = Arc::new(SparseMatrix::identity(2));
        assert!(LogisticLoss::new(a.clone(), vec![1.0, 0.0]).is_err());
        assert!(LogisticLoss::new(a, vec![1.0]).is_err());
    }

    #[test]
    fn logistic_gradient_examples() {
        let loss = random_logistic(4, 6, 3);
        let g0 = loss.gradient(&[0.0; 3]).unwrap();
        let a = loss.features();
        let n = 6.0;
        let mut oracle = vec![0.0; 3];
        for i in 0..6 {
            for (j, v) in a.row(i) {
                oracle[j] -= loss.labels()[i] * v / (2.0 * n);
            }
        }
        assert!(rel_err(&g0, &oracle) < 1e-14);

        let zero_rows: Vec<Vec<(usize, f64)>> = vec![vec![]; 3];
        let za = SparseMatrix::from_rows(2, &zero_rows).unwrap();
        let zl = LogisticLoss::new(Arc::new(za), vec![1.0, -1.0, 1.0]).unwrap();
        assert_eq!(zl.gradient(&[0.3, -2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let loss = random_logistic(5, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let fd = fd_gradient(|y| loss.value(y).unwrap(), &x, 1e-5);
            assert!(rel_err(&loss.gradient(&x).unwrap(), &fd) <= 1e-6);
        }
    }

    #[test]
    fn logistic_hessian_examples() {
        let loss = random_logistic(6, 5, 3);
        let h = loss.hessian(&[0.0; 3]).unwrap();
        match &h.curvature {
            crate::linalg::Curvature::Structured { weights, scale, .. } => {
                assert!(weights.iter().all(|d| *d == 0.25));
                assert_eq!(*scale, 1.0 / 5.0);
            }
            _ => panic!("expected structured Hessian"),
        }
        assert_eq!(h.alpha, 0.0);

        // separable data: a_i = b_i e_1, so x = t e_1 saturates every sample
        let a = SparseMatrix::from_rows(1, &[vec![(0, 1.0)], vec![(0, -1.0)]]).unwrap();
        let sep = LogisticLoss::new(Arc::new(a), vec![1.0, -1.0]).unwrap();
        let h = sep.hessian(&[60.0]).unwrap();
        if let crate::linalg::Curvature::Structured { weights, .. } = &h.curvature {
            assert!(weights.iter().all(|d| *d > 0.0 && *d < 1e-25));
        }
    }

    #[test]
    fn logistic_hessian_matches_gradient_differences() {
        let loss = random_logistic(7, 8, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-5;
            let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let fd: Vec<f64> = sub(&loss.gradient(&xp).unwrap(), &loss.gradient(&xm).unwrap())
                .iter()
                .map(|d| d / (2.0 * h))
                .collect();
            let hv = loss.hessian(&x).unwrap().apply(&v).unwrap();
            assert!(rel_err(&hv, &fd) <= 1e-5);
        }
    }

    #[test]
    fn least_squares_examples() {
        let ls = LeastSquaresLoss::new(Arc::new(SparseMatrix::identity(2)), vec![1.0, 2.0]).unwrap();
        let e = ls.evaluate(&[1.0, 2.0]).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.gradient, vec![0.0, 0.0]);
        let e = ls.evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(e.value, 2.5);
        assert_eq!(e.gradient, vec![-1.0, -2.0]);

        let a = SparseMatrix::from_rows(2, &[vec![(0, 1.0), (1, 1.0)]]).unwrap();
        let ls = LeastSquaresLoss::new(Arc::new(a), vec![2.0]).unwrap();
        let e = ls.evaluate(&[1.0, 1.0]).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.gradient, vec![0.0, 0.0]);
        // (0, 2) and (2, 0) fit too: the minimizer set is a line
        assert_eq!(ls.value(&[0.0, 2.0]).unwrap(), 0.0);
        assert_eq!(e.hessian.apply(&[1.0, 0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn lipschitz_examples() {
        let n = 6;
        let logit =
            LogisticLoss::new(Arc::new(SparseMatrix::identity(n)), vec![1.0; n]).unwrap();
        let l = logit.lipschitz_gradient().unwrap();
        assert!(l.converged);
        assert!((l.value - 1.0 / (4.0 * n as f64)).abs() < 1e-12);

        let a = SparseMatrix::from_rows(1, &[vec![(0, 3.0)]]).unwrap();
        let ls = LeastSquaresLoss::new(Arc::new(a), vec![0.0]).unwrap();
        assert!((ls.lipschitz_gradient().unwrap().value - 9.0).abs() < 1e-9);
    }

    #[test]
    fn logistic_lipschitz_bounds_sampled_ratios() {
        let loss = random_logistic(8, 6, 4);
        let l1 = loss.lipschitz_gradient().unwrap().value;
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let r = dist(&loss.gradient(&x).unwrap(), &loss.gradient(&y).unwrap()) / dist(&x, &y);
            worst = worst.max(r);
        }
        assert!(worst <= l1 * (1.0 + 1e-6), "{worst} > {l1}");
    }

    #[test]
    fn losses_are_midpoint_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let logit = random_logistic(9, 7, 3);
        let ls = LeastSquaresLoss::new(Arc::new(random_sparse(&mut rng, 4, 3)), vec![1.0, 0.0, -1.0, 2.0])
            .unwrap();
        let losses: [&dyn SmoothLoss; 2] = [&logit, &ls];
        for f in losses {
            for _ in 0..100 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
                let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
                let lhs = f.value(&m).unwrap();
                let rhs = 0.5 * (f.value(&x).unwrap() + f.value(&y).unwrap());
                assert!(lhs <= rhs + 1e-12);
            }
        }
    }

    #[test]
    fn linear_and_quadratic_losses() {
        let lin = LinearLoss::new(vec![0.6, 0.8]);
        assert_eq!(lin.value(&[1.0, 1.0]).unwrap(), 1.4);
        assert_eq!(lin.gradient(&[5.0, -5.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(lin.hessian(&[0.0, 0.0]).unwrap().apply(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(lin.lipschitz_gradient().unwrap().value, 0.0);

        let q = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let quad = QuadraticLoss::new(q, vec![1.0, -1.0]).unwrap();
        assert_eq!(quad.value(&[1.0, 2.0]).unwrap(), 0.5 * (2.0 + 4.0) + 1.0 - 2.0);
        assert_eq!(quad.gradient(&[1.0, 2.0]).unwrap(), vec![3.0, 1.0]);
        assert!((quad.lipschitz_gradient().unwrap().value - 2.0).abs() < 1e-5);
    }
}
