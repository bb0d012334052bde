//! Randomized invariants across modules.

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::collection::vec;
use proptest::prelude::*;

use pnt_core::data::{normalize_rows, parse_libsvm_with_dim, write_libsvm, Dataset};
use pnt_core::diagnostics::{distance_to_solution_set, fit_convergence_order};
use pnt_core::linalg::{dist, dot, estimate_spectral_norm, norm, HessianRep, LinearOperator, SparseMatrix};
use pnt_core::losses::{LogisticLoss, SmoothLoss};
use pnt_core::problems::{diagonal_lasso, with_known_solution_set};
use pnt_core::regularizers::Regularizer;
use pnt_core::residuals::{prox_gradient_map, subdifferential_distance};
use pnt_core::CompositeProblem;

const N: usize = 4;

/// Sparse `m x N` matrix from a dense draw, zeroing small entries.
fn sparse_from(vals: &[f64], m: usize) -> SparseMatrix {
    let rows: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|i| {
            (0..N).filter_map(|j| {
                let v = vals[i * N + j];
                (v.abs() > 0.3).then_some((j, v))
            })
            .collect()
        })
        .collect();
    SparseMatrix::from_rows(N, &rows).unwrap()
}

fn matrix() -> impl Strategy<Value = SparseMatrix> {
    (2usize..7).prop_flat_map(|m| vec(-2.0f64..2.0, m * N).prop_map(move |v| sparse_from(&v, m)))
}

fn structured_hessian() -> impl Strategy<Value = HessianRep> {
    (matrix(), 0.0f64..1e-2).prop_flat_map(|(a, alpha)| {
        let m = a.nrows();
        vec(0.0f64..0.25, m).prop_map(move |w| {
            HessianRep::structured(Arc::new(a.clone()), w, 1.0 / m as f64, alpha).unwrap()
        })
    })
}

fn logistic_problem(lambda: f64) -> impl Strategy<Value = CompositeProblem> {
    (matrix(), any::<u64>()).prop_map(move |(a, bits)| {
        let labels = (0..a.nrows()).map(|i| if bits >> (i % 64) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let loss = LogisticLoss::new(Arc::new(a), labels).unwrap();
        CompositeProblem::new(Arc::new(loss), Regularizer::l1(lambda).unwrap()).unwrap()
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    vec(-3.0f64..3.0, N)
}

fn to_nalgebra(a: &SparseMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d.get(i, j))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hessian_apply_is_linear(h in structured_hessian(), u in point(), v in point(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = h.apply(&combo).unwrap();
        let hu = h.apply(&u).unwrap();
        let hv = h.apply(&v).unwrap();
        let rhs: Vec<f64> = hu.iter().zip(&hv).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(dist(&lhs, &rhs) <= 1e-10 * norm(&rhs).max(1.0));
    }

    #[test]
    fn hessian_is_psd_plus_ridge(h in structured_hessian(), v in point()) {
        let hv = h.apply(&v).unwrap();
        prop_assert!(dot(&v, &hv) >= h.alpha * dot(&v, &v) - 1e-10);
    }

    #[test]
    fn hessian_diag_matches_unit_vectors(h in structured_hessian()) {
        let diag = h.diag();
        for j in 0..N {
            let mut e = vec![0.0; N];
            e[j] = 1.0;
            prop_assert!((h.apply(&e).unwrap()[j] - diag[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn structured_matches_materialized(a in matrix(), x in point()) {
        let m = a.nrows();
        let labels: Vec<f64> = (0..m).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let loss = LogisticLoss::new(Arc::new(a.clone()), labels.clone()).unwrap();
        let h = loss.hessian(&x).unwrap();
        // A^T D A / N assembled independently
        let am = to_nalgebra(&a);
        let z = &am * nalgebra::DVector::from_column_slice(&x);
        let d = nalgebra::DVector::from_fn(m, |i, _| {
            let s = 1.0 / (1.0 + (-labels[i] * z[i]).exp());
            s * (1.0 - s)
        });
        let dense = am.transpose() * DMatrix::from_diagonal(&d) * &am / m as f64;
        for j in 0..N {
            let mut e = vec![0.0; N];
            e[j] = 1.0;
            let col = h.apply(&e).unwrap();
            for i in 0..N {
                prop_assert!((col[i] - dense[(i, j)]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn spectral_norm_shrinks_when_rows_are_dropped(a in matrix(), keep_mask in any::<u8>()) {
        let keep: Vec<usize> = (0..a.nrows()).filter(|i| keep_mask >> i & 1 == 1).collect();
        prop_assume!(!keep.is_empty());
        let sub = a.select_rows(&keep);
        prop_assume!(sub.nnz() > 0 && a.nnz() > 0);
        let full = estimate_spectral_norm(&a, 1e-10, 5000, 1).unwrap().value;
        let part = estimate_spectral_norm(&sub, 1e-10, 5000, 1).unwrap().value;
        prop_assert!(part <= full * (1.0 + 1e-6));
    }

    #[test]
    fn g_is_lipschitz(p in logistic_problem(0.05), x in point(), y in point()) {
        let l1 = p.lipschitz().value;
        let gx = prox_gradient_map(&p, &x).unwrap();
        let gy = prox_gradient_map(&p, &y).unwrap();
        prop_assert!(dist(&gx, &gy) <= (2.0 + l1) * dist(&x, &y) + 1e-10);
    }

    #[test]
    fn residual_is_dominated_by_subgradient_distance(p in logistic_problem(0.05), x in point()) {
        let g = norm(&prox_gradient_map(&p, &x).unwrap());
        let d = subdifferential_distance(&p, &x).unwrap().expect("closed form for l1");
        prop_assert!(g <= d + 1e-10);
    }

    #[test]
    fn logistic_gradient_is_lipschitz(p in logistic_problem(0.0), x in point(), y in point()) {
        let l1 = p.lipschitz().value;
        let gx = p.loss().gradient(&x).unwrap();
        let gy = p.loss().gradient(&y).unwrap();
        prop_assert!(dist(&gx, &gy) <= l1 * dist(&x, &y) * (1.0 + 1e-6) + 1e-15);
    }

    #[test]
    fn order_fit_is_exact_on_power_sequences(p in 1.0f64..2.5, logc in -1.0f64..1.0, r0 in 1e-3f64..1e-2) {
        let c = logc.exp();
        let mut r = vec![r0];
        while r.len() < 6 {
            let next = c * r.last().unwrap().powf(p);
            if next < 1e-250 { break; }
            r.push(next);
        }
        prop_assume!(r.len() >= 4 && r.windows(2).all(|w| w[1] < w[0]) && (r[0] / r[r.len() - 1]).log10() >= 3.0);
        let fit = fit_convergence_order(&r).unwrap();
        prop_assert!((fit.order - p).abs() <= 1e-9 * p, "{} vs {p}", fit.order);
        prop_assert!((fit.r_squared - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn normalize_rows_is_idempotent(a in matrix()) {
        let d = Dataset { labels: vec![1.0; a.nrows()], features: a, name: "p".into() };
        let once = normalize_rows(&d);
        let twice = normalize_rows(&once);
        let (x, y) = (once.features.to_dense(), twice.features.to_dense());
        for i in 0..d.n_samples() {
            for j in 0..N {
                prop_assert!((x.get(i, j) - y.get(i, j)).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn libsvm_round_trip(a in matrix(), bits in any::<u64>()) {
        let labels = (0..a.nrows()).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let d = Dataset { features: a, labels, name: "rt".into() };
        let mut buf = Vec::new();
        write_libsvm(&d, &mut buf).unwrap();
        let back = parse_libsvm_with_dim(buf.as_slice(), "rt", Some(N)).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn residual_bounded_by_distance_on_lasso(d in vec(0.3f64..3.0, N), b in vec(-2.0f64..2.0, N), lambda in 0.0f64..1.0, x in point()) {
        let bp = diagonal_lasso(d, b, lambda).unwrap();
        let desc = bp.solution_set.unwrap();
        let l1 = bp.problem.lipschitz().value;
        let g = norm(&prox_gradient_map(&bp.problem, &x).unwrap());
        prop_assert!(g <= (2.0 + l1) * distance_to_solution_set(&x, &desc).unwrap() + 1e-10);
    }
}

#[test]
fn spectral_norm_matches_singular_values() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<(usize, f64)>> =
        (0..5).map(|_| (0..3).map(|j| (j, rng.random_range(-1.0..1.0))).collect()).collect();
    let a = SparseMatrix::from_rows(3, &rows).unwrap();
    let est = estimate_spectral_norm(&a, 1e-12, 10_000, 3).unwrap();
    let smax = to_nalgebra(&a).singular_values().max();
    assert!(est.converged);
    assert!((est.value - smax).abs() <= 1e-6 * smax, "{} vs {smax}", est.value);
}

#[test]
fn small_residual_means_close_to_solution_set() {
    use pnt_core::diagnostics::{scan_proposition_bounds, SolutionSetDescription};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    for bp in with_known_solution_set().unwrap() {
        let desc = bp.solution_set.as_ref().unwrap();
        let kappa = scan_proposition_bounds(&bp.problem, desc, 300, 4).unwrap().fitted_kappa;
        assert!(kappa.is_finite());
        let member = match desc {
            SolutionSetDescription::Singleton(x) => x.clone(),
            SolutionSetDescription::AffineSet { particular, .. } => particular.clone(),
            SolutionSetDescription::Ray { direction } => direction.iter().map(|u| -0.7 * u).collect(),
        };
        assert!(norm(&prox_gradient_map(&bp.problem, &member).unwrap()) <= 1e-12, "{}", bp.id);
        let mut checked = 0;
        for _ in 0..200 {
            let r = 10f64.powf(rng.random_range(-12.0..-6.0));
            let x: Vec<f64> = member.iter().map(|m| m + r * rng.random_range(-1.0..1.0)).collect();
            if norm(&prox_gradient_map(&bp.problem, &x).unwrap()) <= 1e-9 {
                checked += 1;
                let d = distance_to_solution_set(&x, desc).unwrap();
                assert!(d <= 1e-6 * (1.0 + kappa), "{}: dist {d}", bp.id);
            }
        }
        assert!(checked > 0, "{}", bp.id);
    }
}
