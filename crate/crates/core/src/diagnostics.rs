//! Empirical checks of the residual bounds and convergence rates.
//!
//! * [`fit_convergence_order`] estimates `p` in `r_{k+1} ~ C r_k^p` from the
//!   tail of a residual sequence.
//! * [`distance_to_solution_set`] measures `dist(x, X*)` for solution sets
//!   known in closed form.
//! * [`scan_proposition_bounds`] samples points around `X*` and evaluates
//!   `||G(x) - G(y)|| <= (2 + L1) ||x - y||`, `||G(x)|| <= (2 + L1) dist(x, X*)`
//!   and fits the error-bound modulus `kappa` in `dist(x, X*) <= kappa ||G(x)||`.
//! * [`check_trace_certificates`] audits a solver trace against the
//!   per-iteration guarantees of the method.
//! * [`luo_tseng_witness`] builds a sequence along which `dist / ||G||` blows
//!   up even though the residual vanishes.

use std::io::Write;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist, dot, norm};
use crate::problem::CompositeProblem;
use crate::problems::example_2_7_problem;
use crate::residuals::{objective, prox_gradient_map};
use crate::solver::SolverConfig;
use crate::trace::{Branch, IterateRecord};

/// Residuals above this level are treated as pre-asymptotic.
pub const RATE_WINDOW_CEILING: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Estimated order `p`.
    pub order: f64,
    /// Intercept `ln C`.
    pub log_constant: f64,
    pub r_squared: f64,
    /// Residual indices used.
    pub window: Range<usize>,
}

impl RateFit {
    /// Decades spanned by the window.
    pub fn decades(&self, residuals: &[f64]) -> f64 {
        (residuals[self.window.start] / residuals[self.window.end - 1]).log10()
    }
}

/// Least-squares fit of `ln r_{k+1} = p ln r_k + c` over the tail of
/// `residuals`.
///
/// The window is the longest strictly decreasing, positive suffix in which
/// every residual after the first is at most [`RATE_WINDOW_CEILING`]. It must
/// hold at least 4 residuals and span at least 3 decades.
pub fn fit_convergence_order(residuals: &[f64]) -> Result<RateFit> {
    let end = residuals.len();
    if end == 0 || !(residuals[end - 1] > 0.0) {
        return Err(Error::Diagnostic("residuals must end with a positive value".into()));
    }
    let mut start = end - 1;
    while start > 0 && residuals[start - 1] > residuals[start] && residuals[start - 1].is_finite() {
        start -= 1;
    }
    let first_small = (start..end)
        .find(|&i| residuals[i] <= RATE_WINDOW_CEILING)
        .ok_or_else(|| Error::Diagnostic("no residual below the window ceiling".into()))?;
    let start = start.max(first_small.saturating_sub(1));
    let window = start..end;
    if window.len() < 4 {
        return Err(Error::Diagnostic(format!(
            "rate window has {} residuals, need at least 4",
            window.len()
        )));
    }
    let decades = (residuals[start] / residuals[end - 1]).log10();
    if decades < 3.0 - 1e-9 {
        return Err(Error::Diagnostic(format!("rate window spans {decades:.2} decades, need 3")));
    }

    let xs: Vec<f64> = residuals[start..end - 1].iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = residuals[start + 1..end].iter().map(|r| r.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let order = sxy / sxx;
    let log_constant = my - order * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (order * x + log_constant);
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit { order, log_constant, r_squared, window })
}

/// Closed-form description of a solution set.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionSetDescription {
    Singleton(Vec<f64>),
    /// `{p + Z c}` with orthonormal columns `Z` (stored column by column).
    AffineSet { particular: Vec<f64>, basis: Vec<Vec<f64>> },
    /// `{-gamma u : gamma >= 0}` for a unit vector `u`.
    Ray { direction: Vec<f64> },
}

impl SolutionSetDescription {
    pub fn affine(particular: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        for (i, zi) in basis.iter().enumerate() {
            check_len(particular.len(), zi.len())?;
            for (j, zj) in basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(zi, zj) - target).abs() > 1e-10 {
                    return Err(Error::Diagnostic("affine basis must be orthonormal".into()));
                }
            }
        }
        Ok(Self::AffineSet { particular, basis })
    }

    pub fn ray(direction: Vec<f64>) -> Result<Self> {
        if (norm(&direction) - 1.0).abs() > 1e-10 {
            return Err(Error::Diagnostic("ray direction must be a unit vector".into()));
        }
        Ok(Self::Ray { direction })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Singleton(x) => x.len(),
            Self::AffineSet { particular, .. } => particular.len(),
            Self::Ray { direction } => direction.len(),
        }
    }

    /// A point of the set chosen from `rng`.
    fn sample_member(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Self::Singleton(x) => x.clone(),
            Self::AffineSet { particular, basis } => {
                let mut p = particular.clone();
                for z in basis {
                    let c = rng.random_range(-2.0..2.0);
                    p.iter_mut().zip(z).for_each(|(pi, zi)| *pi += c * zi);
                }
                p
            }
            Self::Ray { direction } => {
                let gamma = rng.random_range(0.0..3.0);
                direction.iter().map(|u| -gamma * u).collect()
            }
        }
    }
}

pub fn distance_to_solution_set(x: &[f64], desc: &SolutionSetDescription) -> Result<f64> {
    check_len(desc.dim(), x.len())?;
    Ok(match desc {
        SolutionSetDescription::Singleton(s) => dist(x, s),
        SolutionSetDescription::AffineSet { particular, basis } => {
            let mut r: Vec<f64> = x.iter().zip(particular).map(|(a, b)| a - b).collect();
            let coeffs: Vec<f64> = basis.iter().map(|z| dot(z, &r)).collect();
            for (c, z) in coeffs.iter().zip(basis) {
                r.iter_mut().zip(z).for_each(|(ri, zi)| *ri -= c * zi);
            }
            norm(&r)
        }
        SolutionSetDescription::Ray { direction } => {
            // project onto {s * (-u) : s >= 0}
            let s = -dot(x, direction);
            if s <= 0.0 {
                norm(x)
            } else {
                x.iter().zip(direction).map(|(xi, u)| (xi + s * u).powi(2)).sum::<f64>().sqrt()
            }
        }
    })
}

/// Ratios above `1 + HARD_BOUND_SLACK` count as violations of the hard
/// bounds.
pub const HARD_BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PropositionScan {
    pub samples: usize,
    /// `max ||G(x) - G(y)|| / ((2 + L1) ||x - y||)`
    pub lipschitz_max_ratio: f64,
    pub lipschitz_violations: usize,
    /// `max ||G(x)|| / ((2 + L1) dist(x, X*))`
    pub residual_max_ratio: f64,
    pub residual_violations: usize,
    /// `max dist(x, X*) / ||G(x)||` over the samples.
    pub fitted_kappa: f64,
    pub l1: f64,
}

impl PropositionScan {
    pub fn hard_violations(&self) -> usize {
        self.lipschitz_violations + self.residual_violations
    }
}

/// Samples `sample_count` points near `X*` (members of the set plus
/// perturbations with radii spread over four decades) and evaluates the
/// residual bounds.
pub fn scan_proposition_bounds(
    problem: &CompositeProblem,
    desc: &SolutionSetDescription,
    sample_count: usize,
    seed: u64,
) -> Result<PropositionScan> {
    check_len(problem.dim(), desc.dim())?;
    let n = problem.dim();
    let l1 = problem.lipschitz().value;
    let modulus = 2.0 + l1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let base = desc.sample_member(rng);
        let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let nd = norm(&dir).max(f64::MIN_POSITIVE);
        let radius = 10f64.powf(rng.random_range(-4.0..0.0));
        base.iter().zip(&dir).map(|(b, d)| b + radius * d / nd).collect()
    };

    let mut scan = PropositionScan {
        samples: sample_count,
        lipschitz_max_ratio: 0.0,
        lipschitz_violations: 0,
        residual_max_ratio: 0.0,
        residual_violations: 0,
        fitted_kappa: 0.0,
        l1,
    };
    for _ in 0..sample_count {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let gx = prox_gradient_map(problem, &x)?;
        let gy = prox_gradient_map(problem, &y)?;

        let dxy = dist(&x, &y);
        if dxy > 0.0 {
            let r = dist(&gx, &gy) / (modulus * dxy);
            scan.lipschitz_max_ratio = scan.lipschitz_max_ratio.max(r);
            if r > 1.0 + HARD_BOUND_SLACK {
                scan.lipschitz_violations += 1;
            }
        }

        let ngx = norm(&gx);
        let dx = distance_to_solution_set(&x, desc)?;
        let r = if dx > 0.0 {
            ngx / (modulus * dx)
        } else if ngx == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        scan.residual_max_ratio = scan.residual_max_ratio.max(r);
        if r > 1.0 + HARD_BOUND_SLACK {
            scan.residual_violations += 1;
        }
        if ngx > 0.0 {
            scan.fitted_kappa = scan.fitted_kappa.max(dx / ngx);
        }
    }
    Ok(scan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LuoTsengPoint {
    pub k: usize,
    pub gamma: f64,
    pub objective: f64,
    pub g_norm: f64,
    pub dist: f64,
    /// `dist(x_k, X*) / ||G(x_k)||`
    pub ratio: f64,
}

/// For `F(x) = <c, x> + ||x||` with unit `c`, walks `x_k = gamma_k (-c_k)`
/// where `c_k -> c` are unit vectors tilted by `2^{-k}` and
/// `gamma_k = 1 / sqrt(1 - <c, c_k>)`. Both `F(x_k)` and `||G(x_k)||` go to
/// zero while `dist(x_k, X*) / ||G(x_k)||` grows without bound.
pub fn luo_tseng_witness(c: &[f64], count: usize) -> Result<Vec<LuoTsengPoint>> {
    let n = c.len();
    if n < 2 {
        return Err(Error::Diagnostic("the witness needs dimension >= 2".into()));
    }
    let problem = example_2_7_problem(c.to_vec())?;
    let desc = SolutionSetDescription::ray(c.to_vec())?;

    // unit vector orthogonal to c, from the coordinate axis least aligned with it
    let j = (0..n)
        .min_by(|&a, &b| c[a].abs().partial_cmp(&c[b].abs()).expect("finite"))
        .expect("n >= 2");
    let mut w: Vec<f64> = c.iter().map(|ci| -c[j] * ci).collect();
    w[j] += 1.0;
    let nw = norm(&w);
    w.iter_mut().for_each(|v| *v /= nw);

    let mut out = Vec::with_capacity(count);
    for k in 1..=count {
        let eps = 0.5f64.powi(k as i32);
        let mut ck: Vec<f64> = c.iter().zip(&w).map(|(a, b)| a + eps * b).collect();
        let nc = norm(&ck);
        ck.iter_mut().for_each(|v| *v /= nc);
        // 1 - <c, c_k> = 1 - 1/sqrt(1 + eps^2), written without cancellation
        let s = (1.0 + eps * eps).sqrt();
        let one_minus = eps * eps / (s * (s + 1.0));
        let gamma = 1.0 / one_minus.sqrt();
        let x: Vec<f64> = ck.iter().map(|v| -gamma * v).collect();
        let g_norm = norm(&prox_gradient_map(&problem, &x)?);
        let d = distance_to_solution_set(&x, &desc)?;
        out.push(LuoTsengPoint {
            k,
            gamma,
            objective: objective(&problem, &x)?,
            g_norm,
            dist: d,
            ratio: d / g_norm,
        });
    }
    Ok(out)
}

/// Slack used by the per-iteration certificate checks.
pub const CERTIFICATE_SLACK: f64 = 1e-12;

/// A trace row that fails one of the per-iteration checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateViolation {
    pub k: usize,
    pub check: &'static str,
    pub detail: String,
}

/// Audits a solver trace row by row:
///
/// * `inexactness`: `||r_k|| <= eta_k ||G(x_k)||` and `q_k(x_k) - q_k(x_hat) >= 0`
/// * `sufficient_decrease`: on line-search rows,
///   `F(x_{k+1}) <= F(x_k) - theta alpha_k t_k ||d_k||^2`
/// * `step_floor`: on line-search rows,
///   `t_k >= min(1, gamma (1 - theta) alpha_k / L1)`, relaxed by `1e-6`
/// * `vartheta_monotone`: the recorded reference residual never increases
/// * `objective_bound`: every objective value stays at or below `C`
///
/// All comparisons allow [`CERTIFICATE_SLACK`].
pub fn check_trace_certificates(
    trace: &[IterateRecord],
    cfg: &SolverConfig,
    c_bound: f64,
    l1: f64,
) -> Vec<CertificateViolation> {
    let mut out = Vec::new();
    let mut flag = |k: usize, check: &'static str, detail: String| {
        out.push(CertificateViolation { k, check, detail })
    };
    let mut prev_theta = f64::INFINITY;
    for r in trace {
        if r.branch != Branch::Terminal {
            if r.residual_norm > r.eta * r.g_norm + CERTIFICATE_SLACK || r.q_drop < -CERTIFICATE_SLACK {
                flag(
                    r.k,
                    "inexactness",
                    format!("residual {} vs {}, q_drop {}", r.residual_norm, r.eta * r.g_norm, r.q_drop),
                );
            }
            if r.branch == Branch::LineSearch {
                let bound = r.f - cfg.theta * r.alpha * r.t * r.step_norm * r.step_norm;
                if r.f_next > bound + CERTIFICATE_SLACK {
                    flag(r.k, "sufficient_decrease", format!("F_next {} > {}", r.f_next, bound));
                }
                let floor = if l1 > 0.0 {
                    (cfg.gamma * (1.0 - cfg.theta) * r.alpha / l1).min(1.0)
                } else {
                    1.0
                };
                if r.t < floor * (1.0 - 1e-6) {
                    flag(r.k, "step_floor", format!("t {} < {}", r.t, floor));
                }
            }
            if r.f_next > c_bound + CERTIFICATE_SLACK {
                flag(r.k, "objective_bound", format!("F_next {} > C {}", r.f_next, c_bound));
            }
        }
        if r.theta > prev_theta {
            flag(r.k, "vartheta_monotone", format!("{} > {}", r.theta, prev_theta));
        }
        prev_theta = r.theta;
        if r.f > c_bound + CERTIFICATE_SLACK {
            flag(r.k, "objective_bound", format!("F {} > C {}", r.f, c_bound));
        }
    }
    out
}

/// One row of the bound/rate report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub problem_id: String,
    pub bound_name: String,
    pub max_ratio: Option<f64>,
    pub fitted_kappa: Option<f64>,
    pub fitted_p: Option<f64>,
    pub r_squared: Option<f64>,
}

impl ReportRow {
    pub fn from_scan(problem_id: &str, scan: &PropositionScan) -> Vec<Self> {
        let row = |name: &str, ratio: Option<f64>, kappa: Option<f64>| ReportRow {
            problem_id: problem_id.to_string(),
            bound_name: name.to_string(),
            max_ratio: ratio,
            fitted_kappa: kappa,
            fitted_p: None,
            r_squared: None,
        };
        vec![
            row("g_lipschitz", Some(scan.lipschitz_max_ratio), None),
            row("g_upper_by_distance", Some(scan.residual_max_ratio), None),
            row("distance_by_g", None, Some(scan.fitted_kappa)),
        ]
    }

    pub fn from_rate(problem_id: &str, fit: &RateFit) -> Self {
        ReportRow {
            problem_id: problem_id.to_string(),
            bound_name: "convergence_order".to_string(),
            max_ratio: None,
            fitted_kappa: None,
            fitted_p: Some(fit.order),
            r_squared: Some(fit.r_squared),
        }
    }
}

pub const REPORT_HEADER: [&str; 6] =
    ["problem_id", "bound_name", "max_ratio", "fitted_kappa", "fitted_p", "r_squared"];

pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.problem_id.clone(),
            r.bound_name.clone(),
            opt(r.max_ratio),
            opt(r.fitted_kappa),
            opt(r.fitted_p),
            opt(r.r_squared),
        ])?;
    }
    w.flush()?;
    Ok(())
}
