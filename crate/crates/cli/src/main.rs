//! `pnt`: solve, benchmark and diagnose l1-regularized logistic regression
//! with the inexact proximal Newton-type method.
//!
//! Exit codes: 0 on success, 1 when a solve fails to converge (or a
//! diagnostic finds a violation), 2 on usage errors and unreadable inputs.

mod args;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use pnt_core::baselines::{pgm_solve, PgmConfig};
use pnt_core::data::{generate_synthetic, normalize_rows, parse_libsvm_with_dim, Dataset};
use pnt_core::diagnostics::{
    fit_convergence_order, luo_tseng_witness, scan_proposition_bounds, write_report_csv, ReportRow,
    SolutionSetDescription,
};
use pnt_core::problems::{self, logistic_l1};
use pnt_core::solver::{solve, SolveReport, SolveStatus};
use pnt_core::trace::{read_trace_column, write_trace_csv};
use pnt_core::CompositeProblem;

use args::{BenchArgs, CheckPropsArgs, Cli, Command, ProblemArgs, RatesArgs, SolveArgs};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Rates(a) => run_rates(a),
        Command::CheckProps(a) => run_check_props(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_dataset(p: &ProblemArgs) -> anyhow::Result<Dataset> {
    let data = match (&p.source.data, &p.source.synthetic) {
        (Some(path), None) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            parse_libsvm_with_dim(BufReader::new(file), &name, p.n_features)
                .with_context(|| format!("cannot parse {}", path.display()))?
        }
        (None, Some(spec)) => {
            if p.n_features.is_some() {
                bail!("--n-features only applies to --data");
            }
            generate_synthetic(&args::parse_synthetic(spec)?)?
        }
        _ => bail!("give exactly one of --data and --synthetic"),
    };
    Ok(if p.no_normalize { data } else { normalize_rows(&data) })
}

fn read_x0(path: &PathBuf, n: usize) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let x0 = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad number {t:?} in {}", path.display())))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    if x0.len() != n {
        bail!("{} holds {} values, expected {n}", path.display(), x0.len());
    }
    Ok(x0)
}

fn build_problem(p: &ProblemArgs) -> anyhow::Result<(CompositeProblem, Vec<f64>)> {
    if p.lambda.is_nan() || p.lambda < 0.0 {
        bail!("--lambda must be nonnegative");
    }
    let data = load_dataset(p)?;
    let problem = logistic_l1(&data, p.lambda)?;
    let x0 = match &p.x0_file {
        Some(path) => read_x0(path, problem.dim())?,
        None => vec![0.0; problem.dim()],
    };
    Ok((problem, x0))
}

fn summarize(label: &str, rep: &SolveReport) {
    eprintln!(
        "{label}: {:?} after {} outer / {} inner iterations, F = {:.12e}, ||G|| = {:.3e}, {:.3} s",
        rep.status,
        rep.outer_iterations(),
        rep.inner_total(),
        rep.final_objective(),
        rep.final_g_norm(),
        rep.wall_time.as_secs_f64()
    );
}

fn run_solve(a: SolveArgs) -> anyhow::Result<ExitCode> {
    let (problem, x0) = build_problem(&a.problem)?;
    let cfg = a.overrides.apply(a.rho, a.tol);
    cfg.validate()?;
    let rep = solve(&problem, x0, &cfg)?;
    let mut out = open_output(a.out.as_deref())?;
    write_trace_csv(&rep.trace, &mut out)?;
    out.flush()?;
    summarize("solve", &rep);
    Ok(if rep.status == SolveStatus::Converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    })
}

fn run_bench(a: BenchArgs) -> anyhow::Result<ExitCode> {
    if a.rho.is_empty() || a.tol.is_empty() {
        bail!("--rho and --tol need at least one value");
    }
    let (problem, x0) = build_problem(&a.problem)?;
    for &rho in &a.rho {
        a.overrides.apply(rho, a.tol[0]).validate()?;
    }
    let mut rows: Vec<[String; 6]> = Vec::new();
    let mut all_converged = true;
    let row = |solver: &str, rho: Option<f64>, tol: f64, rep: &SolveReport| {
        [
            solver.to_string(),
            rho.map(|r| r.to_string()).unwrap_or_default(),
            format!("{tol:e}"),
            rep.outer_iterations().to_string(),
            rep.inner_total().to_string(),
            format!("{:.6}", rep.wall_time.as_secs_f64()),
        ]
    };
    for &tol in &a.tol {
        for &rho in &a.rho {
            let rep = solve(&problem, x0.clone(), &a.overrides.apply(rho, tol))?;
            summarize(&format!("pnt rho={rho} tol={tol:e}"), &rep);
            all_converged &= rep.status == SolveStatus::Converged;
            rows.push(row("pnt", Some(rho), tol, &rep));
        }
        let pgm_cfg = PgmConfig { step: a.pgm_step, tol, max_iter: a.pgm_max_iter };
        let rep = pgm_solve(&problem, x0.clone(), &pgm_cfg)?;
        summarize(&format!("pgm tol={tol:e}"), &rep);
        all_converged &= rep.status == SolveStatus::Converged;
        rows.push(row("pgm", None, tol, &rep));
    }

    let out = open_output(a.out.as_deref())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver", "rho", "tol", "outer", "inner_total", "time_s"])?;
    for r in &rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(if all_converged { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILURE) })
}

fn run_rates(a: RatesArgs) -> anyhow::Result<ExitCode> {
    let file = File::open(&a.trace).with_context(|| format!("cannot open {}", a.trace.display()))?;
    let residuals = read_trace_column(BufReader::new(file), &a.column)
        .with_context(|| format!("cannot read column {:?} of {}", a.column, a.trace.display()))?;
    let fit = match fit_convergence_order(&residuals) {
        Ok(fit) => fit,
        Err(e) => {
            eprintln!("no fit: {e}");
            return Ok(ExitCode::from(EXIT_FAILURE));
        }
    };
    println!(
        "p={:.4} r_squared={:.6} window={}..{} decades={:.2}",
        fit.order,
        fit.r_squared,
        fit.window.start,
        fit.window.end,
        fit.decades(&residuals)
    );
    if let Some(path) = &a.out {
        let id = a.trace.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write_report_csv(&[ReportRow::from_rate(&id, &fit)], open_output(Some(path))?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_check_props(a: CheckPropsArgs) -> anyhow::Result<ExitCode> {
    let known = problems::with_known_solution_set()?;
    if a.list {
        for bp in &known {
            println!("{}", bp.id);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let id = a.problem.as_deref().expect("clap requires --problem without --list");
    let Some(bp) = known.into_iter().find(|bp| bp.id == id) else {
        bail!("unknown problem {id:?}; see `pnt check-props --list`");
    };
    let desc = bp.solution_set.as_ref().expect("listed problems have a solution set");
    let scan = scan_proposition_bounds(&bp.problem, desc, a.samples, a.seed)?;
    let mut rows = ReportRow::from_scan(&bp.id, &scan);
    if let SolutionSetDescription::Ray { direction } = desc {
        let witness = luo_tseng_witness(direction, a.witness_steps)?;
        if let Some(last) = witness.last() {
            rows.push(ReportRow {
                problem_id: bp.id.clone(),
                bound_name: "luo_tseng_ratio".into(),
                max_ratio: Some(last.ratio),
                fitted_kappa: None,
                fitted_p: None,
                r_squared: None,
            });
        }
    }
    write_report_csv(&rows, open_output(a.out.as_deref())?)?;
    eprintln!(
        "{}: {} samples, {} hard-bound violations, fitted kappa {:.4}",
        bp.id,
        scan.samples,
        scan.hard_violations(),
        scan.fitted_kappa
    );
    Ok(if scan.hard_violations() == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILURE) })
}
