//! Subcommand orchestration: every command is a pure function of its
//! configuration and writes its artifacts below an output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cavmix_core::dof::State;
use cavmix_core::mesh::{validate_mesh, LayerKind, MeshReport};
use cavmix_core::{generate_mesh, Mesh, MeshParams};

use crate::analysis::{
    bifurcation_csv, bifurcation_report, cavity_volumes, convergence_csv, det_error_norms,
    field_diff_norms, infsup_constant, infsup_system, num, rate_table, rates_csv, report_csv,
    BifurcationReport, BifurcationRow, ConvergenceRow, RateFit,
};
use crate::assembly::Problem;
use crate::config::{BcConfig, ExperimentConfig, Format};
use crate::continuation::{continuation_sweep, solve_affine, Branch};
use crate::error::{Error, Result};
use crate::io::{deformed_mesh, write_file, write_mesh, write_state, write_vtk};
use crate::linear::LinearSolver;
use crate::newton::{newton_solve, SolveTrace};

pub fn build_mesh(cfg: &ExperimentConfig, h: f64) -> Result<Mesh> {
    Ok(generate_mesh(
        &cfg.defects(),
        &cfg.mesh_params(h),
        &cfg.material()?,
    )?)
}

pub fn build_problem(cfg: &ExperimentConfig, h: f64) -> Result<Problem> {
    Problem::new(build_mesh(cfg, h)?, cfg.material()?)
}

fn tag(h: f64) -> String {
    format!("h{h}")
}

/// One ring region of one mesh, in the columns of the layer table.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerRow {
    pub h: f64,
    pub defect: usize,
    pub min_tau: f64,
    pub max_tau: f64,
    pub layers: usize,
    pub conforming: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub elements: usize,
    pub valid: bool,
}

pub const LAYER_HEADER: &str =
    "h,defect,min_tau,max_tau,layers,conforming,N_min,N_max,elements,valid";

pub fn layer_rows(mesh: &Mesh, h: f64, report: &MeshReport) -> Vec<LayerRow> {
    mesh.layers
        .iter()
        .enumerate()
        .map(|(k, ls)| {
            let taus = ls.iter().map(|l| l.thickness);
            LayerRow {
                h,
                defect: k,
                min_tau: taus.clone().fold(f64::INFINITY, f64::min),
                max_tau: taus.fold(0.0, f64::max),
                layers: ls.len(),
                conforming: ls
                    .iter()
                    .filter(|l| l.kind == LayerKind::Conforming)
                    .count(),
                n_min: ls.iter().map(|l| l.n).min().unwrap_or(0),
                n_max: ls.iter().map(|l| l.n).max().unwrap_or(0),
                elements: mesh.elements.len(),
                valid: report.valid(),
            }
        })
        .collect()
}

pub fn layers_csv(rows: &[LayerRow]) -> String {
    let mut s = format!("{LAYER_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            num(r.h),
            r.defect,
            num(r.min_tau),
            num(r.max_tau),
            r.layers,
            r.conforming,
            r.n_min,
            r.n_max,
            r.elements,
            r.valid
        );
    }
    s
}

/// Human-readable validation report of one mesh.
pub fn report_text(mesh: &Mesh, p: &MeshParams, r: &MeshReport) -> String {
    let mut s = String::new();
    let h = p.h;
    let _ = writeln!(
        s,
        "mesh h = {h}: {} nodes, {} elements",
        mesh.nodes.len(),
        mesh.elements.len()
    );
    let _ = writeln!(
        s,
        "constants: C = {}, C1 = {}, C2 = {}, alpha = {}, c_tau = {}, c_n = {}, max_aspect = {}",
        p.c, p.c1, p.c2, p.alpha, p.c_tau, p.c_n, p.max_aspect
    );
    let _ = writeln!(s, "valid: {}", r.valid());
    let _ = writeln!(s, "min det DF: {:e}", r.min_det);
    let _ = writeln!(
        s,
        "h_T/h range: [{:.4}, {:.4}]",
        r.h_ratio_min, r.h_ratio_max
    );
    let _ = writeln!(s, "inverted elements: {:?}", r.inverted);
    let _ = writeln!(s, "open edges: {}", r.open_edges.len());
    let _ = writeln!(
        s,
        "mismatched edges (hanging nodes): {}",
        r.mismatched_edges.len()
    );
    for (k, ls) in r.layers.iter().enumerate() {
        let failed: Vec<usize> = (0..ls.len()).filter(|&m| !ls[m].ok()).collect();
        let _ = writeln!(
            s,
            "defect {k}: {} layers, failing conditions on layers {failed:?}",
            ls.len()
        );
    }
    for (k, m) in r.flagged_layers() {
        let _ = writeln!(
            s,
            "note: defect {k} layer {m} is clipped to end at delta; its thickness bounds are advisory"
        );
    }
    s
}

pub fn cmd_mesh(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<LayerRow>> {
    let mut rows = Vec::new();
    let mat = cfg.material()?;
    for h in cfg.h_list() {
        let mesh = build_mesh(cfg, h)?;
        let params = cfg.mesh_params(h);
        let report = validate_mesh(&mesh, &params, &mat);
        rows.extend(layer_rows(&mesh, h, &report));
        write_file(
            &out.join(format!("validation_{}.txt", tag(h))),
            &report_text(&mesh, &params, &report),
        )?;
        if cfg.wants(Format::Mesh) {
            write_file(
                &out.join(format!("mesh_{}.txt", tag(h))),
                &write_mesh(&mesh),
            )?;
        }
        if cfg.wants(Format::Vtk) {
            write_file(
                &out.join(format!("mesh_{}.vtk", tag(h))),
                &write_vtk(&mesh, None),
            )?;
        }
        if !report.valid() {
            write_file(&out.join("layers.csv"), &layers_csv(&rows))?;
            return Err(Error::Core(cavmix_core::CoreError::Geometry(format!(
                "mesh h = {h} failed validation, see validation_{}.txt",
                tag(h)
            ))));
        }
    }
    write_file(&out.join("layers.csv"), &layers_csv(&rows))?;
    Ok(rows)
}

/// Solves the configured boundary value problem: affine data by load
/// continuation from the identity, stretch data on the configured branch.
pub fn solve_problem(
    cfg: &ExperimentConfig,
    problem: &mut Problem,
    solver: &mut LinearSolver,
) -> Result<(State, SolveTrace)> {
    match cfg.bc {
        BcConfig::Stretch { lambda } if (lambda - 1.0).abs() < f64::EPSILON => {
            let s0 = State::identity(
                &problem.mesh,
                &problem.dofs,
                crate::continuation::INITIAL_PRESSURE,
            );
            newton_solve(problem, s0, &cfg.newton, solver)
        }
        BcConfig::Stretch { lambda } => {
            let lambdas = [lambda];
            let res = continuation_sweep(
                problem,
                &lambdas,
                cfg.run.branch,
                &cfg.sweep_config(),
                &cfg.newton,
                solver,
            )?;
            if let Some((l, reason)) = res.failure {
                return Err(Error::NonConvergence {
                    reason: format!("λ = {l} not reached: {reason}"),
                    trace: Box::new(
                        res.points
                            .last()
                            .map(|p| p.trace.clone())
                            .unwrap_or_default(),
                    ),
                });
            }
            let mut trace = SolveTrace::default();
            for p in &res.points {
                trace.extend(&p.trace);
            }
            let last = res
                .points
                .into_iter()
                .last()
                .ok_or_else(|| Error::Config("empty λ list".into()))?;
            Ok((last.state, trace))
        }
        BcConfig::Affine { .. } => solve_affine(
            problem,
            cfg.boundary(),
            &cfg.continuation,
            &cfg.newton,
            solver,
        ),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveSummary {
    pub h: f64,
    pub energy: f64,
    pub det_err_l1: f64,
    pub det_err_l2: f64,
    pub max_constraint: f64,
    pub volumes: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub min_det: f64,
}

fn summary_csv(s: &SolveSummary) -> String {
    let mut out = String::from("key,value\n");
    let _ = writeln!(out, "h,{}", num(s.h));
    let _ = writeln!(out, "energy,{}", num(s.energy));
    let _ = writeln!(out, "det_err_L1,{}", num(s.det_err_l1));
    let _ = writeln!(out, "det_err_L2,{}", num(s.det_err_l2));
    let _ = writeln!(out, "max_constraint,{}", num(s.max_constraint));
    for (k, v) in s.volumes.iter().enumerate() {
        let _ = writeln!(out, "volume_{k},{}", num(*v));
    }
    let _ = writeln!(out, "newton_rows,{}", s.iterations);
    let _ = writeln!(out, "final_residual,{}", num(s.final_residual));
    let _ = writeln!(out, "min_det,{}", num(s.min_det));
    out
}

pub fn summarize(problem: &Problem, h: f64, s: &State, trace: &SolveTrace) -> Result<SolveSummary> {
    let (l1, l2) = det_error_norms(problem, s);
    Ok(SolveSummary {
        h,
        energy: problem.energy(s)?,
        det_err_l1: l1,
        det_err_l2: l2,
        max_constraint: problem.residual(s)?.max_constraint(),
        volumes: cavity_volumes(problem, s),
        iterations: trace.rows.len(),
        final_residual: trace.final_residual(),
        min_det: trace
            .rows
            .iter()
            .map(|r| r.min_det)
            .fold(f64::INFINITY, f64::min),
    })
}

fn write_solution(
    cfg: &ExperimentConfig,
    out: &Path,
    stem: &str,
    problem: &Problem,
    s: &State,
) -> Result<()> {
    if cfg.wants(Format::State) {
        write_file(&out.join(format!("state_{stem}.txt")), &write_state(s))?;
    }
    if cfg.wants(Format::Mesh) {
        write_file(
            &out.join(format!("mesh_{stem}.txt")),
            &write_mesh(&problem.mesh),
        )?;
        write_file(
            &out.join(format!("deformed_{stem}.txt")),
            &write_mesh(&deformed_mesh(&problem.mesh, s)),
        )?;
    }
    if cfg.wants(Format::Vtk) {
        write_file(
            &out.join(format!("deformed_{stem}.vtk")),
            &write_vtk(&problem.mesh, Some(s)),
        )?;
    }
    Ok(())
}

pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<SolveSummary> {
    let h = cfg.mesh.h;
    let mut problem = build_problem(cfg, h)?;
    let mut solver = LinearSolver::new();
    match solve_problem(cfg, &mut problem, &mut solver) {
        Ok((s, trace)) => {
            write_file(&out.join("trace.csv"), &trace.to_csv())?;
            problem.cavity_pressure.iter_mut().for_each(|p| *p = 0.0);
            let summary = summarize(&problem, h, &s, &trace)?;
            write_file(&out.join("summary.csv"), &summary_csv(&summary))?;
            write_solution(cfg, out, &tag(h), &problem, &s)?;
            Ok(summary)
        }
        Err(e) => {
            if let Error::NonConvergence { trace, .. } = &e {
                write_file(&out.join("trace.csv"), &trace.to_csv())?;
            }
            Err(e)
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvergeOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<RateFit>,
    pub traces: Vec<(f64, SolveTrace)>,
    /// Largest constraint residual of each solved level.
    pub constraints: Vec<(f64, f64)>,
    pub failures: Vec<(f64, String)>,
}

/// Solves across the `h` list, then measures every solution against the finest.
pub fn run_converge(cfg: &ExperimentConfig) -> Result<ConvergeOutcome> {
    let hs = cfg.h_list();
    if hs.len() < 3 {
        return Err(Error::Config(format!(
            "convergence study needs at least 3 mesh sizes, got {}",
            hs.len()
        )));
    }
    let mut solved: Vec<(f64, Problem, State)> = Vec::new();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for &h in &hs {
        let mut problem = build_problem(cfg, h)?;
        let mut solver = LinearSolver::new();
        match solve_problem(cfg, &mut problem, &mut solver) {
            Ok((s, tr)) => {
                problem.cavity_pressure.iter_mut().for_each(|p| *p = 0.0);
                traces.push((h, tr));
                solved.push((h, problem, s));
            }
            Err(e @ (Error::NonConvergence { .. } | Error::Linear(_))) => {
                if let Error::NonConvergence { trace, .. } = &e {
                    traces.push((h, (**trace).clone()));
                }
                failures.push((h, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    let Some((_, fine, sf)) = solved.last() else {
        return Ok(ConvergeOutcome {
            rows: Vec::new(),
            fits: Vec::new(),
            traces,
            constraints: Vec::new(),
            failures,
        });
    };
    let mut rows = Vec::with_capacity(solved.len());
    let mut constraints = Vec::with_capacity(solved.len());
    for (i, (h, problem, s)) in solved.iter().enumerate() {
        constraints.push((*h, problem.residual(s)?.max_constraint()));
        let (l1, l2) = det_error_norms(problem, s);
        let (w, p) = if i + 1 == solved.len() {
            (f64::NAN, f64::NAN)
        } else {
            field_diff_norms(problem, s, fine, sf)?
        };
        let beta = infsup_constant(&infsup_system(problem, s)?, &mut LinearSolver::new())
            .unwrap_or(f64::NAN);
        rows.push(ConvergenceRow {
            h: *h,
            energy: problem.energy(s)?,
            det_err_l2: l2,
            det_err_l1: l1,
            w1s_diff_to_finest: w,
            p_diff_to_finest: p,
            infsup_beta: beta,
        });
    }
    let fits = if rows.len() >= 2 {
        rate_table(&rows)?
    } else {
        Vec::new()
    };
    Ok(ConvergeOutcome {
        rows,
        fits,
        traces,
        constraints,
        failures,
    })
}

pub fn cmd_converge(cfg: &ExperimentConfig, out: &Path) -> Result<ConvergeOutcome> {
    let o = run_converge(cfg)?;
    write_file(&out.join("convergence.csv"), &convergence_csv(&o.rows))?;
    write_file(&out.join("rates.csv"), &rates_csv(&o.fits))?;
    for (h, tr) in &o.traces {
        write_file(&out.join(format!("trace_{}.csv", tag(*h))), &tr.to_csv())?;
    }
    write_file(&out.join("failures.csv"), &failures_csv(&o.failures))?;
    if !o.failures.is_empty() {
        let (h, reason) = &o.failures[0];
        return Err(Error::NonConvergence {
            reason: format!("h = {h}: {reason} (partial table written)"),
            trace: Box::default(),
        });
    }
    Ok(o)
}

fn failures_csv(f: &[(f64, String)]) -> String {
    let mut s = String::from("parameter,reason\n");
    for (x, r) in f {
        let _ = writeln!(s, "{},\"{}\"", num(*x), r.replace('"', "'"));
    }
    s
}

#[derive(Clone, Debug)]
pub struct BranchRun {
    pub branch: Branch,
    pub points: Vec<(f64, State, SolveTrace)>,
    pub failure: Option<(f64, String)>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub problem: Problem,
    pub rows: Vec<BifurcationRow>,
    pub report: BifurcationReport,
    pub runs: Vec<BranchRun>,
}

/// Runs every configured branch over the λ grid on one mesh.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    if cfg.run.lambdas.is_empty() {
        return Err(Error::Config("sweep needs a λ list".into()));
    }
    let mut problem = build_problem(cfg, cfg.mesh.h)?;
    let mut solver = LinearSolver::new();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &branch in &cfg.run.branches {
        let res = continuation_sweep(
            &mut problem,
            &cfg.run.lambdas,
            branch,
            &cfg.sweep_config(),
            &cfg.newton,
            &mut solver,
        );
        problem.cavity_pressure.iter_mut().for_each(|p| *p = 0.0);
        let res = match res {
            Ok(r) => r,
            Err(e @ (Error::NonConvergence { .. } | Error::Linear(_))) => {
                runs.push(BranchRun {
                    branch,
                    points: Vec::new(),
                    failure: Some((cfg.run.lambdas[0], e.to_string())),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut points = Vec::with_capacity(res.points.len());
        for p in res.points {
            let v = cavity_volumes(&problem, &p.state);
            if v.len() < 2 {
                return Err(Error::Config("sweep requires two defects".into()));
            }
            rows.push(BifurcationRow {
                lambda: p.lambda,
                branch,
                energy: problem.energy(&p.state)?,
                v1: v[0],
                v2: v[1],
            });
            points.push((p.lambda, p.state, p.trace));
        }
        runs.push(BranchRun {
            branch,
            points,
            failure: res.failure,
        });
    }
    let report = bifurcation_report(&rows, &cfg.run.bifurcation);
    Ok(SweepOutcome {
        problem,
        rows,
        report,
        runs,
    })
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepOutcome> {
    let o = run_sweep(cfg)?;
    write_file(&out.join("bifurcation.csv"), &bifurcation_csv(&o.rows))?;
    write_file(&out.join("branches.csv"), &report_csv(&o.report))?;
    let mut lc = String::from("key,value\n");
    let _ = writeln!(
        lc,
        "lambda_c,{}",
        o.report.lambda_c.map_or("NaN".into(), num)
    );
    for n in &o.report.notes {
        let _ = writeln!(lc, "note,\"{n}\"");
    }
    write_file(&out.join("lambda_c.csv"), &lc)?;
    let mut failures = Vec::new();
    for run in &o.runs {
        let mut s = String::from("lambda,iteration,residual,alpha,min_det,energy\n");
        for (l, _, tr) in &run.points {
            for r in &tr.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    num(*l),
                    r.iteration,
                    num(r.residual),
                    num(r.alpha),
                    num(r.min_det),
                    num(r.energy)
                );
            }
        }
        write_file(&out.join(format!("trace_{}.csv", run.branch.name())), &s)?;
        if let Some((l, reason)) = &run.failure {
            failures.push((*l, format!("{}: {reason}", run.branch.name())));
        }
        for (l, st, _) in &run.points {
            let stem = format!("{}_lambda{l}", run.branch.name());
            write_solution(cfg, out, &stem, &o.problem, st)?;
        }
    }
    write_file(&out.join("failures.csv"), &failures_csv(&failures))?;
    Ok(o)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfSupRow {
    pub h: f64,
    pub n_p: usize,
    pub beta_identity: f64,
    /// NaN unless `run.infsup_at_solution`.
    pub beta_solution: f64,
    /// Eigensolve or solve failure of this row; the betas are then NaN.
    pub error: Option<String>,
}

fn recoverable(e: Error) -> Result<String> {
    match e {
        Error::Linear(_) | Error::Analysis(_) | Error::NonConvergence { .. } => Ok(e.to_string()),
        e => Err(e),
    }
}

pub fn run_infsup(cfg: &ExperimentConfig) -> Result<Vec<InfSupRow>> {
    let mut rows = Vec::new();
    for h in cfg.h_list() {
        let mut problem = build_problem(cfg, h)?;
        let mut solver = LinearSolver::new();
        let id = State::identity(
            &problem.mesh,
            &problem.dofs,
            crate::continuation::INITIAL_PRESSURE,
        );
        let sys = infsup_system(&problem, &id)?;
        let mut row = InfSupRow {
            h,
            n_p: sys.mass.n(),
            beta_identity: f64::NAN,
            beta_solution: f64::NAN,
            error: None,
        };
        match infsup_constant(&sys, &mut solver) {
            Ok(b) => row.beta_identity = b,
            Err(e) => row.error = Some(recoverable(e)?),
        }
        if cfg.run.infsup_at_solution && row.error.is_none() {
            let beta = solve_problem(cfg, &mut problem, &mut solver)
                .and_then(|(s, _)| infsup_constant(&infsup_system(&problem, &s)?, &mut solver));
            match beta {
                Ok(b) => row.beta_solution = b,
                Err(e) => row.error = Some(recoverable(e)?),
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn infsup_csv(rows: &[InfSupRow]) -> String {
    let mut s = String::from("h,n_p,beta_identity,beta_solution,error\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace('"', "'");
        let _ = writeln!(
            s,
            "{},{},{},{},\"{err}\"",
            num(r.h),
            r.n_p,
            num(r.beta_identity),
            num(r.beta_solution)
        );
    }
    s
}

pub fn cmd_infsup(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<InfSupRow>> {
    let rows = run_infsup(cfg)?;
    write_file(&out.join("infsup.csv"), &infsup_csv(&rows))?;
    Ok(rows)
}

/// Output directory: the flag, else `CAVMIX_OUT`, else the config.
pub fn output_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os("CAVMIX_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}
