//! Run-config parsing and the experiment driver behind the `dmalab` binary.
//!
//! [`run`] executes one job and writes its files into the output directory:
//! `<command>.report.json`, plot-ready `*.csv` tables, a text summary, and
//! last `run-manifest.json` listing everything written. Exit codes: 0 when
//! the experiment passes, 1 when a theory check fails, 2 on software errors.

mod config;

pub use config::{parse_config, parse_config_with, BarrierBlock, Command, ExperimentBlock, RunConfig, SolverBlock, DEFAULT_OUT};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::barriers::{
    certify_subsolution, certify_supersolution, compare_to_solution, search_constants, Barrier, Comparison, Region, Sense,
};
use crate::domain::GridOptions;
use crate::masolve::{solve, ProblemSpec, Solution, SolverOptions, Stencil};
use crate::sections::{sweep_csv, SectionOptions};
use crate::verify::{liouville_residual, localization_experiment, maximal_section_experiment, ScalingReport};
use crate::{Error, Result};

pub const MANIFEST: &str = "run-manifest.json";

/// Exit status and the lines printed for the user.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub code: i32,
    pub lines: Vec<String>,
    pub files: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn prepare(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let probe = dir.join(".dmalab-write-probe");
        fs::write(&probe, b"")?;
        fs::remove_file(&probe)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

struct JobResult {
    pass: bool,
    lines: Vec<String>,
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Runs the configured job; never panics on bad input, maps every failure to
/// an exit code.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    let mut out = match Outputs::prepare(&cfg.out_dir) {
        Ok(o) => o,
        Err(e) => {
            return RunOutcome {
                code: 2,
                lines: vec![format!("error: output directory {} is not writable: {e}", cfg.out_dir.display())],
                files: Vec::new(),
            }
        }
    };
    let cmd = cfg.command.name();
    let (code, mut lines, error) = match dispatch(cfg, &mut out) {
        Ok(job) => (if job.pass { 0 } else { 1 }, job.lines, None),
        Err(e) => {
            let mut lines = Vec::new();
            if let Error::Divergence { residual_history } = &e {
                let name = format!("{cmd}.residual-history.json");
                match out.json(&name, residual_history) {
                    Ok(()) => lines.push(format!("residual history written to {}", out.dir.join(&name).display())),
                    Err(w) => lines.push(format!("could not write the residual history: {w}")),
                }
            }
            lines.insert(0, format!("error: {e}"));
            (2, lines, Some(e.to_string()))
        }
    };
    let mut summary = lines.join("\n");
    summary.push('\n');
    if let Err(e) = out.write(&format!("{cmd}.summary.txt"), &summary) {
        lines.push(format!("error: could not write the summary: {e}"));
        return RunOutcome { code: 2, lines, files: out.files };
    }
    let status = match code {
        0 => "pass",
        1 => "fail",
        _ => "error",
    };
    let manifest = json!({
        "tool": "dmalab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd,
        "status": status,
        "exit_code": code,
        "error": error,
        "files": out.files.clone(),
    });
    let files = out.files.clone();
    if let Err(e) = out.json(MANIFEST, &manifest) {
        lines.push(format!("error: could not write the manifest: {e}"));
        return RunOutcome { code: 2, lines, files };
    }
    RunOutcome { code, lines, files: out.files }
}

fn dispatch(cfg: &RunConfig, out: &mut Outputs) -> Result<JobResult> {
    match cfg.command {
        Command::Solve => run_solve(cfg, out),
        Command::Sections | Command::Scaling => run_sections(cfg, out),
        Command::Barriers => run_barriers(cfg, out),
        Command::Liouville => run_liouville(cfg, out),
        Command::Maxsection => run_maxsection(cfg, out),
    }
}

fn need<'a, T>(x: &'a Option<T>, what: &str) -> Result<&'a T> {
    x.as_ref().ok_or_else(|| Error::Argument(format!("the config has no {what}")))
}

pub fn solver_options(s: &SolverBlock) -> SolverOptions {
    SolverOptions {
        tol: s.tol,
        max_iter: s.max_iter,
        damping: s.damping,
        rhs: s.rhs,
        grid: GridOptions { exec: s.exec, ..GridOptions::default() },
        exec: s.exec,
        ..SolverOptions::default()
    }
}

fn solve_configured(problem: &ProblemSpec, s: &SolverBlock) -> Result<Solution> {
    let stencil = Stencil::new(problem.domain.dim, s.stencil_width)?;
    solve(problem, s.spacing, &stencil, &solver_options(s))
}

fn run_solve(cfg: &RunConfig, out: &mut Outputs) -> Result<JobResult> {
    let problem = need(&cfg.problem, "[problem]")?;
    let s = need(&cfg.solver, "[solver]")?;
    let sol = solve_configured(problem, s)?;
    let pass = sol.residual <= s.tol;
    out.write("solution.csv", &sol.u.to_csv())?;
    let report = json!({
        "alpha": problem.alpha,
        "spacing": s.spacing,
        "stencil_width": s.stencil_width,
        "nodes": sol.u.values.len(),
        "residual": sol.residual,
        "tol": s.tol,
        "iterations": sol.log.records.len(),
        "damped_steps": sol.log.damped_steps(),
        "min_second_difference": sol.u.min_second_difference(),
        "log": sol.log,
        "pass": pass,
    });
    out.json("solve.report.json", &report)?;
    Ok(JobResult {
        pass,
        lines: vec![format!(
            "solve: {} nodes, residual {:.3e} after {} Newton steps  {}",
            sol.u.values.len(),
            sol.residual,
            sol.log.records.len(),
            verdict(pass)
        )],
    })
}

fn section_options(cfg: &RunConfig) -> SectionOptions {
    SectionOptions { slope: cfg.experiment.slope, min_normal_nodes: cfg.experiment.min_normal_nodes }
}

fn base_point(cfg: &RunConfig, dim: usize) -> Result<Vec<f64>> {
    match &cfg.experiment.base_point {
        Some(p) if p.len() != dim => Err(Error::Argument(format!("base_point has {} coordinates, expected {dim}", p.len()))),
        Some(p) => Ok(p.clone()),
        None => Ok(vec![0.0; dim]),
    }
}

fn rescore(r: &ScalingReport, tol: f64) -> ScalingReport {
    ScalingReport::new(&r.quantity, r.pairs.clone(), r.predicted, tol)
}

fn run_sections(cfg: &RunConfig, out: &mut Outputs) -> Result<JobResult> {
    let problem = need(&cfg.problem, "[problem]")?;
    let s = need(&cfg.solver, "[solver]")?;
    let sol = solve_configured(problem, s)?;
    let dim = problem.domain.dim;
    let x0 = base_point(cfg, dim)?;
    let mut rep =
        localization_experiment(&sol.u, &problem.boundary, &x0, &cfg.experiment.heights, problem.alpha, &section_options(cfg))?;
    rep.tangential = rescore(&rep.tangential, cfg.experiment.slope_tol);
    rep.normal = rescore(&rep.normal, cfg.experiment.slope_tol);
    let cmd = cfg.command.name();
    out.write(&format!("{cmd}.sweep.csv"), &sweep_csv(&rep.rows, dim))?;
    let mut lines = Vec::new();
    let pass = if cfg.command == Command::Scaling {
        out.write("tangential.csv", &rep.tangential.to_csv())?;
        out.write("normal.csv", &rep.normal.to_csv())?;
        lines.push(rep.tangential.summary());
        lines.push(rep.normal.summary());
        rep.pass()
    } else {
        lines.push(format!(
            "sections: {} heights used, {} excluded, b(h) two-sided bound {}",
            rep.rows.len(),
            rep.excluded.len(),
            verdict(rep.b_bounds_hold)
        ));
        rep.b_bounds_hold
    };
    out.json(&format!("{cmd}.report.json"), &json!({ "report": rep, "residual": sol.residual, "pass": pass }))?;
    Ok(JobResult { pass, lines })
}

fn run_maxsection(cfg: &RunConfig, out: &mut Outputs) -> Result<JobResult> {
    let problem = need(&cfg.problem, "[problem]")?;
    let s = need(&cfg.solver, "[solver]")?;
    let sol = solve_configured(problem, s)?;
    let distances: Vec<f64> = match &cfg.experiment.distances {
        Some(d) => d.clone(),
        None => cfg.experiment.distance_cells.iter().map(|k| k * s.spacing).collect(),
    };
    let mut rep = maximal_section_experiment(&sol.u, &problem.boundary, problem.alpha, &distances)?;
    rep.m_exponent = rep.m_exponent.as_ref().map(|r| rescore(r, cfg.experiment.slope_tol));
    rep.d_exponent = rep.d_exponent.as_ref().map(|r| rescore(r, cfg.experiment.slope_tol));
    let mut csv = String::from("d,hbar,m,tangential_gradient_gap,box_c,box_cc\n");
    for p in &rep.points {
        let _ = writeln!(
            csv,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.d, p.hbar, p.m, p.tangential_gradient_gap, p.box_c, p.box_cc
        );
    }
    out.write("maxsection.sweep.csv", &csv)?;
    let pass = rep.pass();
    let mut lines = Vec::new();
    if let (Some(m), Some(d)) = (&rep.m_exponent, &rep.d_exponent) {
        lines.push(m.summary());
        lines.push(d.summary());
    }
    if let Some(l) = &rep.log_law {
        lines.push(format!("|M|^n vs -log h: {} pairs, increasing {}", l.pairs.len(), l.increasing));
    }
    lines.push(format!(
        "maxsection: {} points, {} excluded, max tangential gradient gap {:.3} cells  {}",
        rep.points.len(),
        rep.excluded.len(),
        rep.max_tangential_gradient_gap,
        verdict(pass)
    ));
    out.json("maxsection.report.json", &json!({ "report": rep, "residual": sol.residual, "pass": pass }))?;
    Ok(JobResult { pass, lines })
}

fn run_liouville(cfg: &RunConfig, out: &mut Outputs) -> Result<JobResult> {
    let s = need(&cfg.solver, "[solver]")?;
    let band = cfg.experiment.band;
    let coarse = liouville_residual(cfg.alpha, s.spacing, band)?;
    let fine = liouville_residual(cfg.alpha, s.spacing / 2.0, band)?;
    let order = (coarse.residual / fine.residual).log2();
    let pass = coarse.residual <= cfg.experiment.residual_tol && order >= 1.0;
    out.json(
        "liouville.report.json",
        &json!({ "coarse": coarse, "fine": fine, "order": order, "residual_tol": cfg.experiment.residual_tol, "pass": pass }),
    )?;
    Ok(JobResult {
        pass,
        lines: vec![format!(
            "liouville: residual {:.3e} at spacing {}, {:.3e} at half, order {:.3}  {}",
            coarse.residual,
            s.spacing,
            fine.residual,
            order,
            verdict(pass)
        )],
    })
}

fn constant(b: &BarrierBlock, key: &str, default: f64) -> f64 {
    b.constants.get(key).copied().unwrap_or(default)
}

/// The barrier described by the `[experiment]` block, anchored at the
/// boundary point 0 with the data's value and tangential gradient there.
pub fn build_barrier(b: &BarrierBlock, problem: &ProblemSpec) -> Result<Barrier> {
    let d = &problem.domain;
    let n = d.dim;
    let a = problem.alpha;
    let origin = vec![0.0; n];
    let phi0 = problem.boundary.eval(&origin);
    let grad0: Vec<f64> = problem.boundary.grad(&origin)[..n - 1].to_vec();
    let big_lambda = problem.scale_bounds().1;
    let c = |k, v| constant(b, k, v);
    match b.family.as_str() {
        "U0" => Barrier::u0(a, n),
        "V0" => Barrier::v0(d, a, c("mu", 0.5), c("big_lambda", big_lambda)),
        "VSTAR" => Barrier::vstar(d, a, c("mu", 0.5), c("big_lambda", big_lambda), c("c_star", 0.5), c("big_c", 1.0)),
        "POINTED_W" => Barrier::pointed_w(a, n, c("big_lambda", big_lambda), c("eps", 0.1), c("h", 0.1), c("c1", 1.0)),
        "VPLUS" => Barrier::vplus(d, a, phi0, grad0, c("c1", 1.0), c("big_c", 1.0)),
        "VMINUS" => Barrier::vminus(d, a, phi0, grad0, c("c0", 1.0), c("c1", 1.0)),
        "LOG_ALPHA1" => Barrier::log_alpha1(d, b.lower, phi0, grad0, c("c", 1.0), c("k", 1.0)),
        "PLANE_SHIFT" => {
            let mut slope = grad0;
            slope.push(0.0);
            Barrier::plane_shift(n, c("offset", 0.0), slope)
        }
        other => Err(Error::Argument(format!("unknown barrier family {other}"))),
    }
}

fn is_subsolution(b: &BarrierBlock) -> bool {
    b.subsolution.unwrap_or(match b.family.as_str() {
        "VPLUS" => false,
        "LOG_ALPHA1" => b.lower,
        _ => true,
    })
}

fn run_barriers(cfg: &RunConfig, out: &mut Outputs) -> Result<JobResult> {
    let problem = need(&cfg.problem, "[problem]")?;
    let spec = need(&cfg.experiment.barrier, "barrier family")?;
    let template = build_barrier(spec, problem)?;
    let mut region = Region::new(spec.cut.unwrap_or(problem.domain.rho)).with_samples(spec.samples);
    if let Some(bound) = spec.cut_bound {
        region = region.with_cut_bound(bound);
    }
    let sub = is_subsolution(spec);
    let searchable = matches!(spec.family.as_str(), "V0" | "VSTAR" | "VPLUS" | "VMINUS" | "LOG_ALPHA1");
    let mut lines = Vec::new();
    let (barrier, certificate, steps) = if spec.search && searchable {
        match search_constants(&template, problem, &region) {
            Ok(o) => (o.barrier, o.certificate, Some(o.steps)),
            Err(Error::Range(m)) => {
                lines.push(format!("barriers: {} constant search failed: {m}  FAIL", spec.family));
                out.json("barriers.report.json", &json!({ "family": spec.family, "search_error": m, "pass": false }))?;
                return Ok(JobResult { pass: false, lines });
            }
            Err(e) => return Err(e),
        }
    } else {
        let cert = if sub {
            certify_subsolution(&template, problem, &region)
        } else {
            certify_supersolution(&template, problem, &region)
        };
        match cert {
            Ok(c) => (template, c, None),
            Err(Error::Range(m)) => {
                lines.push(format!("barriers: {} is not admissible: {m}  FAIL", spec.family));
                out.json("barriers.report.json", &json!({ "family": spec.family, "range_error": m, "pass": false }))?;
                return Ok(JobResult { pass: false, lines });
            }
            Err(e) => return Err(e),
        }
    };
    lines.push(format!(
        "barriers: {} {:?} worst margin {:.3e} at {:?} over {} samples  {}",
        certificate.family,
        certificate.inequality,
        certificate.worst_margin,
        certificate.witness,
        certificate.samples,
        verdict(certificate.pass)
    ));
    let mut comparison: Option<Comparison> = None;
    if spec.compare {
        let s = need(&cfg.solver, "[solver] for the ordering check")?;
        let sol = solve_configured(problem, s)?;
        let sense = if certificate.inequality == crate::barriers::Inequality::Subsolution { Sense::Lower } else { Sense::Upper };
        let c = compare_to_solution(&barrier, &sol.u, certificate.region.cut, sense)?;
        lines.push(format!(
            "ordering: {} {:?} solution over {} nodes, worst gap {:.3e}  {}",
            c.field,
            c.sense,
            c.nodes,
            c.worst_margin,
            verdict(c.pass)
        ));
        comparison = Some(c);
    }
    let pass = certificate.pass && comparison.as_ref().is_none_or(|c| c.pass);
    out.json(
        "barriers.report.json",
        &json!({ "certificate": certificate, "search": steps, "comparison": comparison, "pass": pass }),
    )?;
    Ok(JobResult { pass, lines })
}
