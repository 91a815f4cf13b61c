//! Run-mode orchestration: executes one configuration and writes the
//! artifacts into the output directory.

use crate::config::{RunConfig, RunMode};
use kochfem::fibers::{build_fibers, FiberParams};
use kochfem::geometry::build_domain;
use kochfem::io;
use kochfem::mesh::{triangulate_with, Mesh};
use kochfem::solver::{random_probes, solve_ppq, vi_residual, DiscreteSolution};
use kochfem::svg;
use kochfem::sweeps::{
    integrability_csv, integrability_diagnostic, limit_n_sweep, n_sweep, p_sweep, DomainFamily,
    NSweepOptions, PSweepOptions,
};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum RunError {
    /// Validation/config class: exit code 2.
    Config(String),
    /// Runtime class (solver failures, meshing failures, I/O): exit code 1.
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> String {
        match self {
            RunError::Config(m) | RunError::Runtime(m) => m.clone(),
        }
    }
}

fn rt(e: impl std::fmt::Display) -> RunError {
    RunError::Runtime(e.to_string())
}

#[derive(Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
}

fn write_file(
    dir: &Path,
    files: &mut Vec<String>,
    name: &str,
    content: &str,
) -> Result<(), RunError> {
    fs::write(dir.join(name), content).map_err(rt)?;
    files.push(name.to_string());
    Ok(())
}

/// Executes the configured mode. `seed` feeds only the randomized audits;
/// solutions never depend on it.
pub fn execute(config: &RunConfig, out_dir: &Path, seed: u64) -> Result<RunOutput, RunError> {
    fs::create_dir_all(out_dir).map_err(rt)?;
    let mut files = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(summary, "mode: {}", config.mode.label());
    let _ = writeln!(
        summary,
        "geometry: base={} alpha={} ",
        config.base_name,
        config.ifs.alpha()
    );

    let domain = build_domain(&config.base, config.level, &config.ifs)
        .map_err(|e| RunError::Config(e.to_string()))?;

    match config.mode {
        RunMode::GeometryOnly => {
            let _ = writeln!(
                summary,
                "domain: level={} segments={} area={:.12}",
                domain.level,
                domain.segment_count(),
                domain.area
            );
            write_file(out_dir, &mut files, "domain.svg", &svg::domain_svg(&domain))?;
            write_file(
                out_dir,
                &mut files,
                "vertices.txt",
                &io::write_vertices(&domain.boundary),
            )?;
            let fibers =
                build_fibers(&domain, FiberParams::default_for(config.ifs.theta())).map_err(rt)?;
            write_file(
                out_dir,
                &mut files,
                "fibers.svg",
                &svg::fibers_svg(&domain, &fibers),
            )?;
        }
        RunMode::Solve => {
            let started = std::time::Instant::now();
            let mesh = triangulate_with(&domain, config.mesh).map_err(rt)?;
            let mesh_time = started.elapsed().as_secs_f64();
            let started = std::time::Instant::now();
            let sol = solve_ppq(&config.instance, &mesh, &config.solver).map_err(rt)?;
            let solve_time = started.elapsed().as_secs_f64();
            if !sol.converged {
                // Keep partial artifacts, then fail.
                let _ = write_solution_artifacts(out_dir, &mut files, &mesh, &sol);
                return Err(RunError::Runtime(format!(
                    "solver did not converge: kkt residual {:.3e} after {} iterations",
                    sol.kkt_residual, sol.iterations
                )));
            }
            write_solution_artifacts(out_dir, &mut files, &mesh, &sol)?;
            let _ = writeln!(
                summary,
                "mesh: vertices={} triangles={} (built in {mesh_time:.3}s)",
                mesh.vertices.len(),
                mesh.triangles.len()
            );
            let _ = writeln!(
                summary,
                "solve: p={} q={} k={} energy={:.12e} kkt={:.3e} iterations={} max_grad={:.6} ({solve_time:.3}s)",
                config.instance.p,
                config.instance.q,
                config.instance.k,
                sol.energy,
                sol.kkt_residual,
                sol.iterations,
                sol.max_element_gradient
            );
            let _ = writeln!(
                summary,
                "active_sets: lower={} upper={} free={}",
                sol.active_sets.lower.len(),
                sol.active_sets.upper.len(),
                sol.active_sets.free_count
            );
            for note in &sol.notes {
                let _ = writeln!(summary, "note: {note}");
            }
            if config.vi_probes > 0 {
                let probes = random_probes(
                    &config.instance,
                    &mesh,
                    &sol.field,
                    0.2,
                    config.vi_probes,
                    seed,
                )
                .map_err(rt)?;
                let mut worst = f64::INFINITY;
                for probe in &probes {
                    worst = worst
                        .min(vi_residual(&config.instance, &mesh, &sol.field, probe).map_err(rt)?);
                }
                let _ = writeln!(
                    summary,
                    "vi_audit: probes={} seed={} min_residual={:.6e}",
                    config.vi_probes, seed, worst
                );
            }
            if !config.integrability_eps.is_empty() {
                let rows = integrability_diagnostic(
                    &config.instance,
                    &mesh,
                    &sol,
                    &config.integrability_eps,
                    &config.solver,
                )
                .map_err(rt)?;
                write_file(
                    out_dir,
                    &mut files,
                    "integrability.csv",
                    &integrability_csv(&rows),
                )?;
                for row in &rows {
                    let _ = writeln!(
                        summary,
                        "integrability: eps={} norms=[{:.6e}, {:.6e}, {:.6e}] stabilized={}",
                        row.eps, row.norms[0], row.norms[1], row.norms[2], row.stabilized
                    );
                }
            }
        }
        RunMode::PSweep => {
            let mesh = triangulate_with(&domain, config.mesh).map_err(rt)?;
            let opts = PSweepOptions {
                schedule: config.p_schedule.clone(),
                ..Default::default()
            };
            let out = p_sweep(&config.instance, &mesh, &opts, &config.solver).map_err(rt)?;
            write_file(out_dir, &mut files, "report.csv", &out.report.to_csv())?;
            let _ = write!(summary, "{}", out.report.summary());
            let final_sol = out.solutions.last().unwrap();
            write_file(
                out_dir,
                &mut files,
                "solution_final.txt",
                &io::write_solution(&mesh, &final_sol.field.values),
            )?;
            write_file(
                out_dir,
                &mut files,
                "solution_limit.txt",
                &io::write_solution(&mesh, &out.limit.field.values),
            )?;
            write_file(
                out_dir,
                &mut files,
                "solution_final.svg",
                &svg::heatmap_svg(&mesh, &final_sol.field.values),
            )?;
        }
        RunMode::NSweep => {
            let family = DomainFamily::new(config.base.clone(), config.ifs, config.levels.clone());
            let opts = NSweepOptions {
                mesh: config.mesh,
                grid_spacing: None,
                fiber_params: None,
            };
            let out = n_sweep(&config.instance, &family, &opts, &config.solver).map_err(rt)?;
            write_file(out_dir, &mut files, "report.csv", &out.report.to_csv())?;
            let _ = write!(summary, "{}", out.report.summary());
            let _ = writeln!(summary, "grid_spacing: {:.8}", out.grid_spacing);
            let _ = writeln!(summary, "interp_noise: {:.3e}", out.interp_noise);
            let mut pair_csv = String::from("level_low,level_high,lp,gradient_lp,w1p\n");
            for (w, (lp, gr, w1)) in family.levels.windows(2).zip(&out.pair_distances) {
                let _ = writeln!(
                    pair_csv,
                    "{},{},{:.12e},{:.12e},{:.12e}",
                    w[0], w[1], lp, gr, w1
                );
            }
            write_file(out_dir, &mut files, "pair_distances.csv", &pair_csv)?;
            let mut rec_csv = String::from(
                "level,feasible,matches_datum,energy_solution,energy_recovery,w1p_to_reference\n",
            );
            for rc in &out.recovery {
                let _ = writeln!(
                    rec_csv,
                    "{},{},{},{:.12e},{:.12e},{:.12e}",
                    rc.level,
                    rc.feasible,
                    rc.matches_datum_on_boundary,
                    rc.energy_solution,
                    rc.energy_recovery,
                    rc.w1p_to_reference
                );
            }
            write_file(out_dir, &mut files, "recovery.csv", &rec_csv)?;
            for run in &out.levels {
                write_file(
                    out_dir,
                    &mut files,
                    &format!("solution_n{}.txt", run.level),
                    &io::write_solution(&run.mesh, &run.solution.field.values),
                )?;
                write_file(
                    out_dir,
                    &mut files,
                    &format!("solution_n{}.svg", run.level),
                    &svg::heatmap_svg(&run.mesh, &run.solution.field.values),
                )?;
            }
        }
        RunMode::LimitSweep => {
            let family = DomainFamily::new(config.base.clone(), config.ifs, config.levels.clone());
            let opts = NSweepOptions {
                mesh: config.mesh,
                grid_spacing: None,
                fiber_params: None,
            };
            let out = limit_n_sweep(
                &config.instance,
                &family,
                config.limit_mode,
                &opts,
                &config.solver,
            )
            .map_err(rt)?;
            write_file(out_dir, &mut files, "report.csv", &out.report.to_csv())?;
            let _ = write!(summary, "{}", out.report.summary());
            for run in &out.levels {
                write_file(
                    out_dir,
                    &mut files,
                    &format!("solution_n{}.txt", run.level),
                    &io::write_solution(&run.mesh, &run.solution.field.values),
                )?;
            }
        }
    }

    write_file(out_dir, &mut files, "summary.txt", &summary)?;
    Ok(RunOutput {
        out_dir: out_dir.to_path_buf(),
        files,
        summary,
    })
}

fn write_solution_artifacts(
    out_dir: &Path,
    files: &mut Vec<String>,
    mesh: &Mesh,
    sol: &DiscreteSolution,
) -> Result<(), RunError> {
    write_file(out_dir, files, "mesh.txt", &io::write_mesh(mesh))?;
    write_file(
        out_dir,
        files,
        "solution.txt",
        &io::write_solution(mesh, &sol.field.values),
    )?;
    write_file(
        out_dir,
        files,
        "trace.csv",
        &io::write_trace_csv(&sol.trace),
    )?;
    write_file(
        out_dir,
        files,
        "solution.svg",
        &svg::heatmap_svg(mesh, &sol.field.values),
    )?;
    Ok(())
}

/// Convenience wrapper used by `main` and the tests: parse, validate the
/// mode-specific preconditions, run.
pub fn run_config_text(
    text: &str,
    out_override: Option<&Path>,
    seed: u64,
) -> Result<RunOutput, RunError> {
    let config = crate::config::parse_config(text).map_err(|e| RunError::Config(e.to_string()))?;
    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.out_dir));
    execute(&config, &out_dir, seed)
}

/// Writes the machine-readable error record next to the other artifacts.
pub fn write_error_record(out_dir: &Path, err: &RunError) {
    let _ = fs::create_dir_all(out_dir);
    let record = format!("error_kind: {}\nmessage: {}\n", err.kind(), err.message());
    let _ = fs::write(out_dir.join("error.txt"), record);
}
