//! Sweep harnesses: solution families along the exponent p and along the
//! pre-fractal level n, with the comparison norms, recovery fields and the
//! higher-integrability diagnostic.

use crate::error::SolverError;
use crate::fem::{interpolate, DiscreteField, ElementData, EnergyModel, ProblemInstance};
use crate::fibers::{build_fibers, recovery_sequence, FiberParams};
use crate::geometry::{build_domain, IfsParams, PrefractalDomain};
use crate::grid::{grid_distance, grid_sup_distance, EvalGrid, ExtendedField, MeshField};
use crate::mesh::{prolong, refine_with_map, triangulate_with, Mesh, MeshOptions};
use crate::point::Point2;
use crate::solver::{
    solve_limit_q, solve_lipschitz, solve_ppq_from, DiscreteSolution, LimitConstraint, SolverConfig,
};
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Exponent,
    Level,
}

impl SweepAxis {
    fn label(self) -> &'static str {
        match self {
            SweepAxis::Exponent => "p",
            SweepAxis::Level => "n",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub param: f64,
    pub energy: f64,
    /// Sup-norm distance to the previous sweep point (NaN on the first).
    pub sup_diff_prev: f64,
    /// Sup-norm distance to the final/limit solution (NaN when unset).
    pub sup_diff_final: f64,
    /// Discrete L^t norm of the solution gradient.
    pub w1t_seminorm: f64,
    pub max_element_gradient: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Gradient bound M = max(1, sqrt(L^2 + k^2)) of the limit problems.
    pub limit_bound: f64,
    pub notes: Vec<String>,
}

impl SweepReport {
    /// Deterministic CSV: fixed header, fixed float format, no timing
    /// column (runtimes go to the summary).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "param,energy,sup_diff_prev,sup_diff_final,w1t_seminorm,max_element_gradient,iterations,converged\n",
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
                p.param,
                p.energy,
                p.sup_diff_prev,
                p.sup_diff_final,
                p.w1t_seminorm,
                p.max_element_gradient,
                p.iterations,
                p.converged
            );
        }
        out
    }

    /// Key:value summary blocks, including wall-clock times.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "axis: {}", self.axis.label());
        let _ = writeln!(out, "limit_bound: {:.12e}", self.limit_bound);
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        for p in &self.points {
            let _ = writeln!(
                out,
                "point: {}={} energy={:.12e} sup_diff_prev={:.3e} sup_diff_final={:.3e} max_grad={:.6} iters={} converged={} runtime_s={:.3}{}",
                self.axis.label(),
                p.param,
                p.energy,
                p.sup_diff_prev,
                p.sup_diff_final,
                p.max_element_gradient,
                p.iterations,
                p.converged,
                p.runtime_s,
                if p.flags.is_empty() {
                    String::new()
                } else {
                    format!(" flags={}", p.flags.join("|"))
                }
            );
        }
        out
    }
}

pub struct PSweepOptions {
    pub schedule: Vec<f64>,
    /// Exponent of the reported gradient norm ||grad u||_t.
    pub t_norm: f64,
    pub warm_start: bool,
}

impl Default for PSweepOptions {
    fn default() -> Self {
        Self {
            schedule: vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            t_norm: 4.0,
            warm_start: true,
        }
    }
}

pub struct PSweepOutcome {
    pub report: SweepReport,
    pub solutions: Vec<DiscreteSolution>,
    /// Limit solution: capped q-problem when L^2+k^2 <= 1, Lipschitz
    /// continuation otherwise.
    pub limit: DiscreteSolution,
    pub limit_is_lipschitz: bool,
}

/// Solves the (p, q) problem along an ascending exponent schedule
/// (warm-started by default), then the matching limit problem, and reports
/// per-point distances. Solver failures are recorded as flags and the sweep
/// continues.
pub fn p_sweep(
    instance: &ProblemInstance,
    mesh: &Mesh,
    opts: &PSweepOptions,
    config: &SolverConfig,
) -> Result<PSweepOutcome, SolverError> {
    if opts.schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SolverError::BadConfig(
            "p schedule must be strictly increasing".into(),
        ));
    }
    if opts.schedule.iter().any(|&p| p <= instance.q) {
        return Err(SolverError::BadConfig(format!(
            "every sweep exponent must exceed q = {}",
            instance.q
        )));
    }
    let mut points = Vec::new();
    let mut solutions: Vec<DiscreteSolution> = Vec::new();
    let mut notes = Vec::new();
    for &p in &opts.schedule {
        let stage = instance.with_p(p).map_err(SolverError::Fem)?;
        let warm = if opts.warm_start {
            solutions.last().map(|s| &s.field)
        } else {
            None
        };
        let started = Instant::now();
        let sol = solve_ppq_from(&stage, mesh, config, warm)?;
        let runtime = started.elapsed().as_secs_f64();
        let model = EnergyModel::new(&stage, mesh).map_err(SolverError::Fem)?;
        let mut flags = Vec::new();
        if !sol.converged {
            flags.push(format!("not converged (kkt {:.3e})", sol.kkt_residual));
        }
        let sup_prev = solutions
            .last()
            .map(|prev| sup_diff(&prev.field, &sol.field))
            .unwrap_or(f64::NAN);
        points.push(SweepPoint {
            param: p,
            energy: sol.energy,
            sup_diff_prev: sup_prev,
            sup_diff_final: f64::NAN,
            w1t_seminorm: model
                .elements
                .gradient_lr_norm(&sol.field.values, opts.t_norm),
            max_element_gradient: sol.max_element_gradient,
            iterations: sol.iterations,
            converged: sol.converged,
            runtime_s: runtime,
            flags,
        });
        solutions.push(sol);
    }
    let l2k2 = instance.lip_g * instance.lip_g + instance.k * instance.k;
    let limit_is_lipschitz = l2k2 > 1.0;
    let started = Instant::now();
    let limit = if limit_is_lipschitz {
        notes.push("limit problem: minimal Lipschitz extension (L^2+k^2 > 1)".into());
        solve_lipschitz(instance, mesh, config)?
    } else {
        notes.push("limit problem: gradient-capped q-energy (L^2+k^2 <= 1)".into());
        solve_limit_q(
            instance,
            mesh,
            &LimitConstraint::from_instance(instance),
            config,
        )?
    };
    notes.push(format!(
        "limit solve: max_grad={:.6} iters={} runtime_s={:.3}",
        limit.max_element_gradient,
        limit.iterations,
        started.elapsed().as_secs_f64()
    ));
    for (point, sol) in points.iter_mut().zip(&solutions) {
        point.sup_diff_final = sup_diff(&sol.field, &limit.field);
    }
    Ok(PSweepOutcome {
        report: SweepReport {
            axis: SweepAxis::Exponent,
            points,
            limit_bound: instance.limit_bound(),
            notes,
        },
        solutions,
        limit,
        limit_is_lipschitz,
    })
}

fn sup_diff(a: &DiscreteField, b: &DiscreteField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Domain family for level sweeps.
pub struct DomainFamily {
    pub base: Vec<Point2>,
    pub ifs: IfsParams,
    pub levels: Vec<u32>,
}

impl DomainFamily {
    pub fn new(base: Vec<Point2>, ifs: IfsParams, levels: Vec<u32>) -> Self {
        Self { base, ifs, levels }
    }
}

pub struct NSweepOptions {
    pub mesh: MeshOptions,
    /// Evaluation-grid spacing; by default half the finest boundary segment.
    pub grid_spacing: Option<f64>,
    pub fiber_params: Option<FiberParams>,
}

pub struct LevelRun {
    pub level: u32,
    pub domain: PrefractalDomain,
    pub mesh: Arc<Mesh>,
    pub solution: DiscreteSolution,
}

pub struct RecoveryCheck {
    pub level: u32,
    pub feasible: bool,
    pub matches_datum_on_boundary: bool,
    pub energy_solution: f64,
    pub energy_recovery: f64,
    /// W^{1,p} surrogate distance of the recovery field to the reference
    /// (finest) solution over the shared grid.
    pub w1p_to_reference: f64,
}

pub struct NSweepOutcome {
    pub report: SweepReport,
    pub levels: Vec<LevelRun>,
    pub grid_spacing: f64,
    /// Pairwise extended-field distances between consecutive levels:
    /// (L^p part, gradient part, W^{1,p} surrogate).
    pub pair_distances: Vec<(f64, f64, f64)>,
    pub recovery: Vec<RecoveryCheck>,
    /// Estimated grid-transfer noise: distance of the finest solution to
    /// itself after a round trip through the evaluation grid.
    pub interp_noise: f64,
}

/// Solves the problem on each pre-fractal level, extends every solution by
/// the boundary datum, and reports pairwise distances over a shared
/// evaluation grid plus the recovery-sequence checks against the finest
/// level. Loads and obstacles are constant in n; use `n_sweep_with_family`
/// for level-dependent data.
pub fn n_sweep(
    instance: &ProblemInstance,
    family: &DomainFamily,
    opts: &NSweepOptions,
    config: &SolverConfig,
) -> Result<NSweepOutcome, SolverError> {
    n_sweep_with_family(|_| instance.clone(), instance, family, opts, config)
}

/// Level sweep with level-dependent problem data `instance_at(n)`; the
/// target `instance` supplies the reference data (datum, obstacles) used
/// for extension and recovery. Exponents and k must not vary.
pub fn n_sweep_with_family(
    instance_at: impl Fn(u32) -> ProblemInstance,
    instance: &ProblemInstance,
    family: &DomainFamily,
    opts: &NSweepOptions,
    config: &SolverConfig,
) -> Result<NSweepOutcome, SolverError> {
    if family.levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SolverError::BadConfig(
            "levels must be strictly increasing".into(),
        ));
    }
    let mut levels: Vec<LevelRun> = Vec::new();
    let mut points: Vec<SweepPoint> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    for &n in &family.levels {
        let level_instance = instance_at(n);
        if level_instance.p != instance.p
            || level_instance.q != instance.q
            || level_instance.k != instance.k
        {
            return Err(SolverError::BadConfig(
                "level-dependent data may vary f and obstacles only".into(),
            ));
        }
        let started = Instant::now();
        let domain = build_domain(&family.base, n, &family.ifs)
            .map_err(|e| SolverError::BadConfig(format!("level {n}: {e}")))?;
        let mesh = triangulate_with(&domain, opts.mesh)
            .map_err(|e| SolverError::BadConfig(format!("level {n} meshing: {e}")))?;
        let sol = solve_ppq_from(&level_instance, &mesh, config, None)?;
        let runtime = started.elapsed().as_secs_f64();
        let model = EnergyModel::new(&level_instance, &mesh).map_err(SolverError::Fem)?;
        let mut flags = Vec::new();
        if !sol.converged {
            flags.push(format!("not converged (kkt {:.3e})", sol.kkt_residual));
        }
        points.push(SweepPoint {
            param: n as f64,
            energy: sol.energy,
            sup_diff_prev: f64::NAN,
            sup_diff_final: f64::NAN,
            w1t_seminorm: model
                .elements
                .gradient_lr_norm(&sol.field.values, instance.p),
            max_element_gradient: sol.max_element_gradient,
            iterations: sol.iterations,
            converged: sol.converged,
            runtime_s: runtime,
            flags,
        });
        levels.push(LevelRun {
            level: n,
            domain,
            mesh: Arc::new(mesh),
            solution: sol,
        });
    }
    let finest = levels.last().expect("nonempty level family");
    let side = family.base[0].dist(family.base[1]);
    let finest_seg = side * family.ifs.alpha().powi(-(finest.level as i32));
    let spacing = opts.grid_spacing.unwrap_or(0.5 * finest_seg);
    let grid = EvalGrid::over_domain(&finest.domain, spacing);
    notes.push(format!(
        "evaluation grid: spacing {spacing:.6}, {} points over the level-{} domain",
        grid.len(),
        finest.level
    ));

    let fields: Vec<MeshField> = levels
        .iter()
        .map(|run| MeshField::new(run.mesh.clone(), run.solution.field.values.clone()))
        .collect();
    let g = instance.g.clone();
    let extended: Vec<ExtendedField> = fields
        .iter()
        .map(|f| ExtendedField::new(f, g.as_ref()))
        .collect();
    let mut pair_distances = Vec::new();
    for w in extended.windows(2) {
        pair_distances.push(grid_distance(&w[0], &w[1], &grid, instance.p));
    }
    let last = extended.last().unwrap();
    for (i, point) in points.iter_mut().enumerate() {
        if i > 0 {
            point.sup_diff_prev = grid_sup_distance(&extended[i - 1], &extended[i], &grid);
        }
        point.sup_diff_final = grid_sup_distance(&extended[i], last, &grid);
    }

    // Grid-transfer noise estimate: resample the finest field through the
    // grid and back at the mesh nodes.
    let interp_noise = {
        let f = fields.last().unwrap();
        let mut worst = 0.0f64;
        for (i, &x) in finest.mesh.vertices.iter().enumerate() {
            if let Some((v, _)) = f.eval(x) {
                worst = worst.max((v - f.values[i]).abs());
            }
        }
        worst
    };

    // Recovery fields against the finest solution.
    let fiber_params = opts
        .fiber_params
        .unwrap_or_else(|| FiberParams::default_for(family.ifs.theta()));
    let mut recovery = Vec::new();
    for (run, _field) in levels.iter().zip(&fields) {
        let fibers = build_fibers(&run.domain, fiber_params)
            .map_err(|e| SolverError::BadConfig(format!("fibers at level {}: {e}", run.level)))?;
        let is_boundary = run.mesh.is_boundary_mask();
        let v = recovery_sequence(
            &fibers,
            &run.domain,
            &run.mesh.vertices,
            &is_boundary,
            last,
            instance.g.as_ref(),
            instance.phi1.as_ref(),
            instance.phi2.as_ref(),
        )
        .map_err(|e| SolverError::BadConfig(format!("recovery at level {}: {e}", run.level)))?;
        let phi1 = interpolate(instance.phi1.as_ref(), &run.mesh).map_err(SolverError::Fem)?;
        let phi2 = interpolate(instance.phi2.as_ref(), &run.mesh).map_err(SolverError::Fem)?;
        let gn = interpolate(instance.g.as_ref(), &run.mesh).map_err(SolverError::Fem)?;
        let feasible = v
            .iter()
            .enumerate()
            .all(|(i, &x)| x >= phi1.values[i] - 1e-12 && x <= phi2.values[i] + 1e-12);
        let matches_datum = v
            .iter()
            .enumerate()
            .filter(|(i, _)| is_boundary[*i])
            .all(|(i, &x)| (x - gn.values[i]).abs() <= 1e-12);
        let model = EnergyModel::new(instance, &run.mesh).map_err(SolverError::Fem)?;
        let energy_recovery = model
            .energy(&DiscreteField { values: v.clone() })
            .unwrap_or(f64::INFINITY);
        let vf = MeshField::new(run.mesh.clone(), v);
        let vext = ExtendedField::new(&vf, g.as_ref());
        let (_, _, w1p) = grid_distance(&vext, last, &grid, instance.p);
        recovery.push(RecoveryCheck {
            level: run.level,
            feasible,
            matches_datum_on_boundary: matches_datum,
            energy_solution: run.solution.energy,
            energy_recovery,
            w1p_to_reference: w1p,
        });
    }

    Ok(NSweepOutcome {
        report: SweepReport {
            axis: SweepAxis::Level,
            points,
            limit_bound: instance.limit_bound(),
            notes,
        },
        levels,
        grid_spacing: spacing,
        pair_distances,
        recovery,
        interp_noise,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMode {
    /// Capped q-energy (the L^2+k^2 <= 1 limit).
    CappedQ,
    /// Minimal Lipschitz extension (the L^2+k^2 > 1 limit).
    Lipschitz,
}

pub struct LimitSweepOutcome {
    pub report: SweepReport,
    pub levels: Vec<LevelRun>,
}

/// Level sweep for the limit problems: per level solves the capped
/// q-problem or the Lipschitz continuation, extends by the datum, and
/// reports sup-norm pairwise differences plus max gradients against M.
pub fn limit_n_sweep(
    instance: &ProblemInstance,
    family: &DomainFamily,
    mode: LimitMode,
    opts: &NSweepOptions,
    config: &SolverConfig,
) -> Result<LimitSweepOutcome, SolverError> {
    let mut levels: Vec<LevelRun> = Vec::new();
    let mut points: Vec<SweepPoint> = Vec::new();
    let mut notes = vec![format!(
        "mode: {}",
        match mode {
            LimitMode::CappedQ => "capped q-energy",
            LimitMode::Lipschitz => "minimal Lipschitz extension",
        }
    )];
    let cap = LimitConstraint::from_instance(instance);
    for &n in &family.levels {
        let started = Instant::now();
        let domain = build_domain(&family.base, n, &family.ifs)
            .map_err(|e| SolverError::BadConfig(format!("level {n}: {e}")))?;
        let mesh = triangulate_with(&domain, opts.mesh)
            .map_err(|e| SolverError::BadConfig(format!("level {n} meshing: {e}")))?;
        let result = match mode {
            LimitMode::CappedQ => solve_limit_q(instance, &mesh, &cap, config),
            LimitMode::Lipschitz => solve_lipschitz(instance, &mesh, config),
        };
        let runtime = started.elapsed().as_secs_f64();
        match result {
            Ok(sol) => {
                points.push(SweepPoint {
                    param: n as f64,
                    energy: sol.energy,
                    sup_diff_prev: f64::NAN,
                    sup_diff_final: f64::NAN,
                    w1t_seminorm: f64::NAN,
                    max_element_gradient: sol.max_element_gradient,
                    iterations: sol.iterations,
                    converged: sol.converged,
                    runtime_s: runtime,
                    flags: Vec::new(),
                });
                levels.push(LevelRun {
                    level: n,
                    domain,
                    mesh: Arc::new(mesh),
                    solution: sol,
                });
            }
            Err(err) => {
                notes.push(format!("level {n} failed: {err}"));
                points.push(SweepPoint {
                    param: n as f64,
                    energy: f64::NAN,
                    sup_diff_prev: f64::NAN,
                    sup_diff_final: f64::NAN,
                    w1t_seminorm: f64::NAN,
                    max_element_gradient: f64::NAN,
                    iterations: 0,
                    converged: false,
                    runtime_s: runtime,
                    flags: vec![format!("failed: {err}")],
                });
            }
        }
    }
    if let Some(finest) = levels.last() {
        let side = family.base[0].dist(family.base[1]);
        let spacing = opts
            .grid_spacing
            .unwrap_or(0.5 * side * family.ifs.alpha().powi(-(finest.level as i32)));
        let grid = EvalGrid::over_domain(&finest.domain, spacing);
        let fields: Vec<MeshField> = levels
            .iter()
            .map(|run| MeshField::new(run.mesh.clone(), run.solution.field.values.clone()))
            .collect();
        let extended: Vec<ExtendedField> = fields
            .iter()
            .map(|f| ExtendedField::new(f, instance.g.as_ref()))
            .collect();
        // Points and levels may differ when some level failed; match by
        // parameter value.
        for (i, run) in levels.iter().enumerate() {
            if i > 0 {
                let d = grid_sup_distance(&extended[i - 1], &extended[i], &grid);
                if let Some(pt) = points.iter_mut().find(|p| p.param == run.level as f64) {
                    pt.sup_diff_prev = d;
                }
            }
        }
    }
    if levels.len() < 3 {
        notes.push("fewer than 3 successful levels: no trend reported".into());
    }
    Ok(LimitSweepOutcome {
        report: SweepReport {
            axis: SweepAxis::Level,
            points,
            limit_bound: cap.m,
            notes,
        },
        levels,
    })
}

#[derive(Debug, Clone)]
pub struct IntegrabilityRow {
    pub eps: f64,
    /// ||grad u||_{p+eps} on the base mesh and after one and two uniform
    /// refinements (re-solving on each).
    pub norms: [f64; 3],
    /// Successive ratios norms[i+1] / norms[i].
    pub ratios: [f64; 2],
    pub stabilized: bool,
}

/// Gradient-integrability diagnostic: re-solves on two uniform refinements
/// and reports whether the discrete L^{p+eps} gradient norms stabilize
/// (both successive changes within 10%).
pub fn integrability_diagnostic(
    instance: &ProblemInstance,
    mesh: &Mesh,
    solution: &DiscreteSolution,
    eps_list: &[f64],
    config: &SolverConfig,
) -> Result<Vec<IntegrabilityRow>, SolverError> {
    for &e in eps_list {
        if e < 0.0 {
            return Err(SolverError::BadConfig(format!(
                "eps must be nonnegative, got {e}"
            )));
        }
    }
    let mut meshes = vec![mesh.clone()];
    let mut values = vec![solution.field.values.clone()];
    for _ in 0..2 {
        let (finer, parents) = refine_with_map(meshes.last().unwrap());
        let warm = DiscreteField {
            values: prolong(values.last().unwrap(), &parents),
        };
        let sol = solve_ppq_from(instance, &finer, config, Some(&warm))?;
        values.push(sol.field.values.clone());
        meshes.push(finer);
    }
    let elements: Vec<ElementData> = meshes.iter().map(ElementData::new).collect();
    let mut rows = Vec::new();
    for &eps in eps_list {
        let r = instance.p + eps;
        let norms = [
            elements[0].gradient_lr_norm(&values[0], r),
            elements[1].gradient_lr_norm(&values[1], r),
            elements[2].gradient_lr_norm(&values[2], r),
        ];
        let ratios = [norms[1] / norms[0], norms[2] / norms[1]];
        let stabilized = ratios.iter().all(|&x| (x - 1.0).abs() <= 0.1);
        rows.push(IntegrabilityRow {
            eps,
            norms,
            ratios,
            stabilized,
        });
    }
    Ok(rows)
}

/// CSV for the integrability diagnostic.
pub fn integrability_csv(rows: &[IntegrabilityRow]) -> String {
    let mut out = String::from("eps,norm0,norm1,norm2,ratio1,ratio2,stabilized\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            r.eps, r.norms[0], r.norms[1], r.norms[2], r.ratios[0], r.ratios[1], r.stabilized
        );
    }
    out
}
