//! Solvers for the discrete double-obstacle problems.
//!
//! `solve_ppq` minimizes the discrete (p,q) energy over nodal box
//! constraints and Dirichlet data with a projected Barzilai-Borwein
//! gradient method and monotone Armijo backtracking. Very large exponents
//! are handled by minimizing the energy times a fixed power of two chosen
//! from the start iterate; positive scaling leaves the argmin and the BB
//! iterate path unchanged while keeping every evaluation inside f64 range.
//!
//! `solve_limit_q` minimizes the q-energy under a per-element gradient cap
//! via an ascending quadratic penalty; `solve_lipschitz` approximates the
//! minimal Lipschitz extension by exponent continuation.

use crate::error::{FemError, SolverError};
use crate::fem::{interpolate, DiscreteField, EnergyModel, ProblemInstance};
use crate::mesh::Mesh;
use crate::point::Point2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Projected-gradient norm threshold (max-norm of the unit-step
    /// projected gradient residual).
    pub tol: f64,
    pub max_iters: usize,
    /// Backtracking shrink factor.
    pub ls_shrink: f64,
    /// Sufficient-decrease constant.
    pub ls_decrease: f64,
    /// Alternate the two BB step formulas instead of always using the first.
    pub bb_stabilization: bool,
    /// Ascending penalty weights for the gradient-capped problem.
    pub penalty_schedule: Vec<f64>,
    /// Ascending exponents for the Lipschitz continuation.
    pub p_continuation: Vec<f64>,
    /// Accepted per-element gradient-cap violation.
    pub viol_tol: f64,
    /// Extra positive factor applied to the objective (argmin-invariant).
    pub objective_scale: Option<f64>,
    /// Record one trace row per iteration.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50_000,
            ls_shrink: 0.5,
            ls_decrease: 1e-4,
            bb_stabilization: true,
            penalty_schedule: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7],
            p_continuation: vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            viol_tol: 1e-4,
            objective_scale: None,
            trace: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(SolverError::BadConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        for (name, sched) in [
            ("penalty_schedule", &self.penalty_schedule),
            ("p_continuation", &self.p_continuation),
        ] {
            if sched.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SolverError::BadConfig(format!(
                    "{name} must be strictly increasing"
                )));
            }
        }
        if let Some(s) = self.objective_scale {
            if s.is_nan() || s <= 0.0 {
                return Err(SolverError::BadConfig(format!(
                    "objective_scale must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Gradient bound of the limit convex set: M = max(1, sqrt(L^2 + k^2)).
#[derive(Debug, Clone, Copy)]
pub struct LimitConstraint {
    pub m: f64,
}

impl LimitConstraint {
    pub fn new(m: f64) -> Self {
        assert!(m >= 1.0, "limit gradient bound is at least 1");
        Self { m }
    }

    pub fn from_instance(instance: &ProblemInstance) -> Self {
        Self {
            m: instance.limit_bound(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ActiveSets {
    pub lower: Vec<u32>,
    pub upper: Vec<u32>,
    pub free_count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub pg_norm: f64,
    pub step: f64,
    pub max_element_gradient: f64,
}

#[derive(Clone)]
pub struct DiscreteSolution {
    pub field: DiscreteField,
    /// True (unscaled) energy; +inf when it exceeds f64 range.
    pub energy: f64,
    pub element_gradients: Vec<Point2>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub active_sets: ActiveSets,
    pub converged: bool,
    pub max_element_gradient: f64,
    pub notes: Vec<String>,
    pub trace: Vec<TraceRow>,
}

/// Nodal box and Dirichlet data for one instance on one mesh.
pub struct BoxConstraints {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub g_nodal: Vec<f64>,
    pub is_boundary: Vec<bool>,
    pub pinned: Vec<bool>,
}

impl BoxConstraints {
    pub fn build(instance: &ProblemInstance, mesh: &Mesh) -> Result<Self, SolverError> {
        let phi1 = interpolate(instance.phi1.as_ref(), mesh).map_err(SolverError::Fem)?;
        let phi2 = interpolate(instance.phi2.as_ref(), mesh).map_err(SolverError::Fem)?;
        let g = interpolate(instance.g.as_ref(), mesh).map_err(SolverError::Fem)?;
        let is_boundary = mesh.is_boundary_mask();
        let mut lo = phi1.values;
        let mut hi = phi2.values;
        for i in 0..lo.len() {
            if lo[i] > hi[i] {
                return Err(SolverError::Infeasible(format!(
                    "phi1 > phi2 at node {i} ({} > {})",
                    lo[i], hi[i]
                )));
            }
            if is_boundary[i] {
                let gi = g.values[i];
                let slack = 1e-12 * (1.0 + gi.abs());
                if gi < lo[i] - slack || gi > hi[i] + slack {
                    return Err(SolverError::Infeasible(format!(
                        "boundary datum outside obstacle interval at node {i}: g = {gi}, [{}, {}]",
                        lo[i], hi[i]
                    )));
                }
                lo[i] = gi;
                hi[i] = gi;
            }
        }
        let pinned = lo.iter().zip(&hi).map(|(l, h)| l >= h).collect();
        Ok(Self {
            lo,
            hi,
            g_nodal: g.values,
            is_boundary,
            pinned,
        })
    }

    pub fn project(&self, values: &mut [f64]) {
        for (v, (l, h)) in values.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    /// Feasible start: the boundary-datum interpolant clamped to the box.
    pub fn start(&self) -> Vec<f64> {
        self.g_nodal
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(g, (l, h))| g.clamp(*l, *h))
            .collect()
    }

    /// Feasible random probe around `base`: uniform perturbations clamped
    /// to the box, exact boundary data.
    pub fn random_probe(&self, base: &[f64], amplitude: f64, rng: &mut StdRng) -> Vec<f64> {
        base.iter()
            .enumerate()
            .map(|(i, b)| {
                if self.is_boundary[i] {
                    self.g_nodal[i]
                } else {
                    (b + amplitude * rng.random_range(-1.0..1.0)).clamp(self.lo[i], self.hi[i])
                }
            })
            .collect()
    }
}

struct PgOutcome {
    x: Vec<f64>,
    kkt: f64,
    iterations: usize,
    converged: bool,
    stalled: bool,
    trace: Vec<TraceRow>,
}

/// Projected BB gradient descent over a box. `eval`/`grad` work on the
/// scaled objective; `unscale` converts scaled gradients back to true ones
/// for the KKT residual (may overflow to inf, which only keeps the residual
/// conservative).
#[allow(clippy::too_many_arguments)]
fn projected_bb<E, G>(
    eval: E,
    grad: G,
    unscale: f64,
    boxc: &BoxConstraints,
    x0: Vec<f64>,
    cfg: &SolverConfig,
    max_grad_of: impl Fn(&[f64]) -> f64,
    energy_unscaled_of: impl Fn(&[f64]) -> f64,
) -> PgOutcome
where
    E: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let free: Vec<usize> = (0..n).filter(|&i| !boxc.pinned[i]).collect();
    let mut x = x0;
    boxc.project(&mut x);
    let mut trace = Vec::new();
    let kkt_of = |x: &[f64], g: &[f64]| -> f64 {
        let mut worst = 0.0f64;
        for &i in &free {
            let gi = g[i] * unscale;
            let target = if gi.is_nan() {
                x[i]
            } else {
                (x[i] - gi).clamp(boxc.lo[i], boxc.hi[i])
            };
            worst = worst.max((x[i] - target).abs());
        }
        worst
    };
    if free.is_empty() {
        return PgOutcome {
            x,
            kkt: 0.0,
            iterations: 0,
            converged: true,
            stalled: false,
            trace,
        };
    }
    let mut fx = eval(&x);
    let mut g = grad(&x);
    let mut kkt = kkt_of(&x, &g);
    if cfg.trace {
        trace.push(TraceRow {
            iteration: 0,
            energy: energy_unscaled_of(&x),
            pg_norm: kkt,
            step: 0.0,
            max_element_gradient: max_grad_of(&x),
        });
    }
    if kkt <= cfg.tol {
        return PgOutcome {
            x,
            kkt,
            iterations: 0,
            converged: true,
            stalled: false,
            trace,
        };
    }
    // Initial step 1 / ||g||_inf over free nodes. Deliberately unprojected:
    // a positive objective scale c turns g into c g and tau into tau / c
    // exactly, so power-of-two scalings reproduce the iterate path bit for
    // bit (the projected variant would not commute with scaling).
    let mut tau = {
        let mut d = 0.0f64;
        for &i in &free {
            d = d.max(g[i].abs());
        }
        if d > 0.0 {
            1.0 / d
        } else {
            1.0
        }
    };
    let tau_ref = tau;
    let (tau_min, tau_max) = (tau_ref * 1e-14, tau_ref * 1e14);
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = false;
    for it in 1..=cfg.max_iters {
        iterations = it;
        // Backtracking from the BB step.
        let mut step = tau.clamp(tau_min, tau_max);
        let mut accepted = false;
        let mut xt = vec![0.0; n];
        let mut ft = f64::INFINITY;
        for _ in 0..120 {
            xt.copy_from_slice(&x);
            let mut dd = 0.0f64;
            for &i in &free {
                let target = (x[i] - step * g[i]).clamp(boxc.lo[i], boxc.hi[i]);
                xt[i] = target;
                let d = target - x[i];
                dd += d * d;
            }
            if dd == 0.0 {
                break; // no movement possible at this step
            }
            ft = eval(&xt);
            if ft.is_finite() && ft <= fx - cfg.ls_decrease * dd / step {
                accepted = true;
                break;
            }
            step *= cfg.ls_shrink;
        }
        if !accepted {
            // No acceptable step at any scale: the energy can no longer be
            // resolved along this direction in f64. Report the residual.
            kkt = kkt_of(&x, &g);
            converged = kkt <= cfg.tol * 10.0;
            stalled = true;
            break;
        }
        let gt = grad(&xt);
        // BB step from s = xt - x, y = gt - g over free coordinates.
        let (mut ss, mut sy, mut yy) = (0.0f64, 0.0f64, 0.0f64);
        for &i in &free {
            let s = xt[i] - x[i];
            let y = gt[i] - g[i];
            ss += s * s;
            sy += s * y;
            yy += y * y;
        }
        tau = if sy > 0.0 && ss > 0.0 {
            let bb1 = ss / sy;
            if cfg.bb_stabilization && yy > 0.0 && it % 2 == 0 {
                sy / yy
            } else {
                bb1
            }
        } else {
            step * 10.0
        };
        x.copy_from_slice(&xt);
        fx = ft;
        g = gt;
        kkt = kkt_of(&x, &g);
        if cfg.trace {
            trace.push(TraceRow {
                iteration: it,
                energy: energy_unscaled_of(&x),
                pg_norm: kkt,
                step,
                max_element_gradient: max_grad_of(&x),
            });
        }
        if kkt <= cfg.tol {
            converged = true;
            break;
        }
    }
    PgOutcome {
        x,
        kkt,
        iterations,
        converged,
        stalled,
        trace,
    }
}

fn classify_active(x: &[f64], boxc: &BoxConstraints) -> ActiveSets {
    let mut sets = ActiveSets::default();
    for (i, &xi) in x.iter().enumerate() {
        if boxc.pinned[i] {
            continue;
        }
        let span = (boxc.hi[i] - boxc.lo[i]).min(1.0);
        let tol = 1e-9 * (1.0 + span);
        if xi - boxc.lo[i] <= tol {
            sets.lower.push(i as u32);
        } else if boxc.hi[i] - xi <= tol {
            sets.upper.push(i as u32);
        } else {
            sets.free_count += 1;
        }
    }
    sets
}

/// Power-of-two damping exponent so the p-term of the energy stays well
/// inside f64 range, with headroom for line-search transients.
fn scale_exponent(model: &EnergyModel, x0: &[f64]) -> f64 {
    let (_, log2_base) = model.max_base(x0);
    if !log2_base.is_finite() {
        return 0.0;
    }
    let e0 = 0.5 * model.p * log2_base.max(0.0);
    -(e0 - 512.0).max(0.0).ceil()
}

fn finish_solution(
    model: &EnergyModel,
    boxc: &BoxConstraints,
    out: PgOutcome,
    mut notes: Vec<String>,
) -> DiscreteSolution {
    if out.stalled && !out.converged {
        notes.push(format!(
            "line search exhausted at kkt residual {:.3e}: double precision cannot resolve further descent",
            out.kkt
        ));
    }
    let field = DiscreteField {
        values: out.x.clone(),
    };
    let energy = match model.energy(&field) {
        Ok(e) => e,
        Err(_) => {
            notes.push("energy exceeds f64 range; reported as +inf".into());
            f64::INFINITY
        }
    };
    let element_gradients = model.elements.gradients(&out.x, model.mode);
    let max_element_gradient = element_gradients
        .iter()
        .map(|g| g.norm())
        .fold(0.0, f64::max);
    let active_sets = classify_active(&out.x, boxc);
    DiscreteSolution {
        field,
        energy,
        element_gradients,
        kkt_residual: out.kkt,
        iterations: out.iterations,
        active_sets,
        converged: out.converged,
        max_element_gradient,
        notes,
        trace: out.trace,
    }
}

/// Minimizes the discrete (p,q) energy over the admissible nodal set.
/// Returns the best iterate with `converged = false` when the iteration
/// limit is hit.
pub fn solve_ppq(
    instance: &ProblemInstance,
    mesh: &Mesh,
    config: &SolverConfig,
) -> Result<DiscreteSolution, SolverError> {
    solve_ppq_from(instance, mesh, config, None)
}

pub fn solve_ppq_from(
    instance: &ProblemInstance,
    mesh: &Mesh,
    config: &SolverConfig,
    start: Option<&DiscreteField>,
) -> Result<DiscreteSolution, SolverError> {
    config.validate()?;
    let model = EnergyModel::new(instance, mesh).map_err(SolverError::Fem)?;
    let boxc = BoxConstraints::build(instance, mesh)?;
    let mut x0 = match start {
        Some(f) => f.values.clone(),
        None => boxc.start(),
    };
    boxc.project(&mut x0);
    let ls = scale_exponent(&model, &x0);
    let extra = config.objective_scale.unwrap_or(1.0);
    let unscale = (-ls).exp2() / extra;
    let mut notes = Vec::new();
    if ls != 0.0 {
        notes.push(format!("objective damped by 2^{ls} against overflow"));
    }
    let out = projected_bb(
        |v| model.energy_scaled(v, ls) * extra,
        |v| {
            let mut g = model.gradient_scaled(v, ls);
            if extra != 1.0 {
                for gi in &mut g {
                    *gi *= extra;
                }
            }
            g
        },
        unscale,
        &boxc,
        x0,
        config,
        |v| model.elements.max_gradient_norm(v),
        |v| model.energy_scaled(v, ls) * (-ls).exp2(),
    );
    Ok(finish_solution(&model, &boxc, out, notes))
}

/// Variational-inequality residual a_p(u, v-u) + a_q(u, v-u) - (f, v-u) at
/// u = `solution`, v = `probe`. Nonnegative (up to audit slack) when u
/// solves the discrete problem.
pub fn vi_residual(
    instance: &ProblemInstance,
    mesh: &Mesh,
    solution: &DiscreteField,
    probe: &DiscreteField,
) -> Result<f64, SolverError> {
    let model = EnergyModel::new(instance, mesh).map_err(SolverError::Fem)?;
    let boxc = BoxConstraints::build(instance, mesh)?;
    if probe.len() != boxc.lo.len() {
        return Err(SolverError::ProbeInfeasible(format!(
            "probe has {} values, mesh has {} nodes",
            probe.len(),
            boxc.lo.len()
        )));
    }
    #[allow(clippy::needless_range_loop)]
    for i in 0..probe.len() {
        let v = probe.values[i];
        let slack = 1e-9 * (1.0 + v.abs());
        if v < boxc.lo[i] - slack || v > boxc.hi[i] + slack {
            return Err(SolverError::ProbeInfeasible(format!(
                "probe violates box at node {i}: {v} outside [{}, {}]",
                boxc.lo[i], boxc.hi[i]
            )));
        }
        if boxc.is_boundary[i] && (v - boxc.g_nodal[i]).abs() > slack {
            return Err(SolverError::ProbeInfeasible(format!(
                "probe violates boundary datum at node {i}"
            )));
        }
    }
    Ok(model.vi_form(&solution.values, &probe.values))
}

/// Minimizes the q-energy subject to the box, the boundary data, and the
/// per-element gradient cap |grad v| <= M, via an ascending quadratic
/// penalty. Fails with `PenaltyStagnation` when the final violation stays
/// above `viol_tol`.
pub fn solve_limit_q(
    instance: &ProblemInstance,
    mesh: &Mesh,
    cap: &LimitConstraint,
    config: &SolverConfig,
) -> Result<DiscreteSolution, SolverError> {
    config.validate()?;
    let l2k2 = instance.lip_g * instance.lip_g + instance.k * instance.k;
    let mut notes = Vec::new();
    if l2k2 > 1.0 {
        notes.push(format!(
            "L^2 + k^2 = {l2k2:.6} > 1: the Lipschitz problem is the prescribed limit here"
        ));
    }
    // The capped functional uses the q-term only.
    let model = {
        let mut m = EnergyModel::new(instance, mesh).map_err(SolverError::Fem)?;
        m.p = f64::NAN; // q-only evaluation below never touches p
        m
    };
    let boxc = BoxConstraints::build(instance, mesh)?;
    let mut x = boxc.start();
    let mut last: Option<PgOutcome> = None;
    let mut viol_prev = f64::INFINITY;
    let mut total_iters = 0usize;
    for &rho in &config.penalty_schedule {
        let out = projected_bb(
            |v| q_penalty_energy(&model, v, cap.m, rho),
            |v| q_penalty_gradient(&model, v, cap.m, rho),
            1.0,
            &boxc,
            x.clone(),
            config,
            |v| model.elements.max_gradient_norm(v),
            |v| q_penalty_energy(&model, v, cap.m, rho),
        );
        x = out.x.clone();
        total_iters += out.iterations;
        let viol = (model.elements.max_gradient_norm(&x) - cap.m).max(0.0);
        if viol > config.viol_tol && viol >= viol_prev * 0.999 {
            notes.push(format!(
                "penalty stage rho = {rho:.1e} left violation {viol:.3e} (not decreasing)"
            ));
        }
        viol_prev = viol;
        last = Some(out);
    }
    let mut out = last.expect("penalty schedule is nonempty");
    out.iterations = total_iters;
    let viol = (model.elements.max_gradient_norm(&out.x) - cap.m).max(0.0);
    if viol > config.viol_tol {
        return Err(SolverError::PenaltyStagnation {
            viol,
            tol: config.viol_tol,
        });
    }
    notes.push(format!(
        "gradient cap M = {:.6}, final violation {viol:.3e}",
        cap.m
    ));
    let mut sol = finish_q_only(&model, &boxc, out, notes);
    sol.energy = q_energy(&model, &sol.field.values);
    // Success of the capped solve is defined by the constraint violation;
    // the terminal kkt of the stiffest penalty stage stays in the notes.
    sol.converged = true;
    Ok(sol)
}

fn q_energy(model: &EnergyModel, v: &[f64]) -> f64 {
    q_penalty_energy(model, v, f64::INFINITY, 0.0)
}

fn q_penalty_energy(model: &EnergyModel, v: &[f64], cap: f64, rho: f64) -> f64 {
    let el = &model.elements;
    let (q, k2) = (model.q, model.k2);
    let cap2 = cap * cap;
    let bulk = crate::par::indexed_sum(el.n_triangles(), model.mode, |t| {
        let g2 = el.gradient(v, t).norm_sq();
        let s = k2 + g2;
        let mut term = el.area[t] * s.powf(0.5 * q) / q;
        let ex = (g2 - cap2).max(0.0);
        if ex > 0.0 {
            term += rho * el.area[t] * ex * ex;
        }
        term
    });
    let load: f64 = model.load.iter().zip(v).map(|(l, x)| l * x).sum();
    bulk - load
}

fn q_penalty_gradient(model: &EnergyModel, v: &[f64], cap: f64, rho: f64) -> Vec<f64> {
    let el = &model.elements;
    let (q, k2) = (model.q, model.k2);
    let cap2 = cap * cap;
    let mut grad =
        crate::par::indexed_accumulate(el.n_triangles(), el.n_vertices, model.mode, |t, buf| {
            let g = el.gradient(v, t);
            let g2 = g.norm_sq();
            let s = k2 + g2;
            let mut w = el.area[t] * s.powf(0.5 * q - 1.0);
            let ex = (g2 - cap2).max(0.0);
            if ex > 0.0 {
                w += 4.0 * rho * el.area[t] * ex;
            }
            let basis = el.grad_basis[t];
            let [a, b, c] = el.tris[t];
            buf[a as usize] += w * g.dot(basis[0]);
            buf[b as usize] += w * g.dot(basis[1]);
            buf[c as usize] += w * g.dot(basis[2]);
        });
    for (gi, li) in grad.iter_mut().zip(&model.load) {
        *gi -= li;
    }
    grad
}

fn finish_q_only(
    model: &EnergyModel,
    boxc: &BoxConstraints,
    out: PgOutcome,
    mut notes: Vec<String>,
) -> DiscreteSolution {
    if out.stalled && !out.converged {
        notes.push(format!(
            "line search exhausted at kkt residual {:.3e}",
            out.kkt
        ));
    }
    let field = DiscreteField {
        values: out.x.clone(),
    };
    let element_gradients = model.elements.gradients(&out.x, model.mode);
    let max_element_gradient = element_gradients
        .iter()
        .map(|g| g.norm())
        .fold(0.0, f64::max);
    let active_sets = classify_active(&out.x, boxc);
    DiscreteSolution {
        field,
        energy: f64::NAN,
        element_gradients,
        kkt_residual: out.kkt,
        iterations: out.iterations,
        active_sets,
        converged: out.converged,
        max_element_gradient,
        notes,
        trace: out.trace,
    }
}

/// Approximate minimal Lipschitz extension by exponent continuation:
/// solves the (p, q) problem along `p_continuation` with warm starts and
/// reports the last iterate and its max element gradient. Stops early with
/// a note when a continuation stage fails.
pub fn solve_lipschitz(
    instance: &ProblemInstance,
    mesh: &Mesh,
    config: &SolverConfig,
) -> Result<DiscreteSolution, SolverError> {
    config.validate()?;
    let l2k2 = instance.lip_g * instance.lip_g + instance.k * instance.k;
    let mut notes = Vec::new();
    if l2k2 <= 1.0 {
        notes.push(format!(
            "L^2 + k^2 = {l2k2:.6} <= 1: the capped q-problem is the prescribed limit here"
        ));
    }
    let mut current: Option<DiscreteSolution> = None;
    for &p in &config.p_continuation {
        if p <= instance.q {
            return Err(SolverError::BadConfig(format!(
                "continuation exponent {p} must exceed q = {}",
                instance.q
            )));
        }
        let stage = instance.with_p(p).map_err(SolverError::Fem)?;
        let warm = current.as_ref().map(|s| &s.field);
        match solve_ppq_from(&stage, mesh, config, warm) {
            Ok(sol) => current = Some(sol),
            Err(err) => {
                let mut sol = current.ok_or(err)?;
                sol.notes
                    .push(format!("continuation stopped before p = {p}"));
                sol.converged = false;
                return Ok(sol);
            }
        }
    }
    let mut sol = current.expect("continuation schedule is nonempty");
    let bound = instance.limit_bound();
    let slack = 0.05;
    if sol.max_element_gradient > bound + slack {
        sol.notes.push(format!(
            "max element gradient {:.6} exceeds limit bound {bound:.6} + {slack}",
            sol.max_element_gradient
        ));
    } else {
        sol.notes.push(format!(
            "max element gradient {:.6} within limit bound {bound:.6} + {slack}",
            sol.max_element_gradient
        ));
    }
    Ok(sol)
}

/// Deterministic feasible probes for randomized VI audits.
pub fn random_probes(
    instance: &ProblemInstance,
    mesh: &Mesh,
    base: &DiscreteField,
    amplitude: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<DiscreteField>, SolverError> {
    let boxc = BoxConstraints::build(instance, mesh)?;
    let mut rng = StdRng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| DiscreteField {
            values: boxc.random_probe(&base.values, amplitude, &mut rng),
        })
        .collect())
}

/// Lifts `FemError` overflow signals out of solver results for callers
/// that need to distinguish them.
pub fn is_overflow(err: &SolverError) -> bool {
    matches!(err, SolverError::Fem(FemError::EnergyOutOfRange { .. }))
}
