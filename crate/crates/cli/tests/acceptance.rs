//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities (run with `--nocapture` to see them).
//!
//! Every tolerance below is fixed in code; nothing is calibrated at run
//! time. The default experiment lives in `fixtures::default_instance`.

mod fixtures;

use fixtures::*;
use kochfem::fem::{interpolate, DiscreteField, EnergyModel};
use kochfem::fibers::{build_fibers, FiberParams};
use kochfem::geometry::{apply_similitude, generate_prefractal, regular_polygon, IfsParams};
use kochfem::mesh::MeshOptions;
use kochfem::point::Point2;
use kochfem::solver::{
    random_probes, solve_ppq, solve_ppq_from, vi_residual, BoxConstraints, SolverConfig,
};
use kochfem::sweeps::{
    integrability_diagnostic, n_sweep, p_sweep, DomainFamily, NSweepOptions, PSweepOptions,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::time::Instant;

fn budget(name: &str, started: Instant, limit_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < limit_s,
        "{name} exceeded its runtime budget: {elapsed:.1}s >= {limit_s}s"
    );
}

#[test]
fn criterion_1_geometry_self_similarity() {
    let started = Instant::now();
    let a = Point2::new(0.0, 0.0);
    let b = Point2::new(1.0, 0.0);
    for alpha in [2.5, 3.0, 3.5] {
        let ifs = IfsParams::new(alpha).unwrap();
        for n in 1..=4u32 {
            let coarse = generate_prefractal(n - 1, &ifs, a, b).unwrap();
            let fine = generate_prefractal(n, &ifs, a, b).unwrap();
            let mut mapped: Vec<Point2> = Vec::new();
            for i in 1..=4 {
                mapped.extend(
                    coarse
                        .vertices
                        .iter()
                        .map(|&v| apply_similitude(i, &ifs, v)),
                );
            }
            // Set equality within 1e-12, both directions.
            let dist = |from: &[Point2], to: &[Point2]| -> f64 {
                from.iter()
                    .map(|p| to.iter().map(|q| p.dist(*q)).fold(f64::INFINITY, f64::min))
                    .fold(0.0f64, f64::max)
            };
            let d = dist(&fine.vertices, &mapped).max(dist(&mapped, &fine.vertices));
            assert!(d <= 1e-12, "alpha={alpha}, n={n}: set distance {d:.3e}");
            assert_eq!(fine.segment_count(), 4usize.pow(n));
            let len = fine.total_length();
            let expect = (4.0 / alpha).powi(n as i32);
            assert!(
                (len - expect).abs() <= 1e-12 * expect,
                "alpha={alpha}, n={n}: length {len} vs {expect}"
            );
        }
    }
    budget("criterion 1", started, 1.0);
    println!(
        "ACCEPTANCE 1 (geometry self-similarity): PASS — alpha in {{2.5, 3, 3.5}}, n <= 4, set equality within 1e-12 [{:.2}s]",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_2_fem_gradient_oracle() {
    let started = Instant::now();
    let mesh = triangle_mesh(2, 0.017);
    assert!(
        mesh.vertices.len() >= 1500 && mesh.vertices.len() <= 3000,
        "mesh should have ~2k nodes, got {}",
        mesh.vertices.len()
    );
    let mut rng = StdRng::seed_from_u64(20_240_801);
    let mut worst: f64 = 0.0;
    let mut fields = 0;
    for p in [2.5, 4.0, 10.0] {
        for k in [0.0, 1.0] {
            let inst = default_instance(p, k);
            let model = EnergyModel::new(&inst, &mesh).unwrap();
            for _ in 0..17 {
                let u = DiscreteField {
                    values: (0..mesh.vertices.len())
                        .map(|_| rng.random_range(-0.4..0.4))
                        .collect(),
                };
                let d: Vec<f64> = (0..u.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let grad = model.energy_gradient(&u).unwrap();
                let analytic: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
                let h = 1e-6;
                let mut up = u.clone();
                let mut um = u.clone();
                for (i, di) in d.iter().enumerate() {
                    up.values[i] += h * di;
                    um.values[i] -= h * di;
                }
                let fd = (model.energy(&up).unwrap() - model.energy(&um).unwrap()) / (2.0 * h);
                let rel = (analytic - fd).abs() / analytic.abs().max(1e-8);
                worst = worst.max(rel);
                assert!(rel <= 1e-5, "p={p}, k={k}: relative error {rel:.3e}");
                fields += 1;
            }
        }
    }
    assert!(fields >= 100);
    budget("criterion 2", started, 10.0);
    println!(
        "ACCEPTANCE 2 (FEM gradient oracle): PASS — {fields} fields on {} nodes, worst relative error {worst:.3e} <= 1e-5 [{:.2}s]",
        mesh.vertices.len(),
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_3_affine_exactness_and_vi() {
    let started = Instant::now();
    let mesh = triangle_mesh(2, 0.05);
    let inst = affine_instance(3.0, 1.0);
    let sol = solve_ppq(&inst, &mesh, &SolverConfig::default()).unwrap();
    let g = interpolate(inst.g.as_ref(), &mesh).unwrap();
    let err = max_abs_diff(&sol.field.values, &g.values);
    assert!(err <= 1e-7, "nodal max error {err:.3e}");
    let probes = random_probes(&inst, &mesh, &sol.field, 0.3, 50, 17).unwrap();
    let mut min_r = f64::INFINITY;
    for probe in &probes {
        min_r = min_r.min(vi_residual(&inst, &mesh, &sol.field, probe).unwrap());
    }
    assert!(min_r >= -1e-8, "worst VI residual {min_r:.3e}");
    budget("criterion 3", started, 30.0);
    println!(
        "ACCEPTANCE 3 (affine exactness): PASS — nodal error {err:.3e} <= 1e-7, min VI residual over 50 probes {min_r:.3e} >= -1e-8 [{:.2}s]",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_4_uniqueness_from_random_starts() {
    let started = Instant::now();
    let mesh = triangle_mesh(2, 0.05);
    let inst = default_instance(3.0, 0.5);
    let cfg = SolverConfig::default();
    let reference = solve_ppq(&inst, &mesh, &cfg).unwrap();
    assert!(reference.converged);
    assert!(!reference.active_sets.lower.is_empty());
    assert!(!reference.active_sets.upper.is_empty());
    let boxc = BoxConstraints::build(&inst, &mesh).unwrap();
    let mut rng = StdRng::seed_from_u64(4242);
    let mut spread: f64 = 0.0;
    for _ in 0..10 {
        let start = DiscreteField {
            values: boxc.random_probe(&boxc.start(), 0.3, &mut rng),
        };
        let sol = solve_ppq_from(&inst, &mesh, &cfg, Some(&start)).unwrap();
        spread = spread.max(max_abs_diff(&sol.field.values, &reference.field.values));
    }
    assert!(spread <= 1e-6, "max-norm spread {spread:.3e}");
    budget("criterion 4", started, 120.0);
    println!(
        "ACCEPTANCE 4 (uniqueness): PASS — 10 random starts on {} nodes agree within {spread:.3e} <= 1e-6 [{:.2}s]",
        mesh.vertices.len(),
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_5_p_limit_bound_audit() {
    let started = Instant::now();
    // k = 0 keeps L^2 + k^2 = 0.09 <= 1: the limit problem is the capped
    // q-energy with M = 1.
    let mesh = triangle_mesh(2, 0.06);
    let inst = default_instance(3.0, 0.0);
    let bound = inst.limit_bound();
    assert_eq!(bound, 1.0);
    let cfg = SolverConfig {
        max_iters: 200_000,
        ..SolverConfig::default()
    };
    let out = p_sweep(&inst, &mesh, &PSweepOptions::default(), &cfg).unwrap();
    assert!(!out.limit_is_lipschitz);
    let last = out.report.points.last().unwrap();
    assert_eq!(last.param, 256.0);
    assert!(
        last.max_element_gradient <= bound + 0.05,
        "max element gradient {} exceeds {} + 0.05",
        last.max_element_gradient,
        bound
    );
    // Sup-norm distance to the capped-q solution decreasing along the
    // schedule, allowing 10% jitter.
    let dists: Vec<f64> = out.report.points.iter().map(|p| p.sup_diff_final).collect();
    for w in dists.windows(2) {
        assert!(
            w[1] <= 1.10 * w[0],
            "distance to the limit rose beyond jitter: {} -> {} (full: {dists:?})",
            w[0],
            w[1]
        );
    }
    assert!(
        dists.last().unwrap() < dists.first().unwrap(),
        "no overall decrease: {dists:?}"
    );
    budget("criterion 5", started, 600.0);
    println!(
        "ACCEPTANCE 5 (p->inf bound audit): PASS — max|grad u_256| = {:.4} <= 1.05, sup distances {:?} decreasing within 10% jitter [{:.2}s]",
        last.max_element_gradient,
        dists.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>(),
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_6_n_limit_trend_audit() {
    let started = Instant::now();
    let inst = default_instance(3.0, 1.0);
    let family = DomainFamily::new(regular_polygon(3), ifs3(), vec![1, 2, 3, 4]);
    let opts = NSweepOptions {
        mesh: MeshOptions::new(0.012, 1.25),
        grid_spacing: None,
        fiber_params: None,
    };
    let cfg = SolverConfig {
        max_iters: 200_000,
        ..SolverConfig::default()
    };
    let out = n_sweep(&inst, &family, &opts, &cfg).unwrap();
    // Recovery fields feasible and never beating the minimizer.
    for rc in &out.recovery {
        assert!(rc.feasible, "recovery infeasible at level {}", rc.level);
        assert!(
            rc.matches_datum_on_boundary,
            "datum mismatch at level {}",
            rc.level
        );
        assert!(
            rc.energy_solution <= rc.energy_recovery + 1e-9,
            "level {}: J(u) = {} > J(v) = {}",
            rc.level,
            rc.energy_solution,
            rc.energy_recovery
        );
    }
    // Pairwise extended-field W^{1,p} surrogates decreasing across the last
    // three levels.
    let w1p: Vec<f64> = out.pair_distances.iter().map(|d| d.2).collect();
    assert_eq!(w1p.len(), 3);
    assert!(
        w1p[1] < w1p[0] && w1p[2] < w1p[1],
        "pairwise distances not decreasing: {w1p:?}"
    );
    budget("criterion 6", started, 900.0);
    println!(
        "ACCEPTANCE 6 (n->inf trend audit): PASS — recovery feasible and dominated on all levels, pairwise W1p distances {:?} decreasing [{:.2}s]",
        w1p.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>(),
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_7_cutoff_model_identity() {
    let started = Instant::now();
    let domain = triangle_domain(2);
    let theta_minus = 0.4;
    let params = FiberParams::new(domain.ifs.theta(), theta_minus).unwrap();
    let fibers = build_fibers(&domain, params).unwrap();
    // Pick one boundary segment and derive its frame independently of the
    // fiber construction.
    let seg_index = 7;
    let (a, b) = domain.segment(seg_index);
    let len = a.dist(b);
    let e = (b - a) / len;
    let inward = e.perp();
    let slope = theta_minus.tan();
    let mut rng = StdRng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        // Random point of the half fiber adjacent to `a`: 0 < xi <= len/2,
        // 0 <= eta <= slope * xi.
        let xi = rng.random_range(0.02 * len..0.5 * len);
        let eta = rng.random_range(0.0..slope * xi);
        let p = a + e * xi + inward * eta;
        let got = fibers.lambda_eval(&domain, p);
        let expect = eta / (xi * slope);
        worst = worst.max((got - expect).abs());
    }
    assert!(worst <= 1e-10, "worst model-case error {worst:.3e}");
    budget("criterion 7", started, 1.0);
    println!(
        "ACCEPTANCE 7 (cutoff model identity): PASS — 1000 points, worst |lambda - x2/(x1 a)| = {worst:.3e} <= 1e-10 [{:.2}s]",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_8_integrability_stability() {
    let started = Instant::now();
    let mesh = triangle_mesh(2, 0.06);
    let inst = default_instance(3.0, 0.5);
    let cfg = SolverConfig::default();
    let sol = solve_ppq(&inst, &mesh, &cfg).unwrap();
    let rows = integrability_diagnostic(&inst, &mesh, &sol, &[0.05, 0.1], &cfg).unwrap();
    for row in &rows {
        for (i, r) in row.ratios.iter().enumerate() {
            assert!(
                (r - 1.0).abs() <= 0.10,
                "eps {}: refinement {} changed the norm by {:.2}%",
                row.eps,
                i + 1,
                (r - 1.0).abs() * 100.0
            );
        }
    }
    budget("criterion 8", started, 600.0);
    let summary: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "eps={}: [{:.5}, {:.5}, {:.5}]",
                r.eps, r.norms[0], r.norms[1], r.norms[2]
            )
        })
        .collect();
    println!(
        "ACCEPTANCE 8 (integrability stability): PASS — {} within 10% per refinement [{:.2}s]",
        summary.join("; "),
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_9_determinism() {
    let started = Instant::now();
    let config = r#"
[run]
mode = solve

[geometry]
base = triangle
alpha = 3.0
n = 2

[problem]
p = 3.0
q = 2.0
k = 0.5
f = 60*max(0, 1 - 16*((x1-0.82)^2 + (x2-0.18)^2))
g = 0.3*x1
phi1 = 0.3 - 0.9*((x1-0.5)^2 + (x2-0.288675134594813)^2)^0.5
phi2 = 0.4
lipschitz = 0.3

[mesh]
h_max = 0.06
grading = 2.0

[diagnostics]
vi_probes = 20
"#;
    let base = std::env::temp_dir().join(format!("kochfem-acc9-{}", std::process::id()));
    let dir_a = base.join("a");
    let dir_b = base.join("b");
    let out_a = kochfem_cli::run::run_config_text(config, Some(&dir_a), 5).unwrap();
    let out_b = kochfem_cli::run::run_config_text(config, Some(&dir_b), 5).unwrap();
    assert_eq!(out_a.files, out_b.files);
    let mut compared = 0;
    for name in &out_a.files {
        if name == "summary.txt" {
            continue; // carries wall-clock timings
        }
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between reruns");
        compared += 1;
    }
    assert!(compared >= 4);
    let _ = std::fs::remove_dir_all(&base);
    println!(
        "ACCEPTANCE 9 (determinism): PASS — {compared} artifacts byte-identical across reruns [{:.2}s]",
        started.elapsed().as_secs_f64()
    );
}
