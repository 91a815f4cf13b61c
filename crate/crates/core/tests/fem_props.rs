//! Energy/gradient consistency properties: finite-difference oracle,
//! convexity along segments, agreement of the two assembly routes.

mod common;

use common::*;
use kochfem::fem::{DiscreteField, EnergyModel};
use kochfem::mesh::Mesh;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_field(mesh: &Mesh, amplitude: f64, rng: &mut StdRng) -> DiscreteField {
    DiscreteField {
        values: (0..mesh.vertices.len())
            .map(|_| rng.random_range(-amplitude..amplitude))
            .collect(),
    }
}

/// Directional central finite difference of the energy.
fn directional_fd(model: &EnergyModel, u: &DiscreteField, d: &[f64], h: f64) -> f64 {
    let mut up = u.clone();
    let mut um = u.clone();
    for (i, di) in d.iter().enumerate() {
        up.values[i] += h * di;
        um.values[i] -= h * di;
    }
    (model.energy(&up).unwrap() - model.energy(&um).unwrap()) / (2.0 * h)
}

#[test]
fn gradient_matches_directional_fd_across_exponents() {
    // 100 random fields and directions across the exponent/k matrix,
    // relative error <= 1e-5 at h = 1e-6.
    let mesh = triangle_mesh(1, 0.15);
    let mut rng = StdRng::seed_from_u64(2024);
    let mut checked = 0;
    for (p, k) in [
        (2.5, 0.0),
        (2.5, 1.0),
        (4.0, 0.0),
        (4.0, 1.0),
        (10.0, 0.0),
        (10.0, 1.0),
    ] {
        let inst = default_instance(p, k);
        let model = EnergyModel::new(&inst, &mesh).unwrap();
        for _ in 0..17 {
            let u = random_field(&mesh, 0.4, &mut rng);
            let d: Vec<f64> = (0..u.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let grad = model.energy_gradient(&u).unwrap();
            let analytic: f64 = grad.iter().zip(&d).map(|(g, di)| g * di).sum();
            let fd = directional_fd(&model, &u, &d, 1e-6);
            let denom = analytic.abs().max(1e-8);
            assert!(
                (analytic - fd).abs() / denom <= 1e-5,
                "p={p} k={k}: analytic {analytic}, fd {fd}"
            );
            checked += 1;
        }
    }
    assert!(checked >= 100);
}

#[test]
fn gradient_matches_componentwise_fd() {
    let mesh = triangle_mesh(1, 0.2);
    let inst = default_instance(3.5, 0.5);
    let model = EnergyModel::new(&inst, &mesh).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let u = random_field(&mesh, 0.3, &mut rng);
    let grad = model.energy_gradient(&u).unwrap();
    let h = 1e-6;
    for _ in 0..25 {
        let i = rng.random_range(0..u.len());
        let mut up = u.clone();
        let mut um = u.clone();
        up.values[i] += h;
        um.values[i] -= h;
        let fd = (model.energy(&up).unwrap() - model.energy(&um).unwrap()) / (2.0 * h);
        assert!(
            (grad[i] - fd).abs() <= 1e-6 * (1.0 + grad[i].abs()),
            "component {i}: {} vs {}",
            grad[i],
            fd
        );
    }
}

#[test]
fn dual_assembly_routes_agree() {
    // energy_gradient . (v - u) equals the directly assembled VI form.
    let mesh = triangle_mesh(1, 0.15);
    let inst = default_instance(3.0, 1.0);
    let model = EnergyModel::new(&inst, &mesh).unwrap();
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..50 {
        let u = random_field(&mesh, 0.5, &mut rng);
        let v = random_field(&mesh, 0.5, &mut rng);
        let grad = model.energy_gradient(&u).unwrap();
        let via_gradient: f64 = grad
            .iter()
            .zip(u.values.iter().zip(&v.values))
            .map(|(g, (ui, vi))| g * (vi - ui))
            .sum();
        let via_form = model.vi_form(&u.values, &v.values);
        assert!(
            (via_gradient - via_form).abs() <= 1e-10 * (1.0 + via_gradient.abs()),
            "{via_gradient} vs {via_form}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_convex_along_segments(seed in 0u64..1000) {
        // energy(t u + (1-t) v) <= t energy(u) + (1-t) energy(v) + 1e-12.
        let mesh = triangle_mesh(0, 0.35);
        let inst = default_instance(3.0, 0.5);
        let model = EnergyModel::new(&inst, &mesh).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let u = random_field(&mesh, 0.2, &mut rng);
        let v = random_field(&mesh, 0.2, &mut rng);
        let eu = model.energy(&u).unwrap();
        let ev = model.energy(&v).unwrap();
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let mix = DiscreteField {
                values: u
                    .values
                    .iter()
                    .zip(&v.values)
                    .map(|(a, b)| t * a + (1.0 - t) * b)
                    .collect(),
            };
            let em = model.energy(&mix).unwrap();
            prop_assert!(em <= t * eu + (1.0 - t) * ev + 1e-12);
        }
    }

    #[test]
    fn scaled_energies_order_consistently(scale_pow in -40i32..40) {
        // Ordering of energies is invariant under the power-of-two damping
        // used by the solver.
        let mesh = triangle_mesh(0, 0.35);
        let inst = default_instance(6.0, 0.5);
        let model = EnergyModel::new(&inst, &mesh).unwrap();
        let mut rng = StdRng::seed_from_u64(scale_pow.unsigned_abs() as u64 + 17);
        let u = random_field(&mesh, 0.5, &mut rng);
        let v = random_field(&mesh, 0.5, &mut rng);
        let s = scale_pow as f64;
        let (eu, ev) = (model.energy_scaled(&u.values, s), model.energy_scaled(&v.values, s));
        let (eu0, ev0) = (model.energy_scaled(&u.values, 0.0), model.energy_scaled(&v.values, 0.0));
        prop_assert_eq!(eu < ev, eu0 < ev0);
    }
}
