//! Parallel vs sequential assembly benchmarks.
//!
//! Compares the rayon-backed element loops against the sequential fallback
//! on energy evaluation, gradient assembly and batched cutoff evaluation.
//! Built with the default `parallel` feature both modes are exercised; the
//! chunked reductions make their results bit-identical, so the comparison
//! is purely about throughput. Without the feature the "parallel" series
//! degenerates to a second sequential run.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kochfem::fem::DiscreteField;
use kochfem::fibers::{build_fibers, FiberParams};
use kochfem::field::{Constant, FnField};
use kochfem::geometry::{build_domain, regular_polygon, IfsParams};
use kochfem::mesh::triangulate;
use kochfem::par::ExecMode;
use kochfem::point::Point2;
use kochfem::{EnergyModel, ProblemInstance};
use std::hint::black_box;
use std::sync::Arc;

fn instance(p: f64) -> ProblemInstance {
    ProblemInstance::new(
        p,
        2.0,
        0.5,
        Arc::new(FnField(|x: Point2| {
            60.0 * (1.0 - 16.0 * ((x.x - 0.82).powi(2) + (x.y - 0.18).powi(2))).max(0.0)
        })),
        Arc::new(FnField(|x: Point2| 0.3 * x.x)),
        Arc::new(Constant(f64::NEG_INFINITY)),
        Arc::new(Constant(f64::INFINITY)),
        0.3,
    )
    .unwrap()
}

fn modes() -> [(&'static str, ExecMode); 2] {
    [("seq", ExecMode::Sequential), ("par", ExecMode::Parallel)]
}

fn bench_energy(c: &mut Criterion) {
    let ifs = IfsParams::new(3.0).unwrap();
    let domain = build_domain(&regular_polygon(3), 3, &ifs).unwrap();
    let mesh = triangulate(&domain, 0.015, 1.5).unwrap();
    let inst = instance(8.0);
    let field = DiscreteField {
        values: mesh
            .vertices
            .iter()
            .map(|v| (3.0 * v.x).sin() * 0.2)
            .collect(),
    };
    let mut group = c.benchmark_group("energy");
    group.throughput(Throughput::Elements(mesh.triangles.len() as u64));
    for (name, mode) in modes() {
        let model = EnergyModel::new(&inst, &mesh).unwrap().with_mode(mode);
        group.bench_with_input(BenchmarkId::from_parameter(name), &model, |b, m| {
            b.iter(|| black_box(m.energy_scaled(&field.values, 0.0)))
        });
    }
    group.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let ifs = IfsParams::new(3.0).unwrap();
    let domain = build_domain(&regular_polygon(3), 3, &ifs).unwrap();
    let mesh = triangulate(&domain, 0.015, 1.5).unwrap();
    let inst = instance(8.0);
    let field = DiscreteField {
        values: mesh
            .vertices
            .iter()
            .map(|v| (2.0 * v.y).cos() * 0.2)
            .collect(),
    };
    let mut group = c.benchmark_group("gradient");
    group.throughput(Throughput::Elements(mesh.triangles.len() as u64));
    for (name, mode) in modes() {
        let model = EnergyModel::new(&inst, &mesh).unwrap().with_mode(mode);
        group.bench_with_input(BenchmarkId::from_parameter(name), &model, |b, m| {
            b.iter(|| black_box(m.gradient_scaled(&field.values, 0.0)))
        });
    }
    group.finish();
}

fn bench_lambda_batch(c: &mut Criterion) {
    let ifs = IfsParams::new(3.0).unwrap();
    let domain = build_domain(&regular_polygon(3), 4, &ifs).unwrap();
    let fibers = build_fibers(&domain, FiberParams::default_for(ifs.theta())).unwrap();
    let (lo, hi) = domain.bbox();
    let n = 256usize;
    let mut points = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push(Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / (n - 1) as f64,
                lo.y + (hi.y - lo.y) * j as f64 / (n - 1) as f64,
            ));
        }
    }
    let mut group = c.benchmark_group("lambda_batch");
    group.throughput(Throughput::Elements(points.len() as u64));
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| black_box(fibers.lambda_eval_batch(&domain, &points, m)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_energy, bench_gradient, bench_lambda_batch);
criterion_main!(benches);
