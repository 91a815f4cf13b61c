//! Shared fixtures for the acceptance suite.
#![allow(dead_code)]

use kochfem::fem::ProblemInstance;
use kochfem::field::{Constant, FnField};
use kochfem::geometry::{build_domain, regular_polygon, IfsParams, PrefractalDomain};
use kochfem::mesh::{triangulate, Mesh};
use kochfem::point::Point2;
use std::sync::Arc;

pub const CENTROID: Point2 = Point2::new(0.5, 0.288_675_134_594_812_9);

pub fn ifs3() -> IfsParams {
    IfsParams::new(3.0).unwrap()
}

pub fn triangle_domain(n: u32) -> PrefractalDomain {
    build_domain(&regular_polygon(3), n, &ifs3()).unwrap()
}

pub fn triangle_mesh(n: u32, h: f64) -> Mesh {
    triangulate(&triangle_domain(n), h, 2.0).unwrap()
}

/// The default obstacle-active experiment used across the acceptance runs:
/// triangle base, alpha = 3, q = 2, g = 0.3 x1 (L = 0.3), lower-obstacle
/// cone peaking above the datum at the centroid, flat upper obstacle 0.4,
/// and a localized load bump pressing the solution onto it. Both obstacles
/// are active for k in {0, 0.5, 1}.
pub fn default_instance(p: f64, k: f64) -> ProblemInstance {
    ProblemInstance::new(
        p,
        2.0,
        k,
        Arc::new(FnField(|x: Point2| {
            60.0 * (1.0 - 16.0 * ((x.x - 0.82).powi(2) + (x.y - 0.18).powi(2))).max(0.0)
        })),
        Arc::new(FnField(|x: Point2| 0.3 * x.x)),
        Arc::new(FnField(|x: Point2| 0.3 - 0.9 * (x - CENTROID).norm())),
        Arc::new(Constant(0.4)),
        0.3,
    )
    .unwrap()
}

pub fn affine_instance(p: f64, k: f64) -> ProblemInstance {
    ProblemInstance::new(
        p,
        2.0,
        k,
        Arc::new(Constant(0.0)),
        Arc::new(FnField(|x: Point2| 0.3 * x.x - 0.1 * x.y)),
        Arc::new(Constant(-5.0)),
        Arc::new(Constant(5.0)),
        (0.3f64 * 0.3 + 0.1 * 0.1).sqrt(),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
