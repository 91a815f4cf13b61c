//! Geometry invariants: self-similarity, decay, nesting.

mod common;

use kochfem::geometry::{
    apply_similitude, build_domain, generate_prefractal, regular_polygon, IfsParams,
};
use kochfem::point::Point2;

const A: Point2 = Point2::new(0.0, 0.0);
const B: Point2 = Point2::new(1.0, 0.0);

/// Set distance between vertex sets (max over one of min distance to the
/// other, symmetrized).
fn vertex_set_distance(xs: &[Point2], ys: &[Point2]) -> f64 {
    let one_way = |from: &[Point2], to: &[Point2]| {
        from.iter()
            .map(|p| to.iter().map(|q| p.dist(*q)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    one_way(xs, ys).max(one_way(ys, xs))
}

#[test]
fn self_similarity_refinement_identity() {
    // K^n = union of psi_i(K^{n-1}) as vertex sets, within 1e-12.
    for alpha in [2.5, 3.0, 3.5] {
        let ifs = IfsParams::new(alpha).unwrap();
        for n in 1..=4u32 {
            let coarse = generate_prefractal(n - 1, &ifs, A, B).unwrap();
            let fine = generate_prefractal(n, &ifs, A, B).unwrap();
            let mut mapped: Vec<Point2> = Vec::new();
            for i in 1..=4 {
                mapped.extend(
                    coarse
                        .vertices
                        .iter()
                        .map(|&v| apply_similitude(i, &ifs, v)),
                );
            }
            let d = vertex_set_distance(&fine.vertices, &mapped);
            assert!(d <= 1e-12, "alpha={alpha} n={n}: set distance {d}");
            // Counts and length are exact.
            assert_eq!(fine.segment_count(), 4usize.pow(n));
            let expect_len = (4.0 / alpha).powi(n as i32);
            assert!((fine.total_length() - expect_len).abs() <= 1e-12 * expect_len);
        }
    }
}

#[test]
fn endpoints_and_segment_homogeneity() {
    for alpha in [2.2, 3.0, 3.9] {
        let ifs = IfsParams::new(alpha).unwrap();
        let a = Point2::new(-0.3, 0.7);
        let b = Point2::new(1.1, -0.2);
        for n in 0..=4u32 {
            let c = generate_prefractal(n, &ifs, a, b).unwrap();
            assert_eq!(c.vertices.len(), 4usize.pow(n) + 1);
            assert!(c.vertices[0].dist(a) == 0.0);
            assert!(c.vertices.last().unwrap().dist(b) == 0.0);
            let expect = a.dist(b) * alpha.powi(-(n as i32));
            for w in c.vertices.windows(2) {
                assert!((w[0].dist(w[1]) - expect).abs() <= 1e-12 * expect.max(1.0));
            }
        }
    }
}

#[test]
fn hausdorff_distance_decays_geometrically() {
    let ifs = IfsParams::new(3.0).unwrap();
    // Distance from K^n vertices to the K^{n+1} polyline and vice versa,
    // bounded by C alpha^{-n} with stable C.
    let polyline_dist = |pts: &[Point2], poly: &[Point2]| -> f64 {
        pts.iter()
            .map(|&p| {
                poly.windows(2)
                    .map(|w| kochfem::point::dist_sq_to_segment(p, w[0], w[1]).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    let mut cs = Vec::new();
    for n in 0..5u32 {
        let kn = generate_prefractal(n, &ifs, A, B).unwrap();
        let kn1 = generate_prefractal(n + 1, &ifs, A, B).unwrap();
        let h = polyline_dist(&kn1.vertices, &kn.vertices)
            .max(polyline_dist(&kn.vertices, &kn1.vertices));
        cs.push(h * 3f64.powi(n as i32));
    }
    let cmax = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(cmin > 0.0);
    assert!(cmax / cmin < 1.5, "fitted constants not stable: {cs:?}");
}

#[test]
fn domain_nesting_matches_snowflake_progression() {
    // The level-n domain contains every level-(n-1) boundary vertex
    // (outward growth), strictly so away from the persistent base lines.
    let ifs = IfsParams::new(3.0).unwrap();
    let base = regular_polygon(3);
    for n in 1..=4u32 {
        let coarse = build_domain(&base, n - 1, &ifs).unwrap();
        let fine = build_domain(&base, n, &ifs).unwrap();
        assert!(fine.area > coarse.area);
        for &v in &coarse.boundary {
            let inside = fine.contains(v) || fine.on_boundary(v, 1e-9);
            assert!(
                inside,
                "n={n}: level-{} vertex ({}, {}) escaped",
                n - 1,
                v.x,
                v.y
            );
        }
    }
}

#[test]
fn boundary_segment_counts() {
    let ifs = IfsParams::new(3.0).unwrap();
    for (sides, n) in [(3usize, 0u32), (3, 2), (4, 1), (6, 2)] {
        let d = build_domain(&regular_polygon(sides), n, &ifs).unwrap();
        assert_eq!(d.segment_count(), sides * 4usize.pow(n));
    }
}
