//! Inner/outer fiber triangle arrays along a pre-fractal boundary and the
//! convex-combination cutoff coefficient evaluated on them.
//!
//! Per boundary segment there is one outer triangle (apex height
//! `|s| tan(theta/2) / 2` on the outward side) and one inner triangle (apex
//! height `|s| tan(theta_minus) / 2` on the inward side); both are the images
//! of fixed unit-segment templates under the segment similarity. The cutoff
//! is 1 on the trimmed interior, 0 outside the domain, and interpolates
//! linearly across each inner triangle as the ratio of taxicab distances
//! from the boundary measured along the projection line; in the
//! segment-aligned frame of a half fiber this is exactly `x2 / (x1 * a)`
//! with `a = tan(theta_minus)`.

use crate::error::FiberError;
use crate::field::ScalarField;
use crate::geometry::PrefractalDomain;
use crate::par::{indexed_map, ExecMode};
use crate::point::Point2;
use std::ops::Range;

#[derive(Debug, Clone, Copy)]
pub struct FiberParams {
    pub theta_minus: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// Model-case slope, `tan(theta_minus)`.
    pub a: f64,
}

impl FiberParams {
    /// Admissible range for `theta_minus` is `(0, min(pi/2 - theta, theta/2)]`;
    /// the upper bound carries an ulp-scale slack so the closed endpoint
    /// survives rounding of `theta`.
    pub fn new(theta: f64, theta_minus: f64) -> Result<Self, FiberError> {
        let max = (std::f64::consts::FRAC_PI_2 - theta).min(theta / 2.0);
        if theta_minus.is_nan() || theta_minus <= 0.0 || theta_minus > max * (1.0 + 1e-12) {
            return Err(FiberError::ThetaMinusOutOfRange {
                got: theta_minus,
                max,
            });
        }
        Ok(Self {
            theta_minus,
            delta_plus: (theta / 2.0).tan(),
            delta_minus: theta_minus.tan(),
            a: theta_minus.tan(),
        })
    }

    /// Default: the midpoint of the admissible range, clear of both
    /// degenerate endpoints.
    pub fn default_for(theta: f64) -> Self {
        let max = (std::f64::consts::FRAC_PI_2 - theta).min(theta / 2.0);
        Self::new(theta, max / 2.0).expect("interior of admissible range")
    }
}

/// One fiber triangle: base on a boundary segment, apex inside or outside.
#[derive(Debug, Clone, Copy)]
pub struct FiberTriangle {
    pub base_a: Point2,
    pub base_b: Point2,
    pub apex: Point2,
}

impl FiberTriangle {
    pub fn area(&self) -> f64 {
        crate::point::signed_area(self.base_a, self.base_b, self.apex).abs()
    }

    /// Inclusive containment (edges count as inside), tolerance relative to
    /// the base length.
    pub fn contains(&self, p: Point2, rel_tol: f64) -> bool {
        let scale = self.base_a.dist(self.base_b);
        let tol = rel_tol * scale * scale;
        let s1 = (self.base_b - self.base_a).cross(p - self.base_a);
        let s2 = (self.apex - self.base_b).cross(p - self.base_b);
        let s3 = (self.base_a - self.apex).cross(p - self.apex);
        (s1 >= -tol && s2 >= -tol && s3 >= -tol) || (s1 <= tol && s2 <= tol && s3 <= tol)
    }

    fn bbox(&self) -> (Point2, Point2) {
        let lo = Point2::new(
            self.base_a.x.min(self.base_b.x).min(self.apex.x),
            self.base_a.y.min(self.base_b.y).min(self.apex.y),
        );
        let hi = Point2::new(
            self.base_a.x.max(self.base_b.x).max(self.apex.x),
            self.base_a.y.max(self.base_b.y).max(self.apex.y),
        );
        (lo, hi)
    }
}

/// Fiber arrays for one pre-fractal level with a bucket grid over the inner
/// triangles for point attribution.
pub struct FiberArray {
    pub level: u32,
    pub params: FiberParams,
    pub inner: Vec<FiberTriangle>,
    pub outer: Vec<FiberTriangle>,
    /// Triangle index range per base-polygon side.
    pub side_index: Vec<Range<usize>>,
    grid: TriangleGrid,
}

struct TriangleGrid {
    lo: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl TriangleGrid {
    fn build(tris: &[FiberTriangle]) -> TriangleGrid {
        let mut lo = tris[0].base_a;
        let mut hi = lo;
        let mut max_ext = 0.0f64;
        for t in tris {
            let (l, h) = t.bbox();
            lo = Point2::new(lo.x.min(l.x), lo.y.min(l.y));
            hi = Point2::new(hi.x.max(h.x), hi.y.max(h.y));
            max_ext = max_ext.max((h.x - l.x).max(h.y - l.y));
        }
        let cell = (max_ext * 1.25).max(1e-300);
        let nx = (((hi.x - lo.x) / cell).ceil() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let clampc = |v: f64, origin: f64, count: usize| {
            (((v - origin) / cell).floor().max(0.0) as usize).min(count - 1)
        };
        for (i, t) in tris.iter().enumerate() {
            let (l, h) = t.bbox();
            for cy in clampc(l.y, lo.y, ny)..=clampc(h.y, lo.y, ny) {
                for cx in clampc(l.x, lo.x, nx)..=clampc(h.x, lo.x, nx) {
                    buckets[cy * nx + cx].push(i as u32);
                }
            }
        }
        TriangleGrid {
            lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn candidates(&self, p: Point2) -> &[u32] {
        let ix = ((p.x - self.lo.x) / self.cell).floor();
        let iy = ((p.y - self.lo.y) / self.cell).floor();
        if ix < 0.0 || iy < 0.0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return &[];
        }
        &self.buckets[iy as usize * self.nx + ix as usize]
    }
}

/// Builds the inner and outer fiber arrays for every boundary segment.
///
/// Fails when an inner apex (or an inner slant-edge midpoint) leaves the
/// domain, which signals `theta_minus` too large for the base polygon.
pub fn build_fibers(
    domain: &PrefractalDomain,
    params: FiberParams,
) -> Result<FiberArray, FiberError> {
    let m = domain.segment_count();
    let mut inner = Vec::with_capacity(m);
    let mut outer = Vec::with_capacity(m);
    for i in 0..m {
        let (a, b) = domain.segment(i);
        let len = a.dist(b);
        let mid = (a + b) * 0.5;
        // Boundary runs counterclockwise: outward is the right of travel.
        let out_n = -(b - a).perp() / len;
        outer.push(FiberTriangle {
            base_a: a,
            base_b: b,
            apex: mid + out_n * (len * params.delta_plus / 2.0),
        });
        inner.push(FiberTriangle {
            base_a: a,
            base_b: b,
            apex: mid - out_n * (len * params.delta_minus / 2.0),
        });
    }
    for (i, t) in inner.iter().enumerate() {
        let probes = [t.apex, (t.base_a + t.apex) * 0.5, (t.base_b + t.apex) * 0.5];
        for p in probes {
            if !domain.contains(p) {
                return Err(FiberError::InnerFiberOutside { index: i });
            }
        }
    }
    let per_side = m / domain.base.len();
    let side_index = (0..domain.base.len())
        .map(|s| s * per_side..(s + 1) * per_side)
        .collect();
    let grid = TriangleGrid::build(&inner);
    Ok(FiberArray {
        level: domain.level,
        params,
        inner,
        outer,
        side_index,
        grid,
    })
}

impl FiberArray {
    /// Total area of the inner fiber family.
    pub fn inner_area(&self) -> f64 {
        self.inner.iter().map(|t| t.area()).sum()
    }

    /// Index of the inner fiber triangle containing `p`, lowest index first
    /// on shared edges.
    pub fn inner_triangle_at(&self, p: Point2) -> Option<usize> {
        let mut hit: Option<u32> = None;
        for &i in self.grid.candidates(p) {
            if self.inner[i as usize].contains(p, 1e-12) {
                hit = Some(match hit {
                    Some(j) => j.min(i),
                    None => i,
                });
            }
        }
        hit.map(|i| i as usize)
    }

    /// Cutoff coefficient: 1 on the trimmed interior, the taxicab distance
    /// ratio inside an inner fiber triangle, 0 outside the domain. Edge
    /// points resolve by containing-region priority (trimmed interior, then
    /// fiber, then outside); the adjacent formulas agree there, so the
    /// priority only fixes which branch computes the value.
    pub fn lambda_eval(&self, domain: &PrefractalDomain, p: Point2) -> f64 {
        if let Some(i) = self.inner_triangle_at(p) {
            let t = &self.inner[i];
            let len = t.base_a.dist(t.base_b);
            let e = (t.base_b - t.base_a) / len;
            // Inward unit normal: the apex side of the base.
            let inw = e.perp();
            let rel = p - t.base_a;
            let xi = rel.dot(e);
            let eta = rel.dot(inw);
            // Height of the inner edge above the base at abscissa xi; the
            // projection line is vertical in this frame, so the taxicab
            // ratio collapses to eta over the edge height.
            let half = 0.5 * len;
            let reach = xi.min(len - xi);
            debug_assert!(half > 0.0);
            let denom = self.params.a * reach;
            if denom <= 0.0 {
                return 0.0; // corner of the boundary: both ratios vanish
            }
            return (eta / denom).clamp(0.0, 1.0);
        }
        if domain.contains(p) {
            1.0
        } else {
            0.0
        }
    }

    /// Batched cutoff evaluation with deterministic output ordering.
    pub fn lambda_eval_batch(
        &self,
        domain: &PrefractalDomain,
        points: &[Point2],
        mode: ExecMode,
    ) -> Vec<f64> {
        indexed_map(points.len(), mode, |i| self.lambda_eval(domain, points[i]))
    }

    /// Membership in the outer hull (domain plus outer fibers).
    pub fn in_omega_hat(&self, domain: &PrefractalDomain, p: Point2) -> bool {
        if domain.contains(p) || domain.on_boundary(p, 1e-12) {
            return true;
        }
        self.outer.iter().any(|t| t.contains(p, 1e-12))
    }

    /// Membership in the trimmed interior (domain minus closed inner fibers).
    pub fn in_omega_breve(&self, domain: &PrefractalDomain, p: Point2) -> bool {
        domain.contains(p) && self.inner_triangle_at(p).is_none()
    }
}

/// Nodewise recovery field `clamp(lambda u + (1 - lambda) g, phi1, phi2)`.
///
/// Boundary nodes take the boundary datum exactly (their cutoff vanishes);
/// the result satisfies `phi1 <= v <= phi2` at every node and `v = g` on the
/// boundary. Fails when the obstacles cross or the boundary datum leaves the
/// obstacle interval at a boundary node.
#[allow(clippy::too_many_arguments)]
pub fn recovery_sequence(
    fibers: &FiberArray,
    domain: &PrefractalDomain,
    nodes: &[Point2],
    is_boundary: &[bool],
    u: &dyn ScalarField,
    g: &dyn ScalarField,
    phi1: &dyn ScalarField,
    phi2: &dyn ScalarField,
) -> Result<Vec<f64>, FiberError> {
    assert_eq!(nodes.len(), is_boundary.len());
    let mut out = Vec::with_capacity(nodes.len());
    for (i, &x) in nodes.iter().enumerate() {
        let lo = phi1.eval(x);
        let hi = phi2.eval(x);
        if lo > hi {
            return Err(FiberError::ObstaclesCross {
                node: i,
                phi1: lo,
                phi2: hi,
            });
        }
        let gx = g.eval(x);
        if is_boundary[i] {
            if gx < lo || gx > hi {
                return Err(FiberError::BoundaryIncompatible {
                    node: i,
                    g: gx,
                    phi1: lo,
                    phi2: hi,
                });
            }
            out.push(gx);
            continue;
        }
        let lam = fibers.lambda_eval(domain, x);
        let w = lam * u.eval(x) + (1.0 - lam) * gx;
        out.push(w.clamp(lo, hi));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, regular_polygon, IfsParams};

    const CENTROID_NODE: Point2 = Point2::new(0.5, 0.288_675_134_594_812_9);

    fn tri_domain(n: u32) -> PrefractalDomain {
        let ifs = IfsParams::new(3.0).unwrap();
        build_domain(&regular_polygon(3), n, &ifs).unwrap()
    }

    #[test]
    fn params_bounds() {
        let theta = std::f64::consts::FRAC_PI_3; // alpha = 3
        let p = FiberParams::new(theta, std::f64::consts::PI / 6.0).unwrap();
        assert!((p.delta_plus - (theta / 2.0).tan()).abs() < 1e-16);
        assert!((p.delta_minus - (std::f64::consts::PI / 6.0).tan()).abs() < 1e-16);
        assert!(FiberParams::new(theta, 0.0).is_err());
        assert!(FiberParams::new(theta, std::f64::consts::PI / 6.0 + 1e-9).is_err());
        let d = FiberParams::default_for(theta);
        assert!(d.theta_minus > 0.0 && d.theta_minus < std::f64::consts::PI / 6.0);
    }

    #[test]
    fn level_zero_inner_apex_height() {
        let domain = tri_domain(0);
        let params = FiberParams::new(domain.ifs.theta(), std::f64::consts::PI / 6.0).unwrap();
        let fibers = build_fibers(&domain, params).unwrap();
        // Bottom side (0,0)-(1,0): inner apex points up with height tan(pi/6)/2.
        let t = &fibers.inner[0];
        assert!(t.base_a.dist(Point2::new(0.0, 0.0)) < 1e-15);
        assert!(t.base_b.dist(Point2::new(1.0, 0.0)) < 1e-15);
        assert!((t.apex.x - 0.5).abs() < 1e-15);
        assert!((t.apex.y - (std::f64::consts::PI / 6.0).tan() / 2.0).abs() < 1e-15);
        assert!((t.apex.y - 0.288_675_134_594_812_9).abs() < 1e-12);
    }

    #[test]
    fn counts_and_area_decay() {
        let params = FiberParams::default_for(std::f64::consts::FRAC_PI_3);
        let mut prev = f64::INFINITY;
        for n in 0..4 {
            let domain = tri_domain(n);
            let fibers = build_fibers(&domain, params).unwrap();
            assert_eq!(fibers.inner.len(), 3 * 4usize.pow(n));
            assert_eq!(fibers.outer.len(), 3 * 4usize.pow(n));
            let expect =
                3.0 * 4f64.powi(n as i32) * 3f64.powi(-2 * n as i32) * (params.delta_minus / 4.0);
            let total = fibers.inner_area();
            assert!((total - expect).abs() < 1e-12 * expect.max(1.0));
            assert!(total < prev);
            prev = total;
        }
    }

    #[test]
    fn lambda_branches() {
        let domain = tri_domain(1);
        let params = FiberParams::default_for(domain.ifs.theta());
        let fibers = build_fibers(&domain, params).unwrap();
        // Centroid is deep inside the trimmed interior.
        let centroid = Point2::new(0.5, 3f64.sqrt() / 6.0);
        assert_eq!(fibers.lambda_eval(&domain, centroid), 1.0);
        // Far outside.
        assert_eq!(fibers.lambda_eval(&domain, Point2::new(5.0, 5.0)), 0.0);
        // On the boundary the ratio vanishes.
        let (a, b) = domain.segment(0);
        let on = a + (b - a) * 0.37;
        assert!(fibers.lambda_eval(&domain, on).abs() < 1e-10);
        // Range everywhere on a coarse sample.
        for i in 0..2000 {
            let x = -0.4 + 1.8 * (i % 50) as f64 / 49.0;
            let y = -0.5 + 1.9 * (i / 50) as f64 / 39.0;
            let l = fibers.lambda_eval(&domain, Point2::new(x, y));
            assert!((0.0..=1.0).contains(&l));
        }
    }

    #[test]
    fn model_case_half_fiber() {
        // Unit-side level-0 triangle, bottom segment: the half fiber at the
        // origin is {0 <= x1 <= 1/2, 0 <= x2 <= a x1} and the cutoff is
        // x2 / (x1 a) there.
        let domain = tri_domain(0);
        let params = FiberParams::new(domain.ifs.theta(), 0.4).unwrap();
        let fibers = build_fibers(&domain, params).unwrap();
        let a = params.a;
        for i in 0..200 {
            let x1 = 0.01 + 0.48 * (i as f64 / 199.0);
            for j in 0..5 {
                let x2 = a * x1 * (j as f64 / 4.0);
                let got = fibers.lambda_eval(&domain, Point2::new(x1, x2));
                let expect = if x2 == 0.0 { 0.0 } else { x2 / (x1 * a) };
                assert!(
                    (got - expect).abs() <= 1e-10,
                    "x=({x1},{x2}): got {got}, expect {expect}"
                );
            }
        }
    }

    #[test]
    fn recovery_collapses_and_errors() {
        use crate::field::{Constant, FnField};
        let domain = tri_domain(1);
        let params = FiberParams::default_for(domain.ifs.theta());
        let fibers = build_fibers(&domain, params).unwrap();
        let nodes: Vec<Point2> = domain.boundary.clone();
        let is_boundary = vec![true; nodes.len()];
        let g = FnField(|x: Point2| 0.3 * x.x);
        // u = g collapses to g at boundary nodes.
        let v = recovery_sequence(
            &fibers,
            &domain,
            &nodes,
            &is_boundary,
            &g,
            &g,
            &Constant(f64::NEG_INFINITY),
            &Constant(f64::INFINITY),
        )
        .unwrap();
        for (val, x) in v.iter().zip(&nodes) {
            assert_eq!(*val, 0.3 * x.x);
        }
        // Where the cutoff is 1 and the obstacles are slack, the recovery
        // field equals the reference.
        let interior = [
            CENTROID_NODE,
            Point2::new(0.45, 0.25),
            Point2::new(0.6, 0.35),
        ];
        let u = FnField(|x: Point2| 0.1 + 0.05 * x.y);
        let v = recovery_sequence(
            &fibers,
            &domain,
            &interior,
            &[false; 3],
            &u,
            &g,
            &Constant(f64::NEG_INFINITY),
            &Constant(f64::INFINITY),
        )
        .unwrap();
        for (val, x) in v.iter().zip(&interior) {
            assert_eq!(fibers.lambda_eval(&domain, *x), 1.0);
            assert_eq!(*val, 0.1 + 0.05 * x.y);
        }
        // Crossing obstacles are rejected.
        let err = recovery_sequence(
            &fibers,
            &domain,
            &nodes,
            &vec![false; nodes.len()],
            &g,
            &g,
            &Constant(1.0),
            &Constant(-1.0),
        )
        .unwrap_err();
        assert!(matches!(err, FiberError::ObstaclesCross { .. }));
        // Boundary-incompatible datum rejected.
        let err = recovery_sequence(
            &fibers,
            &domain,
            &nodes,
            &is_boundary,
            &g,
            &Constant(9.0),
            &Constant(0.0),
            &Constant(1.0),
        )
        .unwrap_err();
        assert!(matches!(err, FiberError::BoundaryIncompatible { .. }));
    }
}
