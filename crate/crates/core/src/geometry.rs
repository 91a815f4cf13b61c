//! Koch pre-fractal curves and snowflake-type domains.
//!
//! The construction follows the standard one-parameter family: four
//! contractive similitudes with ratio 1/alpha, 2 < alpha < 4, and rotation
//! angle `theta(alpha) = arcsin(sqrt(alpha(4-alpha))/2)`. A level-n curve on
//! a segment has `4^n` segments of length `|AB| alpha^(-n)`; a domain is a
//! convex polygon whose sides are replaced by outward-pointing level-n
//! curves.

use crate::error::GeometryError;
use crate::point::{segments_collide, signed_area, Point2};

/// Contraction parameter and derived rotation angle of the similitude family.
#[derive(Debug, Clone, Copy)]
pub struct IfsParams {
    alpha: f64,
    theta: f64,
}

/// Rotation angle `arcsin(sqrt(alpha(4-alpha))/2)`, the unique angle that
/// closes the four-segment generator.
pub fn theta_of_alpha(alpha: f64) -> Result<f64, GeometryError> {
    if !alpha.is_finite() || alpha <= 2.0 || alpha >= 4.0 {
        return Err(GeometryError::AlphaOutOfRange(alpha));
    }
    Ok(((alpha * (4.0 - alpha)).sqrt() / 2.0).asin())
}

/// Hausdorff dimension `ln 4 / ln alpha` of the limit curve, in (1, 2).
pub fn fractal_dimension(ifs: &IfsParams) -> f64 {
    4f64.ln() / ifs.alpha.ln()
}

impl IfsParams {
    pub fn new(alpha: f64) -> Result<Self, GeometryError> {
        let theta = theta_of_alpha(alpha)?;
        Ok(Self { alpha, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Height of the generator apex above the unit segment,
    /// `sqrt(1/alpha - 1/4)`.
    pub fn apex_height(&self) -> f64 {
        (1.0 / self.alpha - 0.25).sqrt()
    }
}

/// One of the four similitudes in the unit frame (segment (0,0)-(1,0)),
/// written in complex form:
///
/// ```text
/// psi_1(z) = z/a          psi_2(z) = (z/a) e^{i t} + 1/a
/// psi_3(z) = (z/a) e^{-i t} + 1/2 + i sqrt(1/a - 1/4)
/// psi_4(z) = (z-1)/a + 1
/// ```
///
/// Each map contracts distances by 1/alpha.
pub fn apply_similitude(index: usize, ifs: &IfsParams, p: Point2) -> Point2 {
    assert!((1..=4).contains(&index), "similitude index must be 1..=4");
    let a = ifs.alpha;
    let z = p / a;
    match index {
        1 => z,
        2 => z.rotated(ifs.theta) + Point2::new(1.0 / a, 0.0),
        3 => z.rotated(-ifs.theta) + Point2::new(0.5, ifs.apex_height()),
        _ => (p - Point2::new(1.0, 0.0)) / a + Point2::new(1.0, 0.0),
    }
}

/// Level-n pre-fractal curve on a segment, vertices ordered from `a` to `b`.
#[derive(Debug, Clone)]
pub struct PrefractalCurve {
    pub level: u32,
    pub endpoints: (Point2, Point2),
    pub vertices: Vec<Point2>,
}

impl PrefractalCurve {
    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn total_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Generates the level-n curve over [a, b] by recursive segment
/// subdivision: each segment [u, v] is replaced by the four-segment
/// generator through `u + w/alpha`, `u + w (1/2 + i h)`, `v - w/alpha`
/// (complex products in the segment frame). This is endpoint interpolation,
/// not n-fold map composition, so no rotation error accumulates.
///
/// The generator apex points to the left of the travel direction a -> b,
/// matching the unit-frame similitudes.
pub fn generate_prefractal(
    n: u32,
    ifs: &IfsParams,
    a: Point2,
    b: Point2,
) -> Result<PrefractalCurve, GeometryError> {
    if a == b {
        return Err(GeometryError::DegenerateSegment { x: a.x, y: a.y });
    }
    let mut verts = vec![a, b];
    let h = ifs.apex_height();
    let inv_alpha = 1.0 / ifs.alpha;
    for _ in 0..n {
        let mut next = Vec::with_capacity((verts.len() - 1) * 4 + 1);
        next.push(verts[0]);
        for w in verts.windows(2) {
            let (u, v) = (w[0], w[1]);
            let d = v - u;
            next.push(u + d * inv_alpha);
            next.push(u + d.cmul(Point2::new(0.5, h)));
            next.push(v - d * inv_alpha);
            next.push(v);
        }
        verts = next;
    }
    Ok(PrefractalCurve {
        level: n,
        endpoints: (a, b),
        vertices: verts,
    })
}

/// Snowflake-type domain: convex base polygon with each side replaced by an
/// outward-pointing level-n curve.
#[derive(Debug, Clone)]
pub struct PrefractalDomain {
    pub base: Vec<Point2>,
    pub level: u32,
    pub ifs: IfsParams,
    /// Closed boundary polyline, counterclockwise, without a repeated
    /// closing vertex. Segment i joins vertex i and vertex (i+1) % len.
    pub boundary: Vec<Point2>,
    pub area: f64,
    bbox: (Point2, Point2),
}

/// Vertices of a regular m-gon with unit side length, counterclockwise,
/// first side on the x-axis from the origin.
pub fn regular_polygon(sides: usize) -> Vec<Point2> {
    assert!(sides >= 3);
    let ext = 2.0 * std::f64::consts::PI / sides as f64;
    let mut pts = Vec::with_capacity(sides);
    let mut pos = Point2::new(0.0, 0.0);
    let mut dir = Point2::new(1.0, 0.0);
    for _ in 0..sides {
        pts.push(pos);
        pos = pos + dir;
        dir = dir.rotated(ext);
    }
    pts
}

fn check_convex_ccw(base: &[Point2]) -> Result<(), GeometryError> {
    if base.len() < 3 {
        return Err(GeometryError::TooFewVertices(base.len()));
    }
    let m = base.len();
    for i in 0..m {
        let a = base[i];
        let b = base[(i + 1) % m];
        let c = base[(i + 2) % m];
        if signed_area(a, b, c) <= 0.0 {
            return Err(GeometryError::NotConvexCcw(i));
        }
    }
    Ok(())
}

/// Shoelace area of a closed polyline (no repeated closing vertex).
pub fn polygon_area(pts: &[Point2]) -> f64 {
    let m = pts.len();
    let mut acc = 0.0;
    for i in 0..m {
        acc += pts[i].cross(pts[(i + 1) % m]);
    }
    0.5 * acc
}

/// Simplicity audit: returns the first pair of non-adjacent boundary
/// segments that intersect, if any. Uses a uniform grid over segment
/// bounding boxes so the test stays near-linear in the segment count.
pub fn find_self_intersection(boundary: &[Point2]) -> Option<(usize, usize)> {
    let m = boundary.len();
    if m < 4 {
        return None;
    }
    let seg = |i: usize| (boundary[i], boundary[(i + 1) % m]);
    let mut max_len = 0.0f64;
    let (mut lo, mut hi) = (boundary[0], boundary[0]);
    for i in 0..m {
        let (a, b) = seg(i);
        max_len = max_len.max(a.dist(b));
        lo = Point2::new(lo.x.min(a.x), lo.y.min(a.y));
        hi = Point2::new(hi.x.max(a.x), hi.y.max(a.y));
    }
    let cell = (max_len * 1.5).max(1e-300);
    let nx = (((hi.x - lo.x) / cell).ceil() as usize + 1).max(1);
    let ny = (((hi.y - lo.y) / cell).ceil() as usize + 1).max(1);
    let cell_of = |v: f64, origin: f64, count: usize| -> usize {
        (((v - origin) / cell).floor().max(0.0) as usize).min(count - 1)
    };
    // Register each segment in every cell its bounding box overlaps; two
    // intersecting segments then always share a bucket.
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
    for i in 0..m {
        let (a, b) = seg(i);
        let x0 = cell_of(a.x.min(b.x), lo.x, nx);
        let x1 = cell_of(a.x.max(b.x), lo.x, nx);
        let y0 = cell_of(a.y.min(b.y), lo.y, ny);
        let y1 = cell_of(a.y.max(b.y), lo.y, ny);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                buckets[cy * nx + cx].push(i as u32);
            }
        }
    }
    let tol = 1e-12 * (hi - lo).norm().max(1.0);
    let mut candidates: Vec<(u32, u32)> = Vec::new();
    for bucket in &buckets {
        for (ai, &i) in bucket.iter().enumerate() {
            for &j in &bucket[ai + 1..] {
                let gap = (j as usize + m - i as usize) % m;
                if gap <= 1 || gap == m - 1 {
                    continue; // adjacent along the polyline
                }
                candidates.push((i.min(j), i.max(j)));
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    for (i, j) in candidates {
        let (a, b) = seg(i as usize);
        let (c, d) = seg(j as usize);
        if segments_collide(a, b, c, d, tol) {
            return Some((i as usize, j as usize));
        }
    }
    None
}

/// Builds the level-n snowflake domain over a convex counterclockwise base.
///
/// Each side is traversed a -> b; the outward side is the right of travel,
/// so the curve is generated in the reversed frame (b -> a puts the
/// generator apex on the outward side) and flipped back.
pub fn build_domain(
    base: &[Point2],
    n: u32,
    ifs: &IfsParams,
) -> Result<PrefractalDomain, GeometryError> {
    check_convex_ccw(base)?;
    let m = base.len();
    let mut boundary = Vec::with_capacity(m * 4usize.pow(n));
    for i in 0..m {
        let a = base[i];
        let b = base[(i + 1) % m];
        let mut curve = generate_prefractal(n, ifs, b, a)?.vertices;
        curve.reverse(); // now ordered a -> b with bumps outward
        boundary.extend_from_slice(&curve[..curve.len() - 1]);
    }
    if let Some((first, second)) = find_self_intersection(&boundary) {
        return Err(GeometryError::SelfIntersection { first, second });
    }
    let area = polygon_area(&boundary);
    let mut lo = boundary[0];
    let mut hi = boundary[0];
    for p in &boundary {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    Ok(PrefractalDomain {
        base: base.to_vec(),
        level: n,
        ifs: *ifs,
        boundary,
        area,
        bbox: (lo, hi),
    })
}

impl PrefractalDomain {
    pub fn segment_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn bbox(&self) -> (Point2, Point2) {
        self.bbox
    }

    pub fn segment(&self, i: usize) -> (Point2, Point2) {
        (
            self.boundary[i],
            self.boundary[(i + 1) % self.boundary.len()],
        )
    }

    /// Even-odd containment test. Points exactly on the boundary follow the
    /// half-open edge convention of the crossing test; callers that care use
    /// `on_boundary` first.
    pub fn contains(&self, p: Point2) -> bool {
        let (lo, hi) = self.bbox;
        if p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y {
            return false;
        }
        let m = self.boundary.len();
        let mut inside = false;
        for i in 0..m {
            let a = self.boundary[i];
            let b = self.boundary[(i + 1) % m];
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                let xint = a.x + t * (b.x - a.x);
                if p.x < xint {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn on_boundary(&self, p: Point2, tol: f64) -> bool {
        let m = self.boundary.len();
        for i in 0..m {
            let (a, b) = self.segment(i);
            if crate::point::dist_sq_to_segment(p, a, b) <= tol * tol {
                return true;
            }
        }
        false
    }
}
