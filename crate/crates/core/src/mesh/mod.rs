//! Conforming triangulations of pre-fractal domains.
//!
//! `triangulate` runs a constrained Delaunay triangulation of the boundary
//! polyline, Ruppert-style refinement against a minimum-angle floor and a
//! graded size field, then smart Laplacian smoothing of interior nodes.
//! Construction is fully deterministic: fixed insertion order, no random
//! point placement, so identical inputs produce byte-identical meshes.

mod delaunay;

use crate::error::MeshError;
use crate::geometry::PrefractalDomain;
use crate::point::{signed_area, Point2};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    /// Counterclockwise vertex-index triples.
    pub triangles: Vec<[u32; 3]>,
    /// Sorted vertex indices lying on the domain boundary.
    pub boundary_nodes: Vec<u32>,
    /// Boundary edges, canonically ordered by (min index, max index).
    pub boundary_edges: Vec<[u32; 2]>,
    /// Target interior edge length used to build the mesh.
    pub h_max: f64,
    /// For meshes built from a domain: parent boundary-segment id and the
    /// parameter interval each boundary edge covers on it. Lost on reload.
    pub boundary_parents: Option<Vec<(u32, f64, f64)>>,
}

#[derive(Debug, Clone, Copy)]
pub struct MeshOptions {
    pub h_max: f64,
    /// Allowed element growth per unit distance from the boundary (>= 1).
    pub grading: f64,
    pub angle_floor_deg: f64,
    pub smooth_passes: usize,
    pub max_insertions: usize,
}

impl MeshOptions {
    pub fn new(h_max: f64, grading: f64) -> Self {
        Self {
            h_max,
            grading,
            angle_floor_deg: 20.0,
            smooth_passes: 2,
            max_insertions: 400_000,
        }
    }
}

/// Quality triangulation of the domain; see the module docs for the
/// pipeline. All boundary polyline vertices appear as mesh vertices and
/// every mesh boundary edge lies on a boundary segment.
pub fn triangulate(domain: &PrefractalDomain, h_max: f64, grading: f64) -> Result<Mesh, MeshError> {
    triangulate_with(domain, MeshOptions::new(h_max, grading))
}

pub fn triangulate_with(domain: &PrefractalDomain, opts: MeshOptions) -> Result<Mesh, MeshError> {
    if opts.h_max.is_nan() || opts.h_max <= 0.0 {
        return Err(MeshError::BadHMax(opts.h_max));
    }
    if opts.grading.is_nan() || opts.grading < 1.0 {
        return Err(MeshError::BadGrading(opts.grading));
    }
    delaunay::build(domain, &opts)
}

/// Uniform refinement: each triangle splits into four by edge midpoints.
/// Parent vertices keep their indices and coordinates; boundary midpoints
/// become boundary nodes; `h_max` halves; angles are preserved exactly.
pub fn refine(mesh: &Mesh) -> Mesh {
    refine_with_map(mesh).0
}

/// `refine` plus, for each new vertex, the parent edge it bisects (in new
/// vertex order), so nodal fields can be prolonged structurally.
pub fn refine_with_map(mesh: &Mesh) -> (Mesh, Vec<(u32, u32)>) {
    let mut vertices = mesh.vertices.clone();
    let mut parent_edges: Vec<(u32, u32)> = Vec::new();
    let mut midpoint: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut mid = |a: u32, b: u32, vertices: &mut Vec<Point2>| -> u32 {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let p = (vertices[a as usize] + vertices[b as usize]) * 0.5;
            vertices.push(p);
            parent_edges.push(key);
            (vertices.len() - 1) as u32
        })
    };
    let mut triangles = Vec::with_capacity(mesh.triangles.len() * 4);
    for &[a, b, c] in &mesh.triangles {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary_nodes: Vec<u32> = mesh.boundary_nodes.clone();
    let mut boundary_edges = Vec::with_capacity(mesh.boundary_edges.len() * 2);
    let mut boundary_parents = mesh.boundary_parents.as_ref().map(|_| Vec::new());
    for (ei, &[a, b]) in mesh.boundary_edges.iter().enumerate() {
        let m = midpoint[&(a.min(b), a.max(b))];
        boundary_nodes.push(m);
        boundary_edges.push([a.min(m), a.max(m)]);
        boundary_edges.push([m.min(b), m.max(b)]);
        if let (Some(out), Some(src)) = (&mut boundary_parents, &mesh.boundary_parents) {
            let (parent, t0, t1) = src[ei];
            let tm = 0.5 * (t0 + t1);
            out.push((parent, t0, tm));
            out.push((parent, tm, t1));
        }
    }
    boundary_nodes.sort_unstable();
    boundary_nodes.dedup();
    let order = argsort_edges(&boundary_edges);
    let boundary_edges = permute(&boundary_edges, &order);
    let boundary_parents = boundary_parents.map(|p| permute(&p, &order));
    (
        Mesh {
            vertices,
            triangles,
            boundary_nodes,
            boundary_edges,
            h_max: mesh.h_max / 2.0,
            boundary_parents,
        },
        parent_edges,
    )
}

/// Prolongs a nodal field onto the refinement: parents copy, midpoints
/// average their edge endpoints.
pub fn prolong(values: &[f64], parent_edges: &[(u32, u32)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + parent_edges.len());
    out.extend_from_slice(values);
    for &(a, b) in parent_edges {
        out.push(0.5 * (values[a as usize] + values[b as usize]));
    }
    out
}

fn argsort_edges(edges: &[[u32; 2]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| edges[i]);
    order
}

fn permute<T: Clone>(items: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| items[i].clone()).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct MeshStats {
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub edge_count: usize,
    pub min_angle_deg: f64,
    pub total_area: f64,
    pub max_circumradius: f64,
}

impl Mesh {
    pub fn is_boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for &i in &self.boundary_nodes {
            mask[i as usize] = true;
        }
        mask
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn min_angle_deg(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for t in 0..self.triangles.len() {
            worst = worst.min(triangle_min_angle_deg(self.triangle_points(t)));
        }
        worst
    }

    /// Full conformity audit: positive orientation, interior edges shared by
    /// exactly two triangles, boundary edges by exactly one and equal to the
    /// declared boundary set, Euler characteristic, and (when parent data is
    /// present) exact coverage of every domain boundary segment.
    pub fn audit(&self) -> Result<MeshStats, MeshError> {
        let nv = self.vertices.len();
        let mut total_area = 0.0;
        let mut max_r = 0.0f64;
        for t in 0..self.triangles.len() {
            let area = self.triangle_area(t);
            if area <= 0.0 {
                return Err(MeshError::Conformity(format!(
                    "triangle {t} has non-positive area {area}"
                )));
            }
            total_area += area;
            max_r = max_r.max(circumradius(self.triangle_points(t)));
            for &v in &self.triangles[t] {
                if v as usize >= nv {
                    return Err(MeshError::Conformity(format!(
                        "triangle {t} references vertex {v} out of range"
                    )));
                }
            }
        }
        let mut incidence: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                *incidence.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let declared: std::collections::BTreeSet<(u32, u32)> = self
            .boundary_edges
            .iter()
            .map(|&[a, b]| (a.min(b), a.max(b)))
            .collect();
        if declared.len() != self.boundary_edges.len() {
            return Err(MeshError::Conformity("duplicate boundary edge".into()));
        }
        for (&edge, &count) in &incidence {
            let is_declared = declared.contains(&edge);
            match (count, is_declared) {
                (1, true) | (2, false) => {}
                (1, false) => {
                    return Err(MeshError::Conformity(format!(
                        "edge {edge:?} borders one triangle but is not a boundary edge"
                    )))
                }
                (2, true) => {
                    return Err(MeshError::Conformity(format!(
                        "declared boundary edge {edge:?} is interior"
                    )))
                }
                _ => {
                    return Err(MeshError::Conformity(format!(
                        "edge {edge:?} shared by {count} triangles"
                    )))
                }
            }
        }
        for e in &declared {
            if !incidence.contains_key(e) {
                return Err(MeshError::Conformity(format!(
                    "declared boundary edge {e:?} not present in any triangle"
                )));
            }
        }
        // Boundary nodes are exactly the endpoints of boundary edges.
        let mut endpoints: Vec<u32> = declared.iter().flat_map(|&(a, b)| [a, b]).collect();
        endpoints.sort_unstable();
        endpoints.dedup();
        if endpoints != self.boundary_nodes {
            return Err(MeshError::Conformity(
                "boundary_nodes do not match boundary edge endpoints".into(),
            ));
        }
        // Euler characteristic with the outer face.
        let v = nv as i64;
        let e = incidence.len() as i64;
        let f = self.triangles.len() as i64 + 1;
        if v - e + f != 2 {
            return Err(MeshError::Conformity(format!(
                "Euler characteristic violated: V={v} E={e} F={f}"
            )));
        }
        if let Some(parents) = &self.boundary_parents {
            // Per parent segment: parameter intervals tile [0, 1].
            let mut by_parent: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
            for &(p, t0, t1) in parents {
                by_parent.entry(p).or_default().push((t0, t1));
            }
            for (p, mut spans) in by_parent {
                spans.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut cursor = 0.0;
                for (t0, t1) in spans {
                    if (t0 - cursor).abs() > 1e-12 || t1 <= t0 {
                        return Err(MeshError::Conformity(format!(
                            "boundary segment {p} has a gap or overlap near t={cursor}"
                        )));
                    }
                    cursor = t1;
                }
                if (cursor - 1.0).abs() > 1e-12 {
                    return Err(MeshError::Conformity(format!(
                        "boundary segment {p} covered only up to t={cursor}"
                    )));
                }
            }
        }
        Ok(MeshStats {
            vertex_count: nv,
            triangle_count: self.triangles.len(),
            edge_count: incidence.len(),
            min_angle_deg: self.min_angle_deg(),
            total_area,
            max_circumradius: max_r,
        })
    }

    /// Boundary polyline in traversal order, reconstructed by walking the
    /// boundary edges.
    pub fn boundary_walk(&self) -> Vec<u32> {
        if self.boundary_edges.is_empty() {
            return Vec::new();
        }
        let mut nbrs: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for &[a, b] in &self.boundary_edges {
            nbrs.entry(a).or_default().push(b);
            nbrs.entry(b).or_default().push(a);
        }
        let start = self.boundary_edges[0][0];
        let mut walk = vec![start];
        let mut prev = u32::MAX;
        let mut cur = start;
        loop {
            let next = *nbrs[&cur]
                .iter()
                .find(|&&n| n != prev)
                .expect("boundary walk stalled");
            if next == start {
                break;
            }
            walk.push(next);
            prev = cur;
            cur = next;
            if walk.len() > self.boundary_edges.len() {
                break;
            }
        }
        walk
    }
}

pub(crate) fn triangle_min_angle_deg(p: [Point2; 3]) -> f64 {
    let mut min_angle = f64::INFINITY;
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let u = b - a;
        let v = c - a;
        let ang = (u.cross(v)).atan2(u.dot(v)).abs();
        min_angle = min_angle.min(ang);
    }
    min_angle.to_degrees()
}

pub(crate) fn circumradius(p: [Point2; 3]) -> f64 {
    let a = p[0].dist(p[1]);
    let b = p[1].dist(p[2]);
    let c = p[2].dist(p[0]);
    let area = signed_area(p[0], p[1], p[2]).abs();
    if area == 0.0 {
        return f64::INFINITY;
    }
    a * b * c / (4.0 * area)
}

pub(crate) fn circumcenter(p: [Point2; 3]) -> Point2 {
    let [a, b, c] = p;
    let d = 2.0 * ((b - a).cross(c - a));
    let bs = (b - a).norm_sq();
    let cs = (c - a).norm_sq();
    let ux = ((c.y - a.y) * bs - (b.y - a.y) * cs) / d;
    let uy = ((b.x - a.x) * cs - (c.x - a.x) * bs) / d;
    a + Point2::new(ux, uy)
}

/// Point location accelerator over a finished mesh.
pub struct TriLocator {
    lo: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl TriLocator {
    pub fn new(mesh: &Mesh) -> TriLocator {
        let mut lo = mesh.vertices[0];
        let mut hi = lo;
        for p in &mesh.vertices {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let mut max_ext = 0.0f64;
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangle_points(t);
            let w = a.x.max(b.x).max(c.x) - a.x.min(b.x).min(c.x);
            let h = a.y.max(b.y).max(c.y) - a.y.min(b.y).min(c.y);
            max_ext = max_ext.max(w.max(h));
        }
        let cell = (max_ext * 1.25).max(1e-300);
        let nx = (((hi.x - lo.x) / cell).ceil() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let cell_of = |v: f64, origin: f64, count: usize| {
            (((v - origin) / cell).floor().max(0.0) as usize).min(count - 1)
        };
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangle_points(t);
            let x0 = cell_of(a.x.min(b.x).min(c.x), lo.x, nx);
            let x1 = cell_of(a.x.max(b.x).max(c.x), lo.x, nx);
            let y0 = cell_of(a.y.min(b.y).min(c.y), lo.y, ny);
            let y1 = cell_of(a.y.max(b.y).max(c.y), lo.y, ny);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    buckets[cy * nx + cx].push(t as u32);
                }
            }
        }
        TriLocator {
            lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Containing triangle and barycentric coordinates; `rel_tol` admits
    /// points within a sliver of the triangle edges. Lowest triangle index
    /// wins ties so lookups are deterministic.
    pub fn locate(&self, mesh: &Mesh, p: Point2, rel_tol: f64) -> Option<(usize, [f64; 3])> {
        let ix = ((p.x - self.lo.x) / self.cell).floor();
        let iy = ((p.y - self.lo.y) / self.cell).floor();
        if ix < 0.0 || iy < 0.0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return None;
        }
        let bucket = &self.buckets[iy as usize * self.nx + ix as usize];
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in bucket {
            let [a, b, c] = mesh.triangle_points(t as usize);
            let area = signed_area(a, b, c);
            let wa = signed_area(p, b, c) / area;
            let wb = signed_area(a, p, c) / area;
            let wc = 1.0 - wa - wb;
            let worst = wa.min(wb).min(wc);
            if worst >= -rel_tol {
                // Prefer the most interior candidate; buckets iterate in
                // ascending triangle index, so ties keep the lowest index.
                match best {
                    Some((_, _, bw)) if bw >= worst => {}
                    _ => best = Some((t as usize, [wa, wb, wc], worst)),
                }
            }
        }
        best.map(|(t, w, _)| (t, w))
    }
}
